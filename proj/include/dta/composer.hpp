#pragma once

#include <map>
#include <string>
#include <vector>

#include "dta/actions.hpp"
#include "dta/api.hpp"
#include "dta/random.hpp"
#include "dta/text.hpp"

namespace dta {

// Draws member i of a clustered action with probability f_i / sum_j f_j.
std::string sample_segment(const ActionRegistry& registry, const ActionId& action, Rng& rng);

// The member with the highest frequency (first in registry order).
std::string most_frequent_segment(const ActionRegistry& registry, const ActionId& action);

struct ChosenSegment {
  ActionId action;
  std::string text;
};

struct ExecutedCall {
  std::string name;
  std::map<std::string, std::string> args;
  std::string result;
  bool ok = true;  // false: `result` holds the error message
};

struct ComposedReply {
  std::string text;
  std::vector<ActionId> actions;
  std::vector<ChosenSegment> segments;
  std::vector<ExecutedCall> api_calls;
  std::vector<ActionId> skipped;  // UNK, reserved, or unknown actions
};

enum class SegmentChoice { sample, most_frequent };

struct ComposeOptions {
  TextMode mode = TextMode::ascii;
  SegmentChoice choice = SegmentChoice::sample;
  std::map<std::string, std::string> api_args;  // arguments for every API call
};

// Clustered actions contribute a segment each, joined in order; API actions
// run through the executor (a null executor reports an error per call).
ComposedReply compose_response(const ActionRegistry& registry, const std::vector<ActionId>& actions, Rng& rng,
                               ApiExecutor* executor, const ComposeOptions& options = {});

}  // namespace dta
