#include "dta/composer.hpp"

#include <spdlog/spdlog.h>

#include "dta/error.hpp"

namespace dta {

namespace {

const ActionRegistry::Entry& clustered_entry(const ActionRegistry& registry, const ActionId& action) {
  if (action.is_api()) throw Error("cannot sample a segment for API action " + action.tag());
  const auto* entry = registry.find(action);
  if (!entry) throw Error("unknown action " + action.tag());
  if (entry->members.empty()) throw Error("action " + action.tag() + " has no segments");
  return *entry;
}

}  // namespace

std::string sample_segment(const ActionRegistry& registry, const ActionId& action, Rng& rng) {
  const auto& entry = clustered_entry(registry, action);
  std::size_t total = 0;
  for (const auto& m : entry.members) total += m.frequency;
  if (total == 0) return entry.members[rng.below(entry.members.size())].text;
  std::size_t r = rng.below(total);
  for (const auto& m : entry.members) {
    if (r < m.frequency) return m.text;
    r -= m.frequency;
  }
  return entry.members.back().text;
}

std::string most_frequent_segment(const ActionRegistry& registry, const ActionId& action) {
  const auto& entry = clustered_entry(registry, action);
  const ActionRegistry::Member* best = &entry.members.front();
  for (const auto& m : entry.members)
    if (m.frequency > best->frequency) best = &m;
  return best->text;
}

ComposedReply compose_response(const ActionRegistry& registry, const std::vector<ActionId>& actions, Rng& rng,
                               ApiExecutor* executor, const ComposeOptions& options) {
  ComposedReply reply;
  reply.actions = actions;
  std::vector<std::string> parts;
  for (const auto& action : actions) {
    if (action.is_api()) {
      ExecutedCall call{action.api_name(), options.api_args, {}, true};
      if (!executor) {
        call.ok = false;
        call.result = "no API executor configured";
      } else {
        try {
          call.result = executor->execute(call.name, call.args);
        } catch (const std::exception& e) {
          call.ok = false;
          call.result = e.what();
        }
      }
      if (!call.ok) spdlog::warn("API {} failed: {}", call.name, call.result);
      reply.api_calls.push_back(std::move(call));
      continue;
    }
    const auto* entry = registry.find(action);
    if (action.is_reserved() || !entry || entry->members.empty()) {
      spdlog::info("skipping action {} during composition", action.tag());
      reply.skipped.push_back(action);
      continue;
    }
    std::string text = options.choice == SegmentChoice::sample ? sample_segment(registry, action, rng)
                                                               : most_frequent_segment(registry, action);
    parts.push_back(text);
    reply.segments.push_back({action, std::move(text)});
  }
  reply.text = join(parts, options.mode == TextMode::ascii ? " " : "");
  return reply;
}

}  // namespace dta
