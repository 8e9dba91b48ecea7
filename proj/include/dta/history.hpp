#pragma once

#include <string>
#include <vector>

#include "dta/actions.hpp"
#include "dta/corpus.hpp"
#include "dta/standardizer.hpp"
#include "dta/text.hpp"
#include "dta/vocab.hpp"

namespace dta {

inline const std::string kUserMarker = "[USR]";
inline const std::string kStaffMarker = "[STF]";
inline const std::string kActionMarker = "[ACT]";

enum class HistoryMode { full, without_actions, without_words };

HistoryMode parse_history_mode(const std::string& name);  // full | no-actions | no-words
const char* to_string(HistoryMode mode);

// A user turn and the logical staff reply that answered it.
struct Exchange {
  std::vector<std::string> user_tokens;
  std::vector<std::string> staff_words;   // reply text plus API results, as seen in history
  std::vector<std::string> reply_tokens;  // reply text with API calls as "API:<name>" tokens
  std::vector<std::string> actions;       // action tags of the reply
  std::vector<std::string> api_calls;     // API names in order
  std::string reply_text;                 // verbal part of the reply
  std::size_t staff_turn = 0;             // first staff record of the reply
  bool answered = true;                   // false for a trailing user turn
};

// Exchanges of a dialogue. `actions` must hold the standardized actions of
// every staff record (matched by turn index); missing records yield none.
std::vector<Exchange> build_exchanges(const Dialogue& dialogue, const std::vector<StandardizedTurn>& actions,
                                      TextMode mode);

struct HistoryEncoding {
  std::size_t window = 3;
  HistoryMode mode = HistoryMode::full;
  std::vector<std::string> tokens;
  std::vector<int> ids;
};

// Tokens for predicting the reply to exchange `current`: up to `window`
// previous exchanges, then the current user utterance.
HistoryEncoding encode_history(const std::vector<Exchange>& exchanges, std::size_t current, std::size_t window,
                               HistoryMode mode, const Vocab* vocab = nullptr);

// Same, addressed by the index of a staff record in the dialogue.
HistoryEncoding encode_history(const Dialogue& dialogue, const std::vector<StandardizedTurn>& actions,
                               std::size_t staff_turn, std::size_t window, HistoryMode mode, TextMode text_mode,
                               const Vocab* vocab = nullptr);

enum class OutputMode { actions, tokens };

OutputMode parse_output_mode(const std::string& name);  // action | token
const char* to_string(OutputMode mode);

struct Vocabularies {
  Vocab encoder;
  Vocab decoder;
};

// Encoder: markers, every action tag of the registry, then corpus words with
// count >= min_freq. Decoder: action tags, or reply tokens in token mode.
Vocabularies build_vocab(const std::vector<std::vector<Exchange>>& corpus, const ActionRegistry& registry,
                         OutputMode output, std::size_t min_freq = 1);

struct Example {
  std::vector<int> source;
  std::vector<int> target;  // without BOS/EOS
};

std::vector<Example> make_examples(const std::vector<std::vector<Exchange>>& corpus, const Vocabularies& vocab,
                                   OutputMode output, std::size_t window, HistoryMode mode);

}  // namespace dta
