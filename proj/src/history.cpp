#include "dta/history.hpp"

#include <map>
#include <unordered_map>

#include "dta/error.hpp"

namespace dta {

HistoryMode parse_history_mode(const std::string& name) {
  if (name == "full") return HistoryMode::full;
  if (name == "no-actions") return HistoryMode::without_actions;
  if (name == "no-words") return HistoryMode::without_words;
  throw Error("unknown ablation '" + name + "' (expected full|no-actions|no-words)");
}

const char* to_string(HistoryMode mode) {
  switch (mode) {
    case HistoryMode::full: return "full";
    case HistoryMode::without_actions: return "no-actions";
    case HistoryMode::without_words: return "no-words";
  }
  return "full";
}

OutputMode parse_output_mode(const std::string& name) {
  if (name == "action") return OutputMode::actions;
  if (name == "token") return OutputMode::tokens;
  throw Error("unknown mode '" + name + "' (expected action|token)");
}

const char* to_string(OutputMode mode) { return mode == OutputMode::actions ? "action" : "token"; }

std::vector<Exchange> build_exchanges(const Dialogue& dialogue, const std::vector<StandardizedTurn>& actions,
                                      TextMode mode) {
  std::map<std::size_t, const StandardizedTurn*> by_turn;
  for (const auto& st : actions)
    if (st.dialogue_id == dialogue.id) by_turn[st.turn_index] = &st;

  std::vector<Exchange> out;
  const auto& turns = dialogue.turns;
  for (std::size_t i = 0; i < turns.size(); ++i) {
    if (turns[i].speaker != Speaker::user) continue;
    Exchange ex;
    ex.user_tokens = word_tokens(turns[i].text, mode);
    std::size_t j = i + 1;
    ex.staff_turn = j;
    ex.answered = j < turns.size() && turns[j].speaker == Speaker::staff;
    std::vector<std::string> texts;
    for (; j < turns.size() && turns[j].speaker == Speaker::staff; ++j) {
      const Turn& st = turns[j];
      if (st.is_api()) {
        ex.api_calls.push_back(st.api_call->name);
        ex.reply_tokens.push_back("API:" + st.api_call->name);
        if (st.api_result)
          for (auto& w : word_tokens(*st.api_result, mode)) ex.staff_words.push_back(std::move(w));
      }
      if (!st.text.empty()) {
        texts.push_back(st.text);
        for (auto& w : word_tokens(st.text, mode)) {
          ex.staff_words.push_back(w);
          ex.reply_tokens.push_back(std::move(w));
        }
      }
      if (auto it = by_turn.find(j); it != by_turn.end())
        for (const auto& a : it->second->actions) ex.actions.push_back(a.tag());
    }
    ex.reply_text = join(texts, mode == TextMode::ascii ? " " : "");
    out.push_back(std::move(ex));
  }
  return out;
}

HistoryEncoding encode_history(const std::vector<Exchange>& exchanges, std::size_t current, std::size_t window,
                               HistoryMode mode, const Vocab* vocab) {
  if (current >= exchanges.size()) throw Error("encode_history: exchange index out of range");
  HistoryEncoding enc;
  enc.window = window;
  enc.mode = mode;
  const std::size_t begin = current > window ? current - window : 0;
  auto append = [&](const std::vector<std::string>& tokens) { enc.tokens.insert(enc.tokens.end(), tokens.begin(), tokens.end()); };
  for (std::size_t i = begin; i < current; ++i) {
    const Exchange& ex = exchanges[i];
    enc.tokens.push_back(kUserMarker);
    append(ex.user_tokens);
    if (mode != HistoryMode::without_words) {
      enc.tokens.push_back(kStaffMarker);
      append(ex.staff_words);
    }
    if (mode != HistoryMode::without_actions) {
      enc.tokens.push_back(kActionMarker);
      append(ex.actions);
    }
  }
  enc.tokens.push_back(kUserMarker);
  append(exchanges[current].user_tokens);
  if (vocab) enc.ids = vocab->encode(enc.tokens);
  return enc;
}

HistoryEncoding encode_history(const Dialogue& dialogue, const std::vector<StandardizedTurn>& actions,
                               std::size_t staff_turn, std::size_t window, HistoryMode mode, TextMode text_mode,
                               const Vocab* vocab) {
  if (staff_turn >= dialogue.turns.size() || dialogue.turns[staff_turn].speaker != Speaker::staff)
    throw Error("encode_history: turn " + std::to_string(staff_turn) + " is not a staff turn");
  const auto exchanges = build_exchanges(dialogue, actions, text_mode);
  // locate the exchange whose reply contains this staff record
  std::size_t current = exchanges.size();
  for (std::size_t i = 0; i < exchanges.size(); ++i)
    if (exchanges[i].staff_turn <= staff_turn) current = i;
  if (current == exchanges.size()) throw Error("encode_history: staff turn has no preceding user turn");
  return encode_history(exchanges, current, window, mode, vocab);
}

Vocabularies build_vocab(const std::vector<std::vector<Exchange>>& corpus, const ActionRegistry& registry,
                         OutputMode output, std::size_t min_freq) {
  if (corpus.empty()) throw Error("build_vocab: empty corpus");
  Vocabularies v;
  std::unordered_map<std::string, std::size_t> words;
  std::unordered_map<std::string, std::size_t> replies;
  for (const auto& dialogue : corpus) {
    for (const auto& ex : dialogue) {
      for (const auto& w : ex.user_tokens) ++words[w];
      for (const auto& w : ex.staff_words) ++words[w];
      for (const auto& w : ex.reply_tokens) ++replies[w];
    }
  }
  for (const auto& m : {kUserMarker, kStaffMarker, kActionMarker}) v.encoder.add(m);
  for (const auto& e : registry.entries()) {
    v.encoder.add(e.id.tag());
    if (output == OutputMode::actions) v.decoder.add(e.id.tag());
  }
  add_by_frequency(v.encoder, words, min_freq);
  if (output == OutputMode::tokens) add_by_frequency(v.decoder, replies, min_freq);
  return v;
}

std::vector<Example> make_examples(const std::vector<std::vector<Exchange>>& corpus, const Vocabularies& vocab,
                                   OutputMode output, std::size_t window, HistoryMode mode) {
  std::vector<Example> out;
  for (const auto& dialogue : corpus) {
    for (std::size_t i = 0; i < dialogue.size(); ++i) {
      if (!dialogue[i].answered) continue;
      Example ex;
      ex.source = encode_history(dialogue, i, window, mode, &vocab.encoder).ids;
      ex.target = vocab.decoder.encode(output == OutputMode::actions ? dialogue[i].actions : dialogue[i].reply_tokens);
      if (ex.target.empty()) continue;
      out.push_back(std::move(ex));
    }
  }
  return out;
}

}  // namespace dta
