#include "dta/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <unordered_set>

#include <json.hpp>

#include "dta/error.hpp"
#include "dta/random.hpp"

namespace dta {

using nlohmann::json;

void validate_dialogue(const Dialogue& dialogue) {
  if (dialogue.id.empty()) throw Error("dialogue id is empty");
  const auto where = [&](std::size_t i) {
    return "dialogue " + dialogue.id + " turn " + std::to_string(i) + ": ";
  };
  for (std::size_t i = 0; i < dialogue.turns.size(); ++i) {
    const Turn& turn = dialogue.turns[i];
    if (turn.text.empty() && !turn.api_call) throw Error(where(i) + "neither text nor api_call");
    if (turn.api_result && !turn.api_call) throw Error(where(i) + "api_result without api_call");
    if (turn.api_call && turn.speaker != Speaker::staff) throw Error(where(i) + "user turn carries an api_call");
    if (turn.api_call && turn.api_call->name.empty()) throw Error(where(i) + "api_call without name");
    if (i == 0) {
      if (turn.speaker != Speaker::user) throw Error(where(i) + "dialogue must start with a user turn");
      continue;
    }
    const Turn& prev = dialogue.turns[i - 1];
    // staff records may follow each other only when the earlier one is an API call
    if (turn.speaker == Speaker::user && prev.speaker == Speaker::user)
      throw Error(where(i) + "two consecutive user turns");
    if (turn.speaker == Speaker::staff && prev.speaker == Speaker::staff && !prev.is_api())
      throw Error(where(i) + "staff turn follows a non-API staff turn");
  }
}

std::vector<ReplySpan> reply_spans(const Dialogue& dialogue) {
  std::vector<ReplySpan> spans;
  const auto& turns = dialogue.turns;
  std::size_t i = 0;
  while (i < turns.size()) {
    if (turns[i].speaker != Speaker::user) {
      ++i;
      continue;
    }
    std::size_t first = i + 1;
    std::size_t last = first;
    while (last < turns.size() && turns[last].speaker == Speaker::staff) ++last;
    if (last > first) spans.push_back({i, first, last});
    i = std::max(last, i + 1);
  }
  return spans;
}

namespace {

json turn_to_json(const Turn& turn) {
  json j;
  j["speaker"] = turn.speaker == Speaker::user ? "user" : "staff";
  j["text"] = turn.text;
  if (turn.api_call) j["api_call"] = {{"name", turn.api_call->name}, {"args", turn.api_call->args}};
  if (turn.api_result) j["api_result"] = *turn.api_result;
  return j;
}

Turn turn_from_json(const json& j, std::size_t line) {
  if (!j.is_object()) throw ParseError(line, "turn is not an object");
  Turn turn;
  if (!j.contains("speaker") || !j["speaker"].is_string()) throw ParseError(line, "turn missing \"speaker\"");
  const std::string speaker = j["speaker"];
  if (speaker == "user") {
    turn.speaker = Speaker::user;
  } else if (speaker == "staff") {
    turn.speaker = Speaker::staff;
  } else {
    throw ParseError(line, "unknown speaker '" + speaker + "'");
  }
  if (j.contains("text")) {
    if (!j["text"].is_string()) throw ParseError(line, "\"text\" is not a string");
    turn.text = j["text"];
  }
  if (j.contains("api_call") && !j["api_call"].is_null()) {
    const json& call = j["api_call"];
    if (!call.is_object() || !call.contains("name") || !call["name"].is_string())
      throw ParseError(line, "\"api_call\" needs a string \"name\"");
    ApiCall api{call["name"].get<std::string>(), {}};
    if (call.contains("args")) {
      if (!call["args"].is_object()) throw ParseError(line, "\"args\" is not an object");
      for (const auto& [key, value] : call["args"].items()) {
        if (!value.is_string()) throw ParseError(line, "api arg '" + key + "' is not a string");
        api.args[key] = value.get<std::string>();
      }
    }
    turn.api_call = std::move(api);
  }
  if (j.contains("api_result") && !j["api_result"].is_null()) {
    if (!j["api_result"].is_string()) throw ParseError(line, "\"api_result\" is not a string");
    turn.api_result = j["api_result"].get<std::string>();
  }
  return turn;
}

}  // namespace

std::string to_json_line(const Dialogue& dialogue) {
  json j;
  j["id"] = dialogue.id;
  j["turns"] = json::array();
  for (const auto& turn : dialogue.turns) j["turns"].push_back(turn_to_json(turn));
  return j.dump();
}

Dialogue dialogue_from_json_line(const std::string& line, std::size_t line_number) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(line_number, std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError(line_number, "record is not an object");
  if (!j.contains("id") || !j["id"].is_string()) throw ParseError(line_number, "missing \"id\" field");
  if (!j.contains("turns")) throw ParseError(line_number, "missing \"turns\" field");
  if (!j["turns"].is_array()) throw ParseError(line_number, "\"turns\" is not an array");
  Dialogue dialogue;
  dialogue.id = j["id"];
  for (const auto& t : j["turns"]) dialogue.turns.push_back(turn_from_json(t, line_number));
  try {
    validate_dialogue(dialogue);
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw ParseError(line_number, e.what());
  }
  return dialogue;
}

std::vector<Dialogue> read_corpus(std::istream& in) {
  std::vector<Dialogue> out;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Dialogue d = dialogue_from_json_line(line, number);
    if (!ids.insert(d.id).second) throw ParseError(number, "duplicate dialogue id '" + d.id + "'");
    out.push_back(std::move(d));
  }
  if (in.bad()) throw Error("read failure");
  return out;
}

void write_corpus(std::ostream& out, const std::vector<Dialogue>& dialogues) {
  for (const auto& d : dialogues) out << to_json_line(d) << '\n';
}

std::vector<Dialogue> load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open corpus " + path.string());
  try {
    return read_corpus(in);
  } catch (const ParseError& e) {
    throw ParseError(e.line(), path.string() + ": " + e.what());
  }
}

void save_corpus(const std::filesystem::path& path, const std::vector<Dialogue>& dialogues) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write corpus " + path.string());
  write_corpus(out, dialogues);
  if (!out) throw Error("write failure on " + path.string());
}

CorpusSplit split_corpus(const std::vector<Dialogue>& dialogues,
                         const std::array<double, 3>& ratios, std::uint64_t seed) {
  double sum = 0.0;
  for (double r : ratios) {
    if (r < 0.0 || !std::isfinite(r)) throw Error("split ratios must be non-negative");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw Error("split ratios must sum to 1");
  if (ratios[0] <= 0.0) throw Error("train ratio must be positive");

  const std::size_t n = dialogues.size();
  std::array<std::size_t, 3> sizes{};
  std::size_t nonzero = 0;
  for (int k = 0; k < 3; ++k) {
    sizes[k] = static_cast<std::size_t>(std::floor(ratios[k] * static_cast<double>(n) + 1e-9));
    if (ratios[k] > 0.0) ++nonzero;
  }
  if (n < nonzero) throw Error("fewer dialogues than non-empty partitions");
  sizes[0] = n - sizes[1] - sizes[2];
  // every partition with a positive ratio receives at least one dialogue
  for (int k = 1; k < 3; ++k) {
    if (ratios[k] > 0.0 && sizes[k] == 0 && sizes[0] > 1) {
      sizes[k] = 1;
      --sizes[0];
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order.begin(), order.end());

  CorpusSplit split;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < sizes[0]; ++i) split.train.push_back(dialogues[order[pos++]]);
  for (std::size_t i = 0; i < sizes[1]; ++i) split.dev.push_back(dialogues[order[pos++]]);
  for (std::size_t i = 0; i < sizes[2]; ++i) split.test.push_back(dialogues[order[pos++]]);
  return split;
}

CorpusStats corpus_stats(const std::vector<Dialogue>& dialogues,
                         std::optional<std::size_t> action_count) {
  CorpusStats stats;
  stats.dialog_count = dialogues.size();
  for (const auto& d : dialogues) stats.total_turns += d.turns.size();
  stats.avg_turns_per_dialog =
      stats.dialog_count ? static_cast<double>(stats.total_turns) / static_cast<double>(stats.dialog_count) : 0.0;
  stats.action_count = action_count;
  return stats;
}

}  // namespace dta
