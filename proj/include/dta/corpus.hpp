#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dta {

enum class Speaker { user, staff };

struct ApiCall {
  std::string name;
  std::map<std::string, std::string> args;

  bool operator==(const ApiCall&) const = default;
};

struct Turn {
  Speaker speaker = Speaker::user;
  std::string text;
  std::optional<ApiCall> api_call;
  std::optional<std::string> api_result;

  bool is_api() const { return api_call.has_value(); }
  bool operator==(const Turn&) const = default;
};

struct Dialogue {
  std::string id;
  std::vector<Turn> turns;

  bool operator==(const Dialogue&) const = default;
};

// One logical staff reply: consecutive staff records following a user turn.
struct ReplySpan {
  std::size_t user_turn;
  std::size_t first;  // first staff record
  std::size_t last;   // one past the last staff record
};

struct CorpusStats {
  std::size_t dialog_count = 0;
  std::size_t total_turns = 0;
  double avg_turns_per_dialog = 0.0;
  std::optional<std::size_t> action_count;
};

// Throws dta::Error describing the first violated invariant.
void validate_dialogue(const Dialogue& dialogue);

// Logical staff replies in turn order. Assumes a valid dialogue.
std::vector<ReplySpan> reply_spans(const Dialogue& dialogue);

std::string to_json_line(const Dialogue& dialogue);
Dialogue dialogue_from_json_line(const std::string& line, std::size_t line_number);

std::vector<Dialogue> read_corpus(std::istream& in);
void write_corpus(std::ostream& out, const std::vector<Dialogue>& dialogues);

std::vector<Dialogue> load_corpus(const std::filesystem::path& path);
void save_corpus(const std::filesystem::path& path, const std::vector<Dialogue>& dialogues);

struct CorpusSplit {
  std::vector<Dialogue> train;
  std::vector<Dialogue> dev;
  std::vector<Dialogue> test;
};

// Partitions by dialogue. Partition sizes are floor(ratio * n) with the
// remainder added to train; membership is a seeded shuffle.
CorpusSplit split_corpus(const std::vector<Dialogue>& dialogues,
                         const std::array<double, 3>& ratios, std::uint64_t seed);

CorpusStats corpus_stats(const std::vector<Dialogue>& dialogues,
                         std::optional<std::size_t> action_count = std::nullopt);

}  // namespace dta
