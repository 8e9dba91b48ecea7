#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

#include "dta/corpus.hpp"

namespace dta {

struct GeneratorConfig {
  std::size_t dialog_count = 1000;
  std::size_t template_count = 30;  // distinct staff segment templates (gold actions)
  std::size_t variants = 5;         // paraphrase variants per template

  static constexpr std::size_t kMaxTemplates = 40;
  static constexpr std::size_t kMaxVariants = 5;
};

// Parses "key = value" lines; '#' starts a comment.
GeneratorConfig parse_generator_config(std::istream& in);
GeneratorConfig load_generator_config(const std::filesystem::path& path);

// Gold annotation of one staff record: template ids of its segments, or
// the API name for an API record.
struct GoldTurn {
  std::string dialogue_id;
  std::size_t turn_index = 0;
  std::vector<std::size_t> templates;
  std::string api;
};

struct SyntheticCorpus {
  std::vector<Dialogue> dialogues;
  std::vector<GoldTurn> gold;
  // every template/variant string; catalogue_label[i] is its template id
  std::vector<std::string> catalogue;
  std::vector<std::size_t> catalogue_label;

  // segment text -> template id
  std::unordered_map<std::string, std::size_t> label_index() const;
};

SyntheticCorpus generate_synthetic(const GeneratorConfig& config, std::uint64_t seed);

std::string gold_label(std::size_t template_id);  // "T<id>"

void write_gold(std::ostream& out, const std::vector<GoldTurn>& gold);
std::vector<GoldTurn> read_gold(std::istream& in);

}  // namespace dta
