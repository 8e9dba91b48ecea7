#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "dta/actions.hpp"
#include "dta/bm25.hpp"
#include "dta/corpus.hpp"
#include "dta/reranker.hpp"
#include "dta/segmenter.hpp"
#include "dta/vectorizer.hpp"

namespace dta {

struct StandardizedTurn {
  std::string dialogue_id;
  std::size_t turn_index = 0;
  std::vector<ActionId> actions;
  std::vector<double> confidence;  // per segment; API records carry 1.0

  bool operator==(const StandardizedTurn& o) const {
    return dialogue_id == o.dialogue_id && turn_index == o.turn_index && actions == o.actions;
  }
};

struct SegmentLabel {
  ActionId action;
  double confidence = 0.0;     // S(x, u)
  double preactivation = 0.0;  // w . f + b
  std::size_t matched_doc = 0;
  bool recalled = false;
};

// BM25 over the member segments of every clustered action, in registry order.
Bm25Index registry_index(const ActionRegistry& registry, TextMode mode = TextMode::ascii);

// Labels segments with the action of the best reranked BM25 candidate.
// Indexes every member segment of the registry's clustered actions.
class Standardizer {
 public:
  Standardizer(const ActionRegistry& registry, const Vectorizer& vectorizer, TextMode mode = TextMode::ascii,
               std::size_t recall_k = 20);

  Standardizer(const Standardizer&) = delete;
  Standardizer& operator=(const Standardizer&) = delete;

  const Bm25Index& index() const { return index_; }
  const PairFeaturizer& featurizer() const { return featurizer_; }
  const ActionRegistry& registry() const { return registry_; }
  std::size_t recall_k() const { return recall_k_; }

  void set_reranker(Reranker reranker) { reranker_ = reranker; }
  const Reranker& reranker() const { return reranker_; }

  // Empty recall yields UNK with confidence 0.
  SegmentLabel standardize_segment(std::string_view segment) const;

 private:
  const ActionRegistry& registry_;
  Bm25Index index_;
  PairFeaturizer featurizer_;
  std::vector<ActionId> doc_action_;
  Reranker reranker_;
  std::size_t recall_k_;
};

struct StandardizedCorpus {
  std::vector<StandardizedTurn> turns;
  // registry whose member lists and frequencies come from this corpus
  ActionRegistry table;
};

StandardizedCorpus standardize_corpus(const std::vector<Dialogue>& dialogues, const Standardizer& standardizer,
                                      const SegmenterOptions& segmenter = {});

void write_standardized(std::ostream& out, const std::vector<StandardizedTurn>& turns);
std::vector<StandardizedTurn> read_standardized(std::istream& in);
void save_standardized(const std::filesystem::path& path, const std::vector<StandardizedTurn>& turns);
std::vector<StandardizedTurn> load_standardized(const std::filesystem::path& path);

}  // namespace dta
