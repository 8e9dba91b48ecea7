#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "dta/actions.hpp"
#include "dta/bm25.hpp"
#include "dta/vectorizer.hpp"

namespace dta {

inline constexpr std::size_t kPairFeatureCount = 4;
using PairFeatures = std::array<double, kPairFeatureCount>;

// Features of a (query segment, indexed segment) pair:
// [cosine of embeddings, normalized BM25, token-set Jaccard, length ratio].
class PairFeaturizer {
 public:
  PairFeaturizer(const Vectorizer& vectorizer, const Bm25Index& index);

  PairFeatures features(std::string_view query, std::size_t doc) const;
  PairFeatures features(std::string_view query, const SegmentVector& query_vector, std::size_t doc) const;

  const Bm25Index& index() const { return index_; }
  const Vectorizer& vectorizer() const { return vectorizer_; }

 private:
  const Vectorizer& vectorizer_;
  const Bm25Index& index_;
  std::vector<SegmentVector> doc_vectors_;
};

// Logistic pair scorer: S(x, u) = sigmoid(w . f(x, u) + b).
struct Reranker {
  PairFeatures weights{};
  double bias = 0.0;

  double preactivation(const PairFeatures& f) const;
  double score(const PairFeatures& f) const;

  void save(std::ostream& out) const;
  static Reranker load(std::istream& in);
};

double sigmoid(double x);

struct PairSample {
  std::size_t query = 0;  // doc ids in the index
  std::size_t doc = 0;
  bool positive = false;
};

// Positives: every same-action member pair (capped at `max_positives` by
// seeded sampling). Negatives: `negative_ratio` x positives drawn without
// replacement from cross-action pairs.
std::vector<PairSample> build_pair_samples(const ActionRegistry& registry, const Bm25Index& index,
                                           std::uint64_t seed, std::size_t negative_ratio = 4,
                                           std::size_t max_positives = 20000);

struct RerankerTrainOptions {
  double l2 = 1e-3;
  int newton_iterations = 50;
  double holdout_fraction = 0.2;
  std::size_t negative_ratio = 4;
};

struct RerankerTrainResult {
  Reranker model;
  std::size_t positives = 0;
  std::size_t negatives = 0;
  std::size_t heldout = 0;
  double heldout_accuracy = 0.0;
};

// Fits by Newton iterations on the L2-regularized logistic loss.
Reranker fit_logistic(const std::vector<PairFeatures>& features, const std::vector<int>& labels, double l2,
                      int iterations);

RerankerTrainResult train_reranker(const ActionRegistry& registry, const PairFeaturizer& featurizer,
                                   std::uint64_t seed, const RerankerTrainOptions& options = {});

}  // namespace dta
