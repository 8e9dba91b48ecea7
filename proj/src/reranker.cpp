#include "dta/reranker.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>
#include <unordered_map>

#include "dta/error.hpp"
#include "dta/random.hpp"

namespace dta {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

PairFeaturizer::PairFeaturizer(const Vectorizer& vectorizer, const Bm25Index& index)
    : vectorizer_(vectorizer), index_(index) {
  doc_vectors_.reserve(index.size());
  for (std::size_t d = 0; d < index.size(); ++d) doc_vectors_.push_back(vectorizer.embed(index.document(d)));
}

PairFeatures PairFeaturizer::features(std::string_view query, std::size_t doc) const {
  return features(query, vectorizer_.embed(query), doc);
}

PairFeatures PairFeaturizer::features(std::string_view query, const SegmentVector& query_vector,
                                      std::size_t doc) const {
  const std::string& text = index_.document(doc);
  const auto q_terms = bm25_terms(query, index_.options().mode);
  const auto d_terms = bm25_terms(text, index_.options().mode);
  std::set<std::string> qs(q_terms.begin(), q_terms.end());
  std::set<std::string> ds(d_terms.begin(), d_terms.end());
  std::size_t common = 0;
  for (const auto& t : qs) common += ds.count(t);
  const std::size_t uni = qs.size() + ds.size() - common;
  const double jaccard = uni ? static_cast<double>(common) / static_cast<double>(uni) : 0.0;
  const double lq = static_cast<double>(q_terms.size());
  const double ld = static_cast<double>(d_terms.size());
  const double ratio = std::max(lq, ld) > 0.0 ? std::min(lq, ld) / std::max(lq, ld) : 0.0;
  return {cosine(query_vector, doc_vectors_[doc]), index_.normalized_score(query, doc), jaccard, ratio};
}

double Reranker::preactivation(const PairFeatures& f) const {
  double z = bias;
  for (std::size_t i = 0; i < kPairFeatureCount; ++i) z += weights[i] * f[i];
  return z;
}

double Reranker::score(const PairFeatures& f) const { return sigmoid(preactivation(f)); }

void Reranker::save(std::ostream& out) const {
  out.precision(17);
  out << "dta-reranker 1\n";
  for (double w : weights) out << w << ' ';
  out << bias << '\n';
}

Reranker Reranker::load(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "dta-reranker 1") throw ParseError(1, "not a dta-reranker v1 file");
  Reranker r;
  for (double& w : r.weights)
    if (!(in >> w)) throw ParseError(2, "missing weight");
  if (!(in >> r.bias)) throw ParseError(2, "missing bias");
  for (double w : r.weights)
    if (!std::isfinite(w)) throw ParseError(2, "non-finite weight");
  return r;
}

std::vector<PairSample> build_pair_samples(const ActionRegistry& registry, const Bm25Index& index,
                                           std::uint64_t seed, std::size_t negative_ratio,
                                           std::size_t max_positives) {
  std::unordered_map<std::string, std::size_t> doc_of;
  for (std::size_t d = 0; d < index.size(); ++d) doc_of.emplace(index.document(d), d);

  // doc ids grouped by clustered action
  std::vector<std::vector<std::size_t>> groups;
  std::vector<std::size_t> group_of(index.size(), static_cast<std::size_t>(-1));
  for (const auto& e : registry.entries()) {
    if (!e.id.is_clustered()) continue;
    std::vector<std::size_t> docs;
    for (const auto& m : e.members) {
      auto it = doc_of.find(m.text);
      if (it == doc_of.end()) throw Error("reranker: registry segment missing from index");
      docs.push_back(it->second);
      group_of[it->second] = groups.size();
    }
    groups.push_back(std::move(docs));
  }
  if (groups.size() < 2) throw Error("reranker: need at least two clustered actions");

  Rng rng(seed);
  std::vector<PairSample> positives;
  for (const auto& g : groups)
    for (std::size_t i = 0; i < g.size(); ++i)
      for (std::size_t j = i + 1; j < g.size(); ++j) positives.push_back({g[i], g[j], true});
  if (positives.empty()) throw Error("reranker: no positive pairs constructible");
  if (positives.size() > max_positives) {
    rng.shuffle(positives.begin(), positives.end());
    positives.resize(max_positives);
  }

  std::vector<std::size_t> members;
  for (const auto& g : groups) members.insert(members.end(), g.begin(), g.end());
  std::size_t same = 0;
  for (const auto& g : groups) same += g.size() * (g.size() - 1) / 2;
  const std::size_t all_pairs = members.size() * (members.size() - 1) / 2;
  const std::size_t cross = all_pairs - same;
  const std::size_t wanted = std::min(cross, negative_ratio * positives.size());

  std::vector<PairSample> negatives;
  if (wanted * 2 >= cross) {
    for (std::size_t i = 0; i < members.size(); ++i)
      for (std::size_t j = i + 1; j < members.size(); ++j)
        if (group_of[members[i]] != group_of[members[j]]) negatives.push_back({members[i], members[j], false});
    rng.shuffle(negatives.begin(), negatives.end());
    negatives.resize(wanted);
  } else {
    std::set<std::pair<std::size_t, std::size_t>> seen;
    while (negatives.size() < wanted) {
      std::size_t a = members[rng.below(members.size())];
      std::size_t b = members[rng.below(members.size())];
      if (group_of[a] == group_of[b]) continue;
      if (!seen.insert({std::min(a, b), std::max(a, b)}).second) continue;
      negatives.push_back({a, b, false});
    }
  }

  std::vector<PairSample> out = std::move(positives);
  out.insert(out.end(), negatives.begin(), negatives.end());
  return out;
}

Reranker fit_logistic(const std::vector<PairFeatures>& features, const std::vector<int>& labels, double l2,
                      int iterations) {
  constexpr int n = static_cast<int>(kPairFeatureCount) + 1;
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(n);
  for (int it = 0; it < iterations; ++it) {
    Eigen::VectorXd grad = l2 * theta;
    Eigen::MatrixXd hess = l2 * Eigen::MatrixXd::Identity(n, n);
    grad[n - 1] = 0.0;  // bias is not regularized
    hess(n - 1, n - 1) = 1e-9;
    for (std::size_t i = 0; i < features.size(); ++i) {
      Eigen::VectorXd x(n);
      for (int k = 0; k + 1 < n; ++k) x[k] = features[i][static_cast<std::size_t>(k)];
      x[n - 1] = 1.0;
      const double p = sigmoid(theta.dot(x));
      grad += (p - labels[i]) * x;
      hess += p * (1.0 - p) * x * x.transpose();
    }
    Eigen::VectorXd step = hess.ldlt().solve(grad);
    if (!step.allFinite()) break;
    theta -= step;
    if (step.norm() < 1e-10) break;
  }
  Reranker r;
  for (int k = 0; k + 1 < n; ++k) r.weights[static_cast<std::size_t>(k)] = theta[k];
  r.bias = theta[n - 1];
  return r;
}

RerankerTrainResult train_reranker(const ActionRegistry& registry, const PairFeaturizer& featurizer,
                                   std::uint64_t seed, const RerankerTrainOptions& options) {
  auto samples = build_pair_samples(registry, featurizer.index(), seed, options.negative_ratio);
  RerankerTrainResult result;
  for (const auto& s : samples) (s.positive ? result.positives : result.negatives) += 1;

  Rng rng(seed ^ 0x5DEECE66DULL);
  rng.shuffle(samples.begin(), samples.end());
  auto heldout = static_cast<std::size_t>(options.holdout_fraction * static_cast<double>(samples.size()));
  if (heldout >= samples.size()) heldout = 0;

  std::vector<PairFeatures> train_x;
  std::vector<int> train_y;
  std::vector<PairFeatures> test_x;
  std::vector<int> test_y;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    auto f = featurizer.features(featurizer.index().document(s.query), s.doc);
    if (i < heldout) {
      test_x.push_back(f);
      test_y.push_back(s.positive);
    } else {
      train_x.push_back(f);
      train_y.push_back(s.positive);
    }
  }
  result.model = fit_logistic(train_x, train_y, options.l2, options.newton_iterations);
  result.heldout = test_x.size();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test_x.size(); ++i) correct += (result.model.score(test_x[i]) >= 0.5) == (test_y[i] == 1);
  result.heldout_accuracy = test_x.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(test_x.size());
  return result;
}

}  // namespace dta
