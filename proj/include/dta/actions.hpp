#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "dta/vectorizer.hpp"

namespace dta {

// Tag of a dialogue action: "A<k>" for clustered actions, "API:<name>" for
// back-end calls, plus the reserved PAD/UNK/BOS/EOS.
class ActionId {
 public:
  ActionId() = default;
  explicit ActionId(std::string tag) : tag_(std::move(tag)) {}

  static ActionId clustered(std::size_t k) { return ActionId("A" + std::to_string(k)); }
  static ActionId api(std::string_view name) { return ActionId("API:" + std::string(name)); }
  static ActionId pad() { return ActionId("PAD"); }
  static ActionId unk() { return ActionId("UNK"); }
  static ActionId bos() { return ActionId("BOS"); }
  static ActionId eos() { return ActionId("EOS"); }

  const std::string& tag() const { return tag_; }
  bool is_api() const { return tag_.rfind("API:", 0) == 0; }
  std::string api_name() const { return is_api() ? tag_.substr(4) : std::string(); }
  bool is_clustered() const;
  bool is_reserved() const { return tag_ == "PAD" || tag_ == "UNK" || tag_ == "BOS" || tag_ == "EOS"; }

  auto operator<=>(const ActionId&) const = default;

 private:
  std::string tag_;
};

struct KMeansOptions {
  int max_iterations = 100;
  double tolerance = 1e-6;  // max centroid movement
  int restarts = 1;         // best inertia kept
};

struct KMeansResult {
  std::vector<std::size_t> assignment;
  std::vector<Eigen::VectorXd> centroids;
  double inertia = 0.0;
  int iterations = 0;
  std::vector<double> inertia_history;  // after each assignment step
};

// k-means++ seeded Lloyd iterations on unit vectors with normalized-mean
// centroids. Ties go to the lowest cluster index.
KMeansResult kmeans(const std::vector<Eigen::VectorXd>& points, std::size_t k, std::uint64_t seed,
                    const KMeansOptions& options = {});
KMeansResult kmeans(const std::vector<SegmentVector>& vectors, std::size_t k, std::uint64_t seed,
                    const KMeansOptions& options = {});

// Fraction of items whose cluster majority label equals their own label.
double cluster_purity(const std::vector<std::size_t>& assignment, const std::vector<std::size_t>& labels);

struct SweepRow {
  std::size_t k = 0;
  double inertia = 0.0;
  std::optional<double> purity;
};

std::vector<SweepRow> sweep_k(const std::vector<SegmentVector>& vectors, const std::vector<std::size_t>& candidates,
                              const std::optional<std::vector<std::size_t>>& gold, std::uint64_t seed,
                              const KMeansOptions& options = {});

struct SegmentCount {
  std::string text;
  std::size_t frequency = 0;
};

// Unique texts with their occurrence counts, sorted by text.
std::vector<SegmentCount> count_segments(const std::vector<std::string>& occurrences);

// Action -> (segment, frequency) table with cluster centroids.
class ActionRegistry {
 public:
  struct Member {
    std::string text;
    std::size_t frequency = 0;
    bool operator==(const Member&) const = default;
  };
  struct Entry {
    ActionId id;
    std::vector<Member> members;
    std::optional<Eigen::VectorXd> centroid;
  };

  ActionRegistry() = default;

  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t cluster_count() const { return k_; }
  std::size_t size() const { return entries_.size(); }

  const Entry* find(const ActionId& id) const;
  bool contains(const ActionId& id) const { return find(id) != nullptr; }
  // Clustered action containing this exact segment text.
  std::optional<ActionId> action_of(const std::string& segment) const;

  std::vector<ActionId> api_actions() const;
  std::size_t total_frequency() const;

  void save(std::ostream& out) const;
  static ActionRegistry load(std::istream& in);
  void save(const std::filesystem::path& path) const;
  static ActionRegistry load(const std::filesystem::path& path);

  // Recomputes centroids from member texts.
  void compute_centroids(const Vectorizer& vectorizer);

  // Replaces every frequency with the count in `counts` (absent -> kept).
  void refresh_frequencies(const std::unordered_map<std::string, std::size_t>& counts);

  friend ActionRegistry build_registry(const std::vector<std::size_t>& assignment,
                                       const std::vector<SegmentCount>& segments,
                                       const std::vector<std::string>& api_names, std::size_t k,
                                       const std::vector<SegmentVector>* vectors);

 private:
  void reindex();
  void sort_members();

  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> by_tag_;
  std::unordered_map<std::string, std::size_t> by_segment_;
  std::size_t k_ = 0;
};

// Clusters become A0..A(k-1); API actions are appended with no members.
// When `vectors` is given (aligned with `segments`), centroids are the
// normalized member means.
ActionRegistry build_registry(const std::vector<std::size_t>& assignment, const std::vector<SegmentCount>& segments,
                              const std::vector<std::string>& api_names, std::size_t k,
                              const std::vector<SegmentVector>* vectors = nullptr);

}  // namespace dta
