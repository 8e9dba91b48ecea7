#include "dta/actions.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "dta/error.hpp"
#include "dta/random.hpp"
#include "dta/text.hpp"

namespace dta {

bool ActionId::is_clustered() const {
  if (tag_.size() < 2 || tag_[0] != 'A') return false;
  return std::all_of(tag_.begin() + 1, tag_.end(), [](char c) { return c >= '0' && c <= '9'; });
}

namespace {

Eigen::VectorXd normalized_or_zero(const Eigen::VectorXd& v) {
  const double n = v.norm();
  return n > 0.0 ? Eigen::VectorXd(v / n) : Eigen::VectorXd::Zero(v.size());
}

std::vector<Eigen::VectorXd> plus_plus_init(const std::vector<Eigen::VectorXd>& points, std::size_t k, Rng& rng) {
  std::vector<Eigen::VectorXd> centroids;
  centroids.push_back(points[rng.below(points.size())]);
  std::vector<double> dist(points.size(), std::numeric_limits<double>::infinity());
  while (centroids.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      dist[i] = std::min(dist[i], (points[i] - centroids.back()).squaredNorm());
      total += dist[i];
    }
    std::size_t chosen = 0;
    if (total <= 0.0) {
      chosen = rng.below(points.size());
    } else {
      double r = rng.uniform() * total;
      chosen = points.size() - 1;
      for (std::size_t i = 0; i < points.size(); ++i) {
        r -= dist[i];
        if (r < 0.0) {
          chosen = i;
          break;
        }
      }
    }
    centroids.push_back(points[chosen]);
  }
  return centroids;
}

double assign(const std::vector<Eigen::VectorXd>& points, const std::vector<Eigen::VectorXd>& centroids,
              std::vector<std::size_t>& assignment, std::vector<double>& distance) {
  double inertia = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.size(); ++c) {
      double d = (points[i] - centroids[c]).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    assignment[i] = best;
    distance[i] = best_d;
    inertia += best_d;
  }
  return inertia;
}

// Moves the point farthest from its centroid into each empty cluster.
bool reseed_empty(const std::vector<Eigen::VectorXd>& points, std::vector<Eigen::VectorXd>& centroids,
                  std::vector<std::size_t>& assignment, std::vector<double>& distance) {
  bool changed = false;
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    std::vector<std::size_t> sizes(centroids.size(), 0);
    for (auto a : assignment) ++sizes[a];
    if (sizes[c] > 0) continue;
    std::size_t far = points.size();
    double far_d = -1.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (sizes[assignment[i]] > 1 && distance[i] > far_d) {
        far_d = distance[i];
        far = i;
      }
    }
    if (far == points.size()) continue;
    assignment[far] = c;
    distance[far] = 0.0;
    centroids[c] = points[far];
    changed = true;
  }
  return changed;
}

std::vector<Eigen::VectorXd> update_centroids(const std::vector<Eigen::VectorXd>& points,
                                              const std::vector<std::size_t>& assignment,
                                              const std::vector<Eigen::VectorXd>& previous) {
  std::vector<Eigen::VectorXd> sums(previous.size(), Eigen::VectorXd::Zero(points.front().size()));
  std::vector<std::size_t> counts(previous.size(), 0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    sums[assignment[i]] += points[i];
    ++counts[assignment[i]];
  }
  std::vector<Eigen::VectorXd> out(previous.size());
  for (std::size_t c = 0; c < previous.size(); ++c)
    out[c] = counts[c] ? normalized_or_zero(sums[c]) : previous[c];
  return out;
}

KMeansResult kmeans_once(const std::vector<Eigen::VectorXd>& points, std::size_t k, Rng& rng,
                         const KMeansOptions& options) {
  KMeansResult result;
  result.centroids = plus_plus_init(points, k, rng);
  result.assignment.assign(points.size(), 0);
  std::vector<double> distance(points.size(), 0.0);
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    result.inertia = assign(points, result.centroids, result.assignment, distance);
    if (reseed_empty(points, result.centroids, result.assignment, distance)) {
      result.inertia = 0.0;
      for (double d : distance) result.inertia += d;
    }
    result.inertia_history.push_back(result.inertia);
    result.iterations = iter + 1;
    auto next = update_centroids(points, result.assignment, result.centroids);
    double movement = 0.0;
    for (std::size_t c = 0; c < k; ++c) movement = std::max(movement, (next[c] - result.centroids[c]).norm());
    result.centroids = std::move(next);
    if (movement < options.tolerance) break;
  }
  result.inertia = assign(points, result.centroids, result.assignment, distance);
  if (reseed_empty(points, result.centroids, result.assignment, distance)) {
    result.centroids = update_centroids(points, result.assignment, result.centroids);
    result.inertia = assign(points, result.centroids, result.assignment, distance);
  }
  return result;
}

}  // namespace

KMeansResult kmeans(const std::vector<Eigen::VectorXd>& points, std::size_t k, std::uint64_t seed,
                    const KMeansOptions& options) {
  if (k < 1 || k > points.size())
    throw Error("kmeans: K=" + std::to_string(k) + " out of range [1, " + std::to_string(points.size()) + "]");
  for (const auto& p : points)
    if (p.size() != points.front().size()) throw Error("kmeans: inconsistent dimensions");
  Rng rng(seed);
  KMeansResult best;
  for (int r = 0; r < std::max(1, options.restarts); ++r) {
    KMeansResult run = kmeans_once(points, k, rng, options);
    if (r == 0 || run.inertia < best.inertia) best = std::move(run);
  }
  return best;
}

KMeansResult kmeans(const std::vector<SegmentVector>& vectors, std::size_t k, std::uint64_t seed,
                    const KMeansOptions& options) {
  std::vector<Eigen::VectorXd> points;
  points.reserve(vectors.size());
  for (const auto& v : vectors) points.push_back(v.values);
  return kmeans(points, k, seed, options);
}

double cluster_purity(const std::vector<std::size_t>& assignment, const std::vector<std::size_t>& labels) {
  if (assignment.size() != labels.size()) throw Error("purity: assignment/label size mismatch");
  if (assignment.empty()) return 0.0;
  std::map<std::size_t, std::map<std::size_t, std::size_t>> table;
  for (std::size_t i = 0; i < assignment.size(); ++i) ++table[assignment[i]][labels[i]];
  std::size_t majority = 0;
  for (const auto& [cluster, counts] : table) {
    std::size_t best = 0;
    for (const auto& [label, count] : counts) best = std::max(best, count);
    majority += best;
  }
  return static_cast<double>(majority) / static_cast<double>(assignment.size());
}

std::vector<SweepRow> sweep_k(const std::vector<SegmentVector>& vectors, const std::vector<std::size_t>& candidates,
                              const std::optional<std::vector<std::size_t>>& gold, std::uint64_t seed,
                              const KMeansOptions& options) {
  std::vector<SweepRow> rows;
  for (std::size_t k : candidates) {
    auto result = kmeans(vectors, k, seed, options);
    SweepRow row{k, result.inertia, std::nullopt};
    if (gold) row.purity = cluster_purity(result.assignment, *gold);
    rows.push_back(row);
  }
  return rows;
}

std::vector<SegmentCount> count_segments(const std::vector<std::string>& occurrences) {
  std::map<std::string, std::size_t> counts;
  for (const auto& s : occurrences) ++counts[s];
  std::vector<SegmentCount> out;
  out.reserve(counts.size());
  for (auto& [text, n] : counts) out.push_back({text, n});
  return out;
}

const ActionRegistry::Entry* ActionRegistry::find(const ActionId& id) const {
  auto it = by_tag_.find(id.tag());
  return it == by_tag_.end() ? nullptr : &entries_[it->second];
}

std::optional<ActionId> ActionRegistry::action_of(const std::string& segment) const {
  auto it = by_segment_.find(segment);
  if (it == by_segment_.end()) return std::nullopt;
  return entries_[it->second].id;
}

std::vector<ActionId> ActionRegistry::api_actions() const {
  std::vector<ActionId> out;
  for (const auto& e : entries_)
    if (e.id.is_api()) out.push_back(e.id);
  return out;
}

std::size_t ActionRegistry::total_frequency() const {
  std::size_t total = 0;
  for (const auto& e : entries_)
    for (const auto& m : e.members) total += m.frequency;
  return total;
}

void ActionRegistry::reindex() {
  by_tag_.clear();
  by_segment_.clear();
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (!by_tag_.emplace(entries_[i].id.tag(), i).second) throw Error("duplicate action tag " + entries_[i].id.tag());
    for (const auto& m : entries_[i].members) by_segment_.emplace(m.text, i);
  }
}

void ActionRegistry::sort_members() {
  for (auto& e : entries_) {
    std::sort(e.members.begin(), e.members.end(), [](const Member& a, const Member& b) {
      return a.frequency != b.frequency ? a.frequency > b.frequency : a.text < b.text;
    });
  }
}

void ActionRegistry::compute_centroids(const Vectorizer& vectorizer) {
  for (auto& e : entries_) {
    if (!e.id.is_clustered() || e.members.empty()) continue;
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(vectorizer.options().dim));
    for (const auto& m : e.members) sum += vectorizer.embed(m.text).values;
    e.centroid = normalized_or_zero(sum);
  }
}

void ActionRegistry::refresh_frequencies(const std::unordered_map<std::string, std::size_t>& counts) {
  for (auto& e : entries_) {
    for (auto& m : e.members) {
      if (auto it = counts.find(m.text); it != counts.end() && it->second > 0) m.frequency = it->second;
    }
  }
  sort_members();
}

ActionRegistry build_registry(const std::vector<std::size_t>& assignment, const std::vector<SegmentCount>& segments,
                              const std::vector<std::string>& api_names, std::size_t k,
                              const std::vector<SegmentVector>* vectors) {
  if (assignment.size() != segments.size()) throw Error("build_registry: assignment does not cover all segments");
  if (vectors && vectors->size() != segments.size()) throw Error("build_registry: vectors not aligned with segments");
  ActionRegistry reg;
  reg.k_ = k;
  reg.entries_.resize(k);
  std::vector<Eigen::VectorXd> sums;
  for (std::size_t c = 0; c < k; ++c) reg.entries_[c].id = ActionId::clustered(c);
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (assignment[i] >= k) throw Error("build_registry: cluster index out of range");
    if (segments[i].frequency == 0) throw Error("build_registry: zero frequency for '" + segments[i].text + "'");
    reg.entries_[assignment[i]].members.push_back({segments[i].text, segments[i].frequency});
    if (vectors) {
      if (sums.empty()) sums.assign(k, Eigen::VectorXd::Zero((*vectors)[i].dim()));
      sums[assignment[i]] += (*vectors)[i].values;
    }
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (reg.entries_[c].members.empty()) throw Error("build_registry: cluster " + std::to_string(c) + " is empty");
    if (vectors) reg.entries_[c].centroid = normalized_or_zero(sums[c]);
  }
  for (const auto& name : api_names) reg.entries_.push_back({ActionId::api(name), {}, std::nullopt});
  reg.sort_members();
  reg.reindex();
  return reg;
}

void ActionRegistry::save(std::ostream& out) const {
  out << "#dta-registry 1\tK=" << k_ << '\n';
  for (const auto& e : entries_) {
    if (e.members.empty()) {
      out << e.id.tag() << "\t\t0\n";
      continue;
    }
    for (const auto& m : e.members) {
      if (m.text.find_first_of("\t\n") != std::string::npos) throw Error("segment contains a tab or newline");
      out << e.id.tag() << '\t' << m.text << '\t' << m.frequency << '\n';
    }
  }
}

ActionRegistry ActionRegistry::load(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("#dta-registry 1\tK=", 0) != 0)
    throw ParseError(1, "not a dta-registry v1 file");
  ActionRegistry reg;
  try {
    reg.k_ = std::stoul(line.substr(line.find("K=") + 2));
  } catch (const std::exception&) {
    throw ParseError(1, "bad K in header");
  }
  std::size_t number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    auto t1 = line.find('\t');
    auto t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) throw ParseError(number, "expected tag<TAB>segment<TAB>frequency");
    ActionId id(line.substr(0, t1));
    std::string text = line.substr(t1 + 1, t2 - t1 - 1);
    std::size_t freq = 0;
    try {
      freq = std::stoul(line.substr(t2 + 1));
    } catch (const std::exception&) {
      throw ParseError(number, "bad frequency");
    }
    if (!id.is_api() && !id.is_clustered()) throw ParseError(number, "bad action tag '" + id.tag() + "'");
    if (reg.entries_.empty() || reg.entries_.back().id != id) {
      for (const auto& e : reg.entries_)
        if (e.id == id) throw ParseError(number, "action " + id.tag() + " is not contiguous");
      reg.entries_.push_back({id, {}, std::nullopt});
    }
    if (!text.empty()) {
      if (freq == 0) throw ParseError(number, "member with zero frequency");
      reg.entries_.back().members.push_back({text, freq});
    }
  }
  std::size_t clustered = 0;
  for (const auto& e : reg.entries_) {
    if (e.id.is_clustered()) {
      ++clustered;
      if (e.members.empty()) throw Error("registry: clustered action " + e.id.tag() + " has no members");
    }
  }
  if (clustered != reg.k_) throw Error("registry: header K does not match clustered actions");
  reg.sort_members();
  reg.reindex();
  return reg;
}

void ActionRegistry::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  save(out);
}

ActionRegistry ActionRegistry::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return load(in);
}

}  // namespace dta
