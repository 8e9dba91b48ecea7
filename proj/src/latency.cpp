#include "dta/latency.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "dta/error.hpp"
#include "dta/metrics.hpp"

namespace dta {

BucketScheme parse_bucket_scheme(const std::string& name) {
  if (name == "width10") return BucketScheme::width10;
  if (name == "deciles") return BucketScheme::deciles;
  throw Error("unknown bucket scheme '" + name + "' (expected width10|deciles)");
}

namespace {

LatencyBucket summarize(std::size_t lo, std::size_t hi, std::vector<const LatencySample*> rows) {
  LatencyBucket b;
  b.lo = lo;
  b.hi = hi;
  b.count = rows.size();
  if (rows.empty()) return b;
  std::vector<double> ms;
  double steps = 0.0;
  for (const auto* r : rows) {
    ms.push_back(r->decode_ms);
    steps += static_cast<double>(r->steps);
  }
  std::sort(ms.begin(), ms.end());
  double sum = 0.0;
  for (double x : ms) sum += x;
  const std::size_t n = ms.size();
  b.mean = sum / static_cast<double>(n);
  b.median = n % 2 ? ms[n / 2] : (ms[n / 2 - 1] + ms[n / 2]) / 2.0;
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n)));
  b.p95 = ms[std::max<std::size_t>(rank, 1) - 1];
  b.mean_steps = steps / static_cast<double>(n);
  return b;
}

}  // namespace

std::vector<LatencyBucket> bucket_latency(const std::vector<LatencySample>& samples, BucketScheme scheme) {
  std::vector<LatencyBucket> out;
  if (samples.empty()) return out;
  if (scheme == BucketScheme::width10) {
    std::map<std::size_t, std::vector<const LatencySample*>> groups;
    for (const auto& s : samples) groups[s.length / 10].push_back(&s);
    for (auto& [k, rows] : groups) out.push_back(summarize(10 * k, 10 * k + 9, std::move(rows)));
    return out;
  }
  std::vector<std::size_t> lengths;
  for (const auto& s : samples) lengths.push_back(s.length);
  std::sort(lengths.begin(), lengths.end());
  // upper edges at the deciles; equal edges collapse into one bucket
  std::vector<std::size_t> edges;
  for (std::size_t d = 1; d <= 10; ++d) {
    const std::size_t idx = std::min(lengths.size() - 1, (d * lengths.size() + 9) / 10 - 1);
    if (edges.empty() || lengths[idx] > edges.back()) edges.push_back(lengths[idx]);
  }
  std::size_t lo = 0;
  for (std::size_t e : edges) {
    std::vector<const LatencySample*> rows;
    for (const auto& s : samples)
      if (s.length >= lo && s.length <= e) rows.push_back(&s);
    out.push_back(summarize(lo, e, std::move(rows)));
    lo = e + 1;
  }
  return out;
}

LatencyComparison compare_latency(const std::vector<LatencyBucket>& fast, const std::vector<LatencyBucket>& slow) {
  LatencyComparison out;
  for (const auto& f : fast) {
    for (const auto& s : slow) {
      if (s.lo != f.lo || s.hi != f.hi || f.count == 0 || s.count == 0) continue;
      out.rows.push_back({f.lo, f.hi, f.count, s.count, f.mean, s.mean, f.mean > 0 ? s.mean / f.mean : 0.0});
    }
  }
  if (out.rows.size() >= 2) {
    std::vector<double> order, ratio;
    for (const auto& r : out.rows) {
      order.push_back(static_cast<double>(r.lo));
      ratio.push_back(r.ratio);
    }
    out.spearman = spearman(ratio, order);
  }
  return out;
}

}  // namespace dta
