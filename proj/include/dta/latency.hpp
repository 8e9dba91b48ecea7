#pragma once

#include <optional>
#include <string>
#include <vector>

namespace dta {

struct LatencySample {
  std::size_t length = 0;  // verbal length of the produced reply, in tokens
  double decode_ms = 0.0;
  double compose_ms = 0.0;
  std::size_t steps = 0;   // decoder invocations
};

enum class BucketScheme { width10, deciles };

BucketScheme parse_bucket_scheme(const std::string& name);

struct LatencyBucket {
  std::size_t lo = 0, hi = 0;  // inclusive length range
  std::size_t count = 0;
  double mean = 0.0, median = 0.0, p95 = 0.0;  // decode milliseconds
  double mean_steps = 0.0;
};

// Width-10 buckets [10k, 10k + 9] (empty ones omitted), or ten buckets at
// the deciles of the observed lengths. p95 uses the nearest-rank rule.
std::vector<LatencyBucket> bucket_latency(const std::vector<LatencySample>& samples,
                                          BucketScheme scheme = BucketScheme::width10);

struct LatencyComparisonRow {
  std::size_t lo = 0, hi = 0;
  std::size_t fast_count = 0, slow_count = 0;
  double fast_mean = 0.0, slow_mean = 0.0;
  double ratio = 0.0;  // slow_mean / fast_mean
};

struct LatencyComparison {
  std::vector<LatencyComparisonRow> rows;  // buckets both models populated
  std::optional<double> spearman;          // ratio vs bucket order, when >= 2 rows
};

// Pairs up buckets with the same range.
LatencyComparison compare_latency(const std::vector<LatencyBucket>& fast, const std::vector<LatencyBucket>& slow);

}  // namespace dta
