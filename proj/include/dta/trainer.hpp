#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "dta/seq2seq.hpp"

namespace dta {

struct EpochReport {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;             // mean per pair, as seen while training
  std::optional<double> clean_loss;    // mean per pair over the training set, no dropout
  std::optional<double> dev_loss;
  double seconds = 0.0;
};

struct TrainOptions {
  double learning_rate = 1e-4;
  std::size_t batch_size = 16;
  std::size_t epochs = 50;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 5.0;
  bool dropout = true;
  double sampling = 0.0;  // probability of feeding the model's own prediction
  std::uint64_t seed = 1;
  std::size_t sort_window = 256;  // examples sorted by length within windows
  bool keep_best = true;          // restore the parameters with the lowest dev loss
  bool clean_loss = false;        // also evaluate the training set without dropout
  std::optional<double> stop_below;  // stop once the clean (else train) loss is below
  std::function<void(const EpochReport&)> on_epoch;
};

struct TrainResult {
  std::vector<EpochReport> epochs;
  std::size_t best_epoch = 0;
  std::optional<double> best_dev_loss;
  std::size_t updates = 0;
};

// Mean per-pair loss without dropout.
template <typename T>
double evaluate_loss(const Seq2Seq<T>& model, const std::vector<Example>& data, std::size_t batch_size = 64);

// Deterministic batch order for one epoch.
std::vector<std::vector<std::size_t>> make_batches(const std::vector<Example>& data, std::size_t batch_size,
                                                   std::size_t sort_window, Rng& rng);

template <typename T>
TrainResult fit(Seq2Seq<T>& model, const std::vector<Example>& train, const std::vector<Example>& dev,
                const TrainOptions& options);

}  // namespace dta
