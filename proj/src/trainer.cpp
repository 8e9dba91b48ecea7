#include "dta/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include <spdlog/spdlog.h>

#include "dta/error.hpp"

namespace dta {

template <typename T>
double evaluate_loss(const Seq2Seq<T>& model, const std::vector<Example>& data, std::size_t batch_size) {
  if (data.empty()) return 0.0;
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return data[a].source.size() < data[b].source.size(); });
  double total = 0.0;
  std::vector<const Example*> batch;
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    batch.clear();
    for (std::size_t j = i; j < std::min(order.size(), i + batch_size); ++j) batch.push_back(&data[order[j]]);
    total += model.loss(batch).loss;
  }
  return total / static_cast<double>(data.size());
}

std::vector<std::vector<std::size_t>> make_batches(const std::vector<Example>& data, std::size_t batch_size,
                                                   std::size_t sort_window, Rng& rng) {
  if (batch_size == 0) throw Error("batch size must be positive");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order.begin(), order.end());
  const std::size_t window = std::max<std::size_t>(sort_window, 1);
  for (std::size_t i = 0; i < order.size(); i += window) {
    auto last = order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), i + window));
    std::stable_sort(order.begin() + static_cast<std::ptrdiff_t>(i), last,
                     [&](std::size_t a, std::size_t b) { return data[a].source.size() < data[b].source.size(); });
  }
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < order.size(); i += batch_size)
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), i + batch_size)));
  rng.shuffle(batches.begin(), batches.end());
  return batches;
}

template <typename T>
TrainResult fit(Seq2Seq<T>& model, const std::vector<Example>& train, const std::vector<Example>& dev,
                const TrainOptions& opt) {
  using Mat = typename Seq2Seq<T>::Mat;
  if (train.empty()) throw Error("fit: no training pairs");
  if (opt.learning_rate < 0) throw Error("fit: negative learning rate");

  Parameters<T> grad, m, v;
  m.resize(model.config());
  m.set_zero();
  v.resize(model.config());
  v.set_zero();
  Parameters<T> best = model.params();

  Rng order_rng(opt.seed);
  Rng dropout_rng(opt.seed ^ 0x5DEECE66Dull);
  TrainResult result;
  std::vector<const Example*> batch;
  double b1t = 1.0, b2t = 1.0;

  for (std::size_t epoch = 1; epoch <= opt.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    double epoch_loss = 0.0;
    for (const auto& ids : make_batches(train, opt.batch_size, opt.sort_window, order_rng)) {
      batch.clear();
      for (auto i : ids) batch.push_back(&train[i]);
      BatchLoss bl;
      try {
        bl = model.loss(batch, &grad, opt.dropout ? &dropout_rng : nullptr, opt.sampling);
      } catch (const Error& e) {
        throw Error("training diverged at epoch " + std::to_string(epoch) + ", update " +
                    std::to_string(result.updates + 1) + ": " + e.what());
      }
      epoch_loss += bl.loss;

      const T scale = T(1) / static_cast<T>(batch.size());
      double norm2 = 0.0;
      grad.for_each([&](const char*, Mat& g) {
        g *= scale;
        norm2 += static_cast<double>(g.squaredNorm());
      });
      if (!std::isfinite(norm2))
        throw Error("training diverged at epoch " + std::to_string(epoch) + ": non-finite gradient");
      const double norm = std::sqrt(norm2);
      if (opt.clip_norm > 0 && norm > opt.clip_norm) {
        const T c = static_cast<T>(opt.clip_norm / norm);
        grad.for_each([&](const char*, Mat& g) { g *= c; });
      }

      ++result.updates;
      b1t *= opt.beta1;
      b2t *= opt.beta2;
      const T lr = static_cast<T>(opt.learning_rate);
      const T c1 = static_cast<T>(1.0 / (1.0 - b1t)), c2 = static_cast<T>(1.0 / (1.0 - b2t));
      const T beta1 = static_cast<T>(opt.beta1), beta2 = static_cast<T>(opt.beta2), eps = static_cast<T>(opt.epsilon);
      std::vector<Mat*> gs, ms, vs;
      grad.for_each([&](const char*, Mat& x) { gs.push_back(&x); });
      m.for_each([&](const char*, Mat& x) { ms.push_back(&x); });
      v.for_each([&](const char*, Mat& x) { vs.push_back(&x); });
      std::size_t k = 0;
      model.params().for_each([&](const char*, Mat& w) {
        auto g = gs[k]->array();
        auto& mk = *ms[k];
        auto& vk = *vs[k];
        mk.array() = beta1 * mk.array() + (T(1) - beta1) * g;
        vk.array() = beta2 * vk.array() + (T(1) - beta2) * g.square();
        w.array() -= lr * (mk.array() * c1) / ((vk.array() * c2).sqrt() + eps);
        ++k;
      });
    }

    EpochReport report;
    report.epoch = epoch;
    report.train_loss = epoch_loss / static_cast<double>(train.size());
    if (opt.clean_loss) report.clean_loss = evaluate_loss(model, train);
    if (!dev.empty()) {
      report.dev_loss = evaluate_loss(model, dev);
      if (!result.best_dev_loss || *report.dev_loss < *result.best_dev_loss) {
        result.best_dev_loss = report.dev_loss;
        result.best_epoch = epoch;
        if (opt.keep_best) best = model.params();
      }
    } else {
      result.best_epoch = epoch;
    }
    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    spdlog::debug("epoch {} train {:.4f} dev {} ({:.1f}s)", epoch, report.train_loss,
                  report.dev_loss ? std::to_string(*report.dev_loss) : "-", report.seconds);
    result.epochs.push_back(report);
    if (opt.on_epoch) opt.on_epoch(report);
    if (opt.stop_below && (report.clean_loss ? *report.clean_loss : report.train_loss) < *opt.stop_below) break;
  }
  if (opt.keep_best && !dev.empty() && result.best_epoch != result.epochs.size()) model.params() = best;
  return result;
}

template double evaluate_loss(const Seq2Seq<float>&, const std::vector<Example>&, std::size_t);
template double evaluate_loss(const Seq2Seq<double>&, const std::vector<Example>&, std::size_t);
template TrainResult fit(Seq2Seq<float>&, const std::vector<Example>&, const std::vector<Example>&, const TrainOptions&);
template TrainResult fit(Seq2Seq<double>&, const std::vector<Example>&, const std::vector<Example>&, const TrainOptions&);

}  // namespace dta
