#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dta/history.hpp"
#include "dta/random.hpp"
#include "dta/vocab.hpp"

namespace dta {

struct ModelConfig {
  int encoder_vocab = 0;
  int decoder_vocab = 0;
  int embedding_dim = 50;
  int hidden = 128;  // per encoder direction; the decoder uses 2 * hidden
  double dropout = 0.2;
  double init_range = 0.1;
  // Encoder ids whose embedding is shared with a decoder row (-1 = own row).
  // Empty means untied.
  std::vector<int> tied;

  int decoder_hidden() const { return 2 * hidden; }
  bool operator==(const ModelConfig&) const = default;
};

// Maps every encoder token that is also a decoder token (action tags) onto
// the decoder embedding.
std::vector<int> tie_map(const Vocab& encoder, const Vocab& decoder);

template <typename T>
struct Parameters {
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

  Mat enc_embed;                       // E x Ve
  Mat fwd_wx, fwd_wh, fwd_b;           // 4h x E, 4h x h, 4h x 1
  Mat bwd_wx, bwd_wh, bwd_b;
  Mat dec_embed;                       // E x Vd
  Mat dec_wx, dec_wh, dec_b;           // 4H x (E + H), 4H x H, 4H x 1
  Mat attn;                            // H x H
  Mat proj;                            // Vd x 2H

  template <typename F>
  void for_each(F&& f) {
    f("enc_embed", enc_embed);
    f("enc_fwd_wx", fwd_wx);
    f("enc_fwd_wh", fwd_wh);
    f("enc_fwd_b", fwd_b);
    f("enc_bwd_wx", bwd_wx);
    f("enc_bwd_wh", bwd_wh);
    f("enc_bwd_b", bwd_b);
    f("dec_embed", dec_embed);
    f("dec_wx", dec_wx);
    f("dec_wh", dec_wh);
    f("dec_b", dec_b);
    f("attn", attn);
    f("proj", proj);
  }
  template <typename F>
  void for_each(F&& f) const {
    const_cast<Parameters*>(this)->for_each([&](const char* name, Mat& m) { f(name, static_cast<const Mat&>(m)); });
  }

  void resize(const ModelConfig& config);
  void set_zero();
  std::size_t count() const;
  bool finite() const;
};

struct BatchLoss {
  double loss = 0.0;        // summed over pairs and steps
  std::size_t pairs = 0;
  std::size_t steps = 0;    // scored decoder steps
};

template <typename T>
class Seq2Seq {
 public:
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

  Seq2Seq() = default;
  Seq2Seq(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  Parameters<T>& params() { return params_; }
  const Parameters<T>& params() const { return params_; }

  // Sum of per-step cross-entropy over the batch. When `grad` is given it
  // receives (overwrites) the gradient of that sum. Dropout is applied only
  // when `dropout_rng` is given. With `sampling` > 0 the previous input is
  // the model's own argmax with that probability instead of the gold one.
  BatchLoss loss(std::span<const Example* const> batch, Parameters<T>* grad = nullptr, Rng* dropout_rng = nullptr,
                 double sampling = 0.0) const;

  // Teacher-forced distributions y_t (one column per step, EOS step last)
  // and attention weights, without dropout.
  struct Trace {
    std::vector<Vec> y;
    std::vector<Vec> attention;
    double loss = 0.0;
  };
  Trace trace(const Example& example) const;

  template <typename U>
  Seq2Seq<U> cast() const;

 private:
  template <typename U>
  friend class Seq2Seq;

  ModelConfig config_;
  Parameters<T> params_;
};

struct DecodeResult {
  std::vector<int> ids;  // EOS excluded
  std::size_t steps = 0; // decoder invocations, including the EOS step
};

// Greedy decoder over a frozen model. Embeddings are folded into the input
// projections once so a step costs only the recurrent products.
template <typename T>
class Generator {
 public:
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

  explicit Generator(const Seq2Seq<T>& model);

  DecodeResult decode(std::span<const int> source, std::size_t max_len,
                      std::vector<Vec>* distributions = nullptr) const;

  const Seq2Seq<T>& model() const { return model_; }

 private:
  const Seq2Seq<T>& model_;
  Mat fwd_table_, bwd_table_;  // 4h x Ve
  Mat dec_table_;              // 4H x Vd, embedding part of dec_wx plus bias
  Mat dec_ctx_;                // 4H x H, context part of dec_wx
};

inline constexpr std::size_t kMaxActions = 10;
inline constexpr std::size_t kMaxTokens = 60;

extern template struct Parameters<float>;
extern template struct Parameters<double>;
extern template class Seq2Seq<float>;
extern template class Seq2Seq<double>;
extern template class Generator<float>;
extern template class Generator<double>;

}  // namespace dta
