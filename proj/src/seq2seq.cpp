#include "dta/seq2seq.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dta/error.hpp"

namespace dta {

std::vector<int> tie_map(const Vocab& encoder, const Vocab& decoder) {
  std::vector<int> map(static_cast<std::size_t>(encoder.size()), -1);
  for (int id = Vocab::kReserved; id < encoder.size(); ++id) {
    const auto& tok = encoder.token(id);
    if (decoder.contains(tok)) map[static_cast<std::size_t>(id)] = decoder.id(tok);
  }
  return map;
}

template <typename T>
void Parameters<T>::resize(const ModelConfig& c) {
  const int E = c.embedding_dim, h = c.hidden, H = c.decoder_hidden();
  enc_embed.resize(E, c.encoder_vocab);
  for (Mat* m : {&fwd_wx, &bwd_wx}) m->resize(4 * h, E);
  for (Mat* m : {&fwd_wh, &bwd_wh}) m->resize(4 * h, h);
  for (Mat* m : {&fwd_b, &bwd_b}) m->resize(4 * h, 1);
  dec_embed.resize(E, c.decoder_vocab);
  dec_wx.resize(4 * H, E + H);
  dec_wh.resize(4 * H, H);
  dec_b.resize(4 * H, 1);
  attn.resize(H, H);
  proj.resize(c.decoder_vocab, 2 * H);
}

template <typename T>
void Parameters<T>::set_zero() {
  for_each([](const char*, Mat& m) { m.setZero(); });
}

template <typename T>
std::size_t Parameters<T>::count() const {
  std::size_t n = 0;
  for_each([&](const char*, const Mat& m) { n += static_cast<std::size_t>(m.size()); });
  return n;
}

template <typename T>
bool Parameters<T>::finite() const {
  bool ok = true;
  for_each([&](const char*, const Mat& m) { ok = ok && m.allFinite(); });
  return ok;
}

namespace {

template <typename T>
using MatT = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using VecT = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <typename T>
using RowMask = Eigen::Array<T, 1, Eigen::Dynamic>;

// z holds the stacked pre-activations [i; f; g; o].
template <typename Block>
void activate(Block&& z, int n) {
  using T = typename std::decay_t<Block>::Scalar;
  auto sig = [](auto x) { return (T(1) + (-x).exp()).inverse(); };
  z.topRows(2 * n) = sig(z.topRows(2 * n).array()).matrix();
  z.middleRows(2 * n, n) = z.middleRows(2 * n, n).array().tanh().matrix();
  z.bottomRows(n) = sig(z.bottomRows(n).array()).matrix();
}

// Backward through one LSTM cell (optionally masked: state held where the
// mask is 0). On entry dh/dc hold the gradient w.r.t. the new state; on exit
// dc is the full gradient w.r.t. c_prev and dh the part of the h_prev
// gradient that bypasses the cell (the caller adds wh^T dz).
template <typename T, typename G, typename C, typename TC>
void cell_backward(int n, const G& gates, const C& c_prev, const TC& tc, const RowMask<T>* mask, MatT<T>& dh,
                   MatT<T>& dc, MatT<T>& dz) {
  using Arr = Eigen::Array<T, Eigen::Dynamic, Eigen::Dynamic>;
  Arr dhc, dcc;
  if (mask) {
    dhc = dh.array().rowwise() * (*mask);
    dcc = dc.array().rowwise() * (*mask);
    const RowMask<T> keep = T(1) - *mask;
    dh = (dh.array().rowwise() * keep).matrix();
    dc = (dc.array().rowwise() * keep).matrix();
  } else {
    dhc = dh.array();
    dcc = dc.array();
    dh.setZero(dh.rows(), dh.cols());
    dc.setZero(dc.rows(), dc.cols());
  }
  const auto i = gates.topRows(n).array();
  const auto f = gates.middleRows(n, n).array();
  const auto g = gates.middleRows(2 * n, n).array();
  const auto o = gates.bottomRows(n).array();
  const auto t = tc.array();
  dcc += dhc * o * (T(1) - t.square());
  dz.resize(4 * n, dh.cols());
  dz.topRows(n) = (dcc * g * i * (T(1) - i)).matrix();
  dz.middleRows(n, n) = (dcc * c_prev.array() * f * (T(1) - f)).matrix();
  dz.middleRows(2 * n, n) = (dcc * i * (T(1) - g.square())).matrix();
  dz.bottomRows(n) = (dhc * t * o * (T(1) - o)).matrix();
  dc += (dcc * f).matrix();
}

template <typename T>
struct DirectionTrace {
  MatT<T> gates, c_prev, h_prev, tc, h;  // column t * B + b
  MatT<T> h_last, c_last;
};

template <typename T>
void run_direction(const MatT<T>& wx, const MatT<T>& wh, const MatT<T>& b, const MatT<T>& X, const RowMask<T>& mask,
                   int steps, int B, bool forward, DirectionTrace<T>& tr) {
  const int n = static_cast<int>(wh.cols());
  const int cols = steps * B;
  MatT<T> Z = wx * X;
  Z.colwise() += b.col(0);
  tr.gates.resize(4 * n, cols);
  tr.c_prev.resize(n, cols);
  tr.h_prev.resize(n, cols);
  tr.tc.resize(n, cols);
  tr.h.resize(n, cols);
  MatT<T> h = MatT<T>::Zero(n, B), c = MatT<T>::Zero(n, B);
  for (int s = 0; s < steps; ++s) {
    const int t = forward ? s : steps - 1 - s;
    auto G = tr.gates.middleCols(t * B, B);
    G.noalias() = Z.middleCols(t * B, B);
    G.noalias() += wh * h;
    activate(G, n);
    tr.c_prev.middleCols(t * B, B) = c;
    tr.h_prev.middleCols(t * B, B) = h;
    const auto m = mask.segment(t * B, B);
    const MatT<T> c_new = (G.middleRows(n, n).array() * c.array() + G.topRows(n).array() * G.middleRows(2 * n, n).array()).matrix();
    auto tc = tr.tc.middleCols(t * B, B);
    tc = c_new.array().tanh().matrix();
    const MatT<T> h_new = (G.bottomRows(n).array() * tc.array()).matrix();
    h = (h_new.array().rowwise() * m + h.array().rowwise() * (T(1) - m)).matrix();
    c = (c_new.array().rowwise() * m + c.array().rowwise() * (T(1) - m)).matrix();
    tr.h.middleCols(t * B, B) = h;
  }
  tr.h_last = h;
  tr.c_last = c;
}

template <typename T>
void backprop_direction(const MatT<T>& wx, const MatT<T>& wh, const MatT<T>& X, const RowMask<T>& mask, int steps,
                        int B, bool forward, const DirectionTrace<T>& tr, const MatT<T>& dH, MatT<T> dh, MatT<T> dc,
                        MatT<T>& gwx, MatT<T>& gwh, MatT<T>& gb, MatT<T>& dX) {
  const int n = static_cast<int>(wh.cols());
  MatT<T> dZ(4 * n, steps * B), dz;
  for (int s = steps - 1; s >= 0; --s) {
    const int t = forward ? s : steps - 1 - s;
    dh += dH.middleCols(t * B, B);
    const RowMask<T> m = mask.segment(t * B, B);
    cell_backward<T>(n, tr.gates.middleCols(t * B, B), tr.c_prev.middleCols(t * B, B), tr.tc.middleCols(t * B, B),
                     &m, dh, dc, dz);
    dh.noalias() += wh.transpose() * dz;
    dZ.middleCols(t * B, B) = dz;
  }
  gwx.noalias() += dZ * X.transpose();
  gwh.noalias() += dZ * tr.h_prev.transpose();
  gb += dZ.rowwise().sum();
  dX.noalias() += wx.transpose() * dZ;
}

template <typename T>
void fill_dropout(MatT<T>& mask, Eigen::Index rows, Eigen::Index cols, double rate, Rng* rng) {
  mask.resize(rows, cols);
  if (!rng || rate <= 0.0) {
    mask.setOnes();
    return;
  }
  const T keep = static_cast<T>(1.0 / (1.0 - rate));
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) mask(i, j) = rng->chance(rate) ? T(0) : keep;
}

// Column-wise softmax in place; log_norm receives log-sum-exp per column.
template <typename T, typename Block>
void softmax_columns(Block&& y, VecT<T>& log_norm) {
  log_norm.resize(y.cols());
  for (Eigen::Index j = 0; j < y.cols(); ++j) {
    auto col = y.col(j);
    const T mx = col.maxCoeff();
    col.array() = (col.array() - mx).exp();
    const T sum = col.sum();
    col /= sum;
    log_norm(j) = mx + std::log(sum);
  }
}

template <typename T>
int argmax(const VecT<T>& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v(i) > v(best)) best = i;
  return static_cast<int>(best);
}

}  // namespace

template <typename T>
Seq2Seq<T>::Seq2Seq(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  if (config.encoder_vocab <= Vocab::kReserved || config.decoder_vocab <= Vocab::kReserved)
    throw Error("model: vocabularies must extend the reserved tokens");
  if (config.embedding_dim < 1 || config.hidden < 1) throw Error("model: dimensions must be positive");
  if (config.dropout < 0.0 || config.dropout >= 1.0) throw Error("model: dropout must be in [0, 1)");
  if (!config.tied.empty()) {
    if (config.tied.size() != static_cast<std::size_t>(config.encoder_vocab))
      throw Error("model: tie map does not match the encoder vocabulary");
    for (int d : config.tied)
      if (d >= config.decoder_vocab) throw Error("model: tie map points outside the decoder vocabulary");
  }
  params_.resize(config);
  Rng rng(seed);
  const double r = config.init_range;
  params_.for_each([&](const char*, Mat& m) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = static_cast<T>((2.0 * rng.uniform() - 1.0) * r);
  });
  const int h = config.hidden, H = config.decoder_hidden();
  params_.fwd_b.middleRows(h, h).setOnes();
  params_.bwd_b.middleRows(h, h).setOnes();
  params_.dec_b.middleRows(H, H).setOnes();
}

template <typename T>
BatchLoss Seq2Seq<T>::loss(std::span<const Example* const> batch, Parameters<T>* grad, Rng* dropout_rng,
                           double sampling) const {
  const auto& P = params_;
  const int B = static_cast<int>(batch.size());
  const int E = config_.embedding_dim, h = config_.hidden, H = config_.decoder_hidden();
  const int Vd = config_.decoder_vocab;
  BatchLoss result;
  result.pairs = batch.size();
  if (B == 0) {
    if (grad) {
      grad->resize(config_);
      grad->set_zero();
    }
    return result;
  }

  int Ts = 0, L = 0;
  for (const Example* ex : batch) {
    if (ex->source.empty()) throw Error("model: empty source sequence");
    Ts = std::max(Ts, static_cast<int>(ex->source.size()));
    L = std::max(L, static_cast<int>(ex->target.size()) + 1);
  }
  auto source_id = [&](int t, int b) {
    const auto& s = batch[static_cast<std::size_t>(b)]->source;
    return t < static_cast<int>(s.size()) ? s[static_cast<std::size_t>(t)] : Vocab::kPad;
  };
  auto length = [&](int b) { return static_cast<int>(batch[static_cast<std::size_t>(b)]->source.size()); };
  auto target_len = [&](int b) { return static_cast<int>(batch[static_cast<std::size_t>(b)]->target.size()); };
  auto gold = [&](int t, int b) {
    const auto& y = batch[static_cast<std::size_t>(b)]->target;
    return t < static_cast<int>(y.size()) ? y[static_cast<std::size_t>(t)] : Vocab::kEos;
  };
  const auto& tied = config_.tied;
  auto enc_col = [&](int id) -> const T* {
    if (id < 0 || id >= config_.encoder_vocab) throw Error("model: encoder id out of range");
    if (!tied.empty() && tied[static_cast<std::size_t>(id)] >= 0) return P.dec_embed.col(tied[static_cast<std::size_t>(id)]).data();
    return P.enc_embed.col(id).data();
  };

  // ---- encoder
  const double rate = config_.dropout;
  Mat enc_drop, dec_drop, out_drop;
  fill_dropout(enc_drop, E, static_cast<Eigen::Index>(Ts) * B, rate, dropout_rng);
  Mat X(E, Ts * B);
  RowMask<T> mask(Ts * B);
  for (int t = 0; t < Ts; ++t)
    for (int b = 0; b < B; ++b) {
      const int c = t * B + b;
      X.col(c) = Eigen::Map<const Vec>(enc_col(source_id(t, b)), E);
      mask(c) = t < length(b) ? T(1) : T(0);
    }
  X.array() *= enc_drop.array();

  DirectionTrace<T> fwd, bwd;
  run_direction<T>(P.fwd_wx, P.fwd_wh, P.fwd_b, X, mask, Ts, B, true, fwd);
  run_direction<T>(P.bwd_wx, P.bwd_wh, P.bwd_b, X, mask, Ts, B, false, bwd);

  std::vector<Mat> Hb(static_cast<std::size_t>(B));
  for (int b = 0; b < B; ++b) {
    Mat& m = Hb[static_cast<std::size_t>(b)];
    m.resize(H, length(b));
    for (int t = 0; t < length(b); ++t) {
      m.col(t).head(h) = fwd.h.col(t * B + b);
      m.col(t).tail(h) = bwd.h.col(t * B + b);
    }
  }

  // ---- decoder
  const int LB = L * B;
  fill_dropout(dec_drop, E, LB, rate, dropout_rng);
  fill_dropout(out_drop, 2 * H, LB, rate, dropout_rng);
  Mat Xd(E + H, LB), Gd(4 * H, LB), Cprev(H, LB), Sprev(H, LB), TCd(H, LB), S(H, LB), Q(H, LB), O(2 * H, LB),
      Y(Vd, LB);
  std::vector<int> prev(static_cast<std::size_t>(LB));
  std::vector<Vec> attn(static_cast<std::size_t>(LB));
  Mat s(H, B), cell(H, B), ctx = Mat::Zero(H, B);
  s.topRows(h) = fwd.h_last;
  s.bottomRows(h) = bwd.h_last;
  cell.topRows(h) = fwd.c_last;
  cell.bottomRows(h) = bwd.c_last;
  Vec log_norm;

  for (int t = 0; t < L; ++t) {
    const int c0 = t * B;
    for (int b = 0; b < B; ++b) {
      int in = Vocab::kBos;
      if (t > 0) {
        in = gold(t - 1, b);
        if (sampling > 0.0 && dropout_rng && dropout_rng->chance(sampling)) in = argmax<T>(Y.col(c0 - B + b));
      }
      prev[static_cast<std::size_t>(c0 + b)] = in;
      Xd.col(c0 + b).head(E) = P.dec_embed.col(in).cwiseProduct(dec_drop.col(c0 + b));
    }
    Xd.middleCols(c0, B).bottomRows(H) = ctx;
    Cprev.middleCols(c0, B) = cell;
    Sprev.middleCols(c0, B) = s;
    auto G = Gd.middleCols(c0, B);
    G.noalias() = P.dec_wx * Xd.middleCols(c0, B);
    G.noalias() += P.dec_wh * s;
    G.colwise() += P.dec_b.col(0);
    activate(G, H);
    cell = (G.middleRows(H, H).array() * cell.array() + G.topRows(H).array() * G.middleRows(2 * H, H).array()).matrix();
    TCd.middleCols(c0, B) = cell.array().tanh().matrix();
    s = (G.bottomRows(H).array() * TCd.middleCols(c0, B).array()).matrix();
    S.middleCols(c0, B) = s;
    Q.middleCols(c0, B).noalias() = P.attn.transpose() * s;
    for (int b = 0; b < B; ++b) {
      const Mat& Hm = Hb[static_cast<std::size_t>(b)];
      Vec a = Hm.transpose() * Q.col(c0 + b);
      const T mx = a.maxCoeff();
      a = (a.array() - mx).exp().matrix();
      a /= a.sum();
      ctx.col(b).noalias() = Hm * a;
      attn[static_cast<std::size_t>(c0 + b)] = std::move(a);
    }
    O.middleCols(c0, B).topRows(H) = s;
    O.middleCols(c0, B).bottomRows(H) = ctx;
    O.middleCols(c0, B).array() *= out_drop.middleCols(c0, B).array();
    Y.middleCols(c0, B).noalias() = P.proj * O.middleCols(c0, B);
    auto Yt = Y.middleCols(c0, B);
    Vec logits_gold(B);
    for (int b = 0; b < B; ++b) logits_gold(b) = Yt(gold(t, b), b);
    softmax_columns<T>(Yt, log_norm);
    for (int b = 0; b < B; ++b) {
      if (t > target_len(b)) continue;
      result.loss += static_cast<double>(log_norm(b) - logits_gold(b));
      ++result.steps;
    }
  }
  if (!std::isfinite(result.loss)) throw Error("model: non-finite loss");
  if (!grad) return result;

  // ---- backward
  Parameters<T>& g = *grad;
  g.resize(config_);
  g.set_zero();

  Mat dY = Y;
  for (int t = 0; t < L; ++t)
    for (int b = 0; b < B; ++b) {
      const int c = t * B + b;
      if (t > target_len(b))
        dY.col(c).setZero();
      else
        dY(gold(t, b), c) -= T(1);
    }
  g.proj.noalias() += dY * O.transpose();
  Mat dO = P.proj.transpose() * dY;
  dO.array() *= out_drop.array();

  std::vector<Mat> dHb(static_cast<std::size_t>(B));
  for (int b = 0; b < B; ++b) dHb[static_cast<std::size_t>(b)] = Mat::Zero(H, length(b));
  Mat ds_next = Mat::Zero(H, B), dc_next = Mat::Zero(H, B), dctx_next = Mat::Zero(H, B);
  Mat dQ(H, B), dZd(4 * H, LB), dz, ds, dc, dx;
  for (int t = L - 1; t >= 0; --t) {
    const int c0 = t * B;
    Mat dctx = dO.middleCols(c0, B).bottomRows(H) + dctx_next;
    ds = dO.middleCols(c0, B).topRows(H) + ds_next;
    for (int b = 0; b < B; ++b) {
      const Mat& Hm = Hb[static_cast<std::size_t>(b)];
      const Vec& a = attn[static_cast<std::size_t>(c0 + b)];
      const Vec da = Hm.transpose() * dctx.col(b);
      const Vec dscore = (a.array() * (da.array() - a.dot(da))).matrix();
      Mat& dH = dHb[static_cast<std::size_t>(b)];
      dH.noalias() += dctx.col(b) * a.transpose();
      dH.noalias() += Q.col(c0 + b) * dscore.transpose();
      dQ.col(b).noalias() = Hm * dscore;
    }
    g.attn.noalias() += S.middleCols(c0, B) * dQ.transpose();
    ds.noalias() += P.attn * dQ;
    dc = dc_next;
    cell_backward<T>(H, Gd.middleCols(c0, B), Cprev.middleCols(c0, B), TCd.middleCols(c0, B), nullptr, ds, dc, dz);
    dZd.middleCols(c0, B) = dz;
    dx.noalias() = P.dec_wx.transpose() * dz;
    for (int b = 0; b < B; ++b)
      g.dec_embed.col(prev[static_cast<std::size_t>(c0 + b)]) +=
          dx.col(b).head(E).cwiseProduct(dec_drop.col(c0 + b));
    dctx_next = dx.bottomRows(H);
    ds_next.noalias() = P.dec_wh.transpose() * dz;
    dc_next = dc;
  }
  g.dec_wx.noalias() += dZd * Xd.transpose();
  g.dec_wh.noalias() += dZd * Sprev.transpose();
  g.dec_b += dZd.rowwise().sum();

  Mat dHf = Mat::Zero(h, Ts * B), dHbk = Mat::Zero(h, Ts * B);
  for (int b = 0; b < B; ++b)
    for (int t = 0; t < length(b); ++t) {
      dHf.col(t * B + b) = dHb[static_cast<std::size_t>(b)].col(t).head(h);
      dHbk.col(t * B + b) = dHb[static_cast<std::size_t>(b)].col(t).tail(h);
    }
  Mat dX = Mat::Zero(E, Ts * B);
  backprop_direction<T>(P.fwd_wx, P.fwd_wh, X, mask, Ts, B, true, fwd, dHf, ds_next.topRows(h), dc_next.topRows(h),
                        g.fwd_wx, g.fwd_wh, g.fwd_b, dX);
  backprop_direction<T>(P.bwd_wx, P.bwd_wh, X, mask, Ts, B, false, bwd, dHbk, ds_next.bottomRows(h),
                        dc_next.bottomRows(h), g.bwd_wx, g.bwd_wh, g.bwd_b, dX);
  dX.array() *= enc_drop.array();
  for (int t = 0; t < Ts; ++t)
    for (int b = 0; b < B; ++b) {
      if (t >= length(b)) continue;
      const int id = source_id(t, b);
      if (!tied.empty() && tied[static_cast<std::size_t>(id)] >= 0)
        g.dec_embed.col(tied[static_cast<std::size_t>(id)]) += dX.col(t * B + b);
      else
        g.enc_embed.col(id) += dX.col(t * B + b);
    }
  return result;
}

template <typename T>
typename Seq2Seq<T>::Trace Seq2Seq<T>::trace(const Example& example) const {
  const auto& P = params_;
  const int E = config_.embedding_dim, h = config_.hidden, H = config_.decoder_hidden();
  const int Ts = static_cast<int>(example.source.size());
  if (Ts == 0) throw Error("model: empty source sequence");
  const auto& tied = config_.tied;
  Mat X(E, Ts);
  for (int t = 0; t < Ts; ++t) {
    const int id = example.source[static_cast<std::size_t>(t)];
    X.col(t) = (!tied.empty() && tied[static_cast<std::size_t>(id)] >= 0) ? P.dec_embed.col(tied[static_cast<std::size_t>(id)])
                                                                           : P.enc_embed.col(id);
  }
  RowMask<T> mask = RowMask<T>::Ones(Ts);
  DirectionTrace<T> fwd, bwd;
  run_direction<T>(P.fwd_wx, P.fwd_wh, P.fwd_b, X, mask, Ts, 1, true, fwd);
  run_direction<T>(P.bwd_wx, P.bwd_wh, P.bwd_b, X, mask, Ts, 1, false, bwd);
  Mat Hm(H, Ts);
  Hm.topRows(h) = fwd.h;
  Hm.bottomRows(h) = bwd.h;

  Trace out;
  Vec s(H), cell(H), ctx = Vec::Zero(H), x(E + H), o(2 * H);
  s << fwd.h_last, bwd.h_last;
  cell << fwd.c_last, bwd.c_last;
  int in = Vocab::kBos;
  const int L = static_cast<int>(example.target.size()) + 1;
  for (int t = 0; t < L; ++t) {
    x << P.dec_embed.col(in), ctx;
    Mat z = P.dec_wx * x + P.dec_wh * s + P.dec_b;
    activate(z, H);
    cell = (z.middleRows(H, H).array() * cell.array() + z.topRows(H).array() * z.middleRows(2 * H, H).array()).matrix();
    s = (z.bottomRows(H).array() * cell.array().tanh()).matrix();
    Vec a = Hm.transpose() * (P.attn.transpose() * s);
    a = (a.array() - a.maxCoeff()).exp().matrix();
    a /= a.sum();
    ctx = Hm * a;
    o << s, ctx;
    Vec y = P.proj * o;
    const int gold = t < L - 1 ? example.target[static_cast<std::size_t>(t)] : Vocab::kEos;
    const T mx = y.maxCoeff();
    const T lse = mx + std::log((y.array() - mx).exp().sum());
    out.loss += static_cast<double>(lse - y(gold));
    y = (y.array() - lse).exp().matrix();
    out.y.push_back(std::move(y));
    out.attention.push_back(std::move(a));
    in = gold;
  }
  return out;
}

template <typename T>
template <typename U>
Seq2Seq<U> Seq2Seq<T>::cast() const {
  Seq2Seq<U> out;
  out.config_ = config_;
  out.params_.resize(config_);
  using MatU = typename Seq2Seq<U>::Mat;
  std::vector<const Mat*> src;
  params_.for_each([&](const char*, const Mat& m) { src.push_back(&m); });
  std::size_t i = 0;
  out.params_.for_each([&](const char*, MatU& m) { m = src[i++]->template cast<U>(); });
  return out;
}

template <typename T>
Generator<T>::Generator(const Seq2Seq<T>& model) : model_(model) {
  const auto& c = model.config();
  const auto& P = model.params();
  const int E = c.embedding_dim;
  Mat emb = P.enc_embed;
  for (std::size_t id = 0; id < c.tied.size(); ++id)
    if (c.tied[id] >= 0) emb.col(static_cast<Eigen::Index>(id)) = P.dec_embed.col(c.tied[id]);
  fwd_table_ = P.fwd_wx * emb;
  fwd_table_.colwise() += P.fwd_b.col(0);
  bwd_table_ = P.bwd_wx * emb;
  bwd_table_.colwise() += P.bwd_b.col(0);
  dec_table_ = P.dec_wx.leftCols(E) * P.dec_embed;
  dec_table_.colwise() += P.dec_b.col(0);
  dec_ctx_ = P.dec_wx.rightCols(c.decoder_hidden());
}

template <typename T>
DecodeResult Generator<T>::decode(std::span<const int> source, std::size_t max_len, std::vector<Vec>* distributions) const {
  const auto& c = model_.config();
  const auto& P = model_.params();
  const int h = c.hidden, H = c.decoder_hidden();
  const int Ts = static_cast<int>(source.size());
  if (Ts == 0) throw Error("decode: empty source sequence");
  for (int id : source)
    if (id < 0 || id >= c.encoder_vocab) throw Error("decode: encoder id out of range");

  Mat Hm(H, Ts);
  Vec z(4 * h), hs(h), cs(h);
  auto run = [&](const Mat& table, const Mat& wh, bool forward, Vec& h_last, Vec& c_last) {
    hs.setZero();
    cs.setZero();
    for (int s = 0; s < Ts; ++s) {
      const int t = forward ? s : Ts - 1 - s;
      z = table.col(source[static_cast<std::size_t>(t)]);
      z.noalias() += wh * hs;
      activate(z, h);
      cs = (z.segment(h, h).array() * cs.array() + z.head(h).array() * z.segment(2 * h, h).array()).matrix();
      hs = (z.tail(h).array() * cs.array().tanh()).matrix();
      Hm.col(t).segment(forward ? 0 : h, h) = hs;
    }
    h_last = hs;
    c_last = cs;
  };
  Vec hf, cf, hb, cb;
  run(fwd_table_, P.fwd_wh, true, hf, cf);
  run(bwd_table_, P.bwd_wh, false, hb, cb);

  Vec s(H), cell(H), ctx = Vec::Zero(H), zd(4 * H), q(H), a(Ts), logits(c.decoder_vocab);
  s << hf, hb;
  cell << cf, cb;
  DecodeResult out;
  int prev = Vocab::kBos;
  while (out.ids.size() < max_len) {
    zd = dec_table_.col(prev);
    zd.noalias() += dec_ctx_ * ctx;
    zd.noalias() += P.dec_wh * s;
    activate(zd, H);
    cell = (zd.segment(H, H).array() * cell.array() + zd.head(H).array() * zd.segment(2 * H, H).array()).matrix();
    s = (zd.tail(H).array() * cell.array().tanh()).matrix();
    q.noalias() = P.attn.transpose() * s;
    a.noalias() = Hm.transpose() * q;
    a = (a.array() - a.maxCoeff()).exp().matrix();
    a /= a.sum();
    ctx.noalias() = Hm * a;
    logits.noalias() = P.proj.leftCols(H) * s;
    logits.noalias() += P.proj.rightCols(H) * ctx;
    ++out.steps;
    if (distributions) {
      Vec y = (logits.array() - logits.maxCoeff()).exp().matrix();
      distributions->push_back(y / y.sum());
    }
    const int best = argmax<T>(logits);
    if (best == Vocab::kEos) break;
    out.ids.push_back(best);
    prev = best;
  }
  return out;
}

template struct Parameters<float>;
template struct Parameters<double>;
template class Seq2Seq<float>;
template class Seq2Seq<double>;
template Seq2Seq<float> Seq2Seq<double>::cast<float>() const;
template Seq2Seq<double> Seq2Seq<float>::cast<double>() const;
template Seq2Seq<float> Seq2Seq<float>::cast<float>() const;
template Seq2Seq<double> Seq2Seq<double>::cast<double>() const;
template class Generator<float>;
template class Generator<double>;

}  // namespace dta
