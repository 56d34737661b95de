#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "radnet/binary.hpp"
#include "radnet/error.hpp"
#include "radnet/matrix.hpp"
#include "radnet/rng.hpp"

namespace radnet {

// ---------------------------------------------------------------------------
// Compound scaling calculator
// ---------------------------------------------------------------------------

struct CompoundScaling {
  double depth = 1.0;
  double width = 1.0;
  double resolution = 1.0;
  /// |alpha * beta^2 * gamma^2 - 2|
  double residual = 0.0;
};

inline CompoundScaling compound_scaling(double alpha, double beta, double gamma, double phi) {
  if (!(alpha > 0.0) || !(beta > 0.0) || !(gamma > 0.0) || !std::isfinite(phi)) {
    fail(ErrorCode::InvalidParam, "compound scaling bases must be > 0");
  }
  return {std::pow(alpha, phi), std::pow(beta, phi), std::pow(gamma, phi),
          std::abs(alpha * beta * beta * gamma * gamma - 2.0)};
}

// ---------------------------------------------------------------------------
// Fusion
// ---------------------------------------------------------------------------

/// deep | radiomic, deep segment first.
struct FusedVector {
  std::vector<float> values;
  std::size_t deep_dim = 0;
  std::size_t radiomic_dim = 0;
};

inline FusedVector fuse_features(std::span<const float> deep, std::span<const float> radiomic) {
  if (deep.empty() || radiomic.empty()) {
    fail(ErrorCode::EmptyComponent, "fusion needs non-empty deep and radiomic vectors");
  }
  FusedVector f;
  f.values.reserve(deep.size() + radiomic.size());
  f.values.insert(f.values.end(), deep.begin(), deep.end());
  f.values.insert(f.values.end(), radiomic.begin(), radiomic.end());
  f.deep_dim = deep.size();
  f.radiomic_dim = radiomic.size();
  return f;
}

/// Row-wise fusion of two feature batches.
inline Matrix<float> fuse_rows(const Matrix<float>& deep, const Matrix<float>& radiomic) {
  if (deep.rows != radiomic.rows) {
    fail(ErrorCode::DimMismatch, "deep features have " + std::to_string(deep.rows) +
                                     " rows, radiomic features " +
                                     std::to_string(radiomic.rows));
  }
  Matrix<float> out(deep.rows, deep.cols + radiomic.cols);
  for (std::size_t r = 0; r < deep.rows; ++r) {
    const auto f = fuse_features(deep.row(r), radiomic.row(r));
    std::copy(f.values.begin(), f.values.end(), out.row(r).begin());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Elementwise functions and loss
// ---------------------------------------------------------------------------

/// x * Phi(x) with the exact Gaussian CDF.
template <typename T>
T gelu(T x) {
  return x * T(0.5) * (T(1) + std::erf(x / std::numbers::sqrt2_v<T>));
}

/// d/dx gelu(x) = Phi(x) + x * phi(x)
template <typename T>
T gelu_grad(T x) {
  const T cdf = T(0.5) * (T(1) + std::erf(x / std::numbers::sqrt2_v<T>));
  const T pdf = std::exp(T(-0.5) * x * x) * (std::numbers::inv_sqrtpi_v<T> / std::numbers::sqrt2_v<T>);
  return cdf + x * pdf;
}

/// Max-shifted softmax, in place.
template <typename T>
void softmax_inplace(std::span<T> z) {
  if (z.empty()) return;
  const T m = *std::max_element(z.begin(), z.end());
  T sum = 0;
  for (auto& v : z) {
    v = std::exp(v - m);
    sum += v;
  }
  for (auto& v : z) v /= sum;
}

template <typename T>
std::vector<T> softmax(std::span<const T> logits) {
  std::vector<T> out(logits.begin(), logits.end());
  softmax_inplace(std::span<T>(out));
  return out;
}

template <typename T>
Matrix<T> softmax_rows(Matrix<T> logits) {
  for (std::size_t r = 0; r < logits.rows; ++r) softmax_inplace(logits.row(r));
  return logits;
}

/// Mean categorical cross-entropy; predictions are clipped to [1e-12, 1].
template <typename T>
double cross_entropy(const Matrix<T>& pred, const Matrix<T>& target) {
  if (pred.rows != target.rows || pred.cols != target.cols) {
    fail(ErrorCode::ShapeMismatch, "prediction and target shapes differ");
  }
  if (pred.rows == 0) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    if (target.data[i] != T(0)) {
      const double p = std::clamp(static_cast<double>(pred.data[i]), 1e-12, 1.0);
      total -= static_cast<double>(target.data[i]) * std::log(p);
    }
  }
  return total / static_cast<double>(pred.rows);
}

template <typename T>
Matrix<T> onehot_rows(std::span<const std::uint8_t> labels, std::size_t num_classes) {
  Matrix<T> m(labels.size(), num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= num_classes) fail(ErrorCode::IndexOutOfRange, "label out of range");
    m(i, labels[i]) = T(1);
  }
  return m;
}

/// Index of the largest entry; ties go to the lowest index.
template <typename T>
std::size_t argmax(std::span<const T> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

// ---------------------------------------------------------------------------
// Classification head
// ---------------------------------------------------------------------------

/// Dense -> BatchNorm -> GELU -> Dropout for every hidden layer, then a final
/// dense layer producing class logits. Weights are stored input-major
/// (sizes[l] x sizes[l+1]).
template <typename T>
struct HeadParams {
  std::vector<std::size_t> sizes;  // input, hidden..., classes
  std::vector<Matrix<T>> weights;
  std::vector<std::vector<T>> biases;
  std::vector<std::vector<T>> bn_gamma, bn_beta, bn_running_mean, bn_running_var;
  double dropout = 0.5;
  double bn_eps = 1e-5;
  double bn_momentum = 0.1;
  /// Bumped by every optimizer step; caches from older generations are stale.
  std::uint64_t generation = 0;

  std::size_t num_dense() const { return weights.size(); }
  std::size_t num_hidden() const { return bn_gamma.size(); }
  std::size_t input_dim() const { return sizes.front(); }
  std::size_t num_classes() const { return sizes.back(); }

  /// Trainable tensors in a fixed order: per layer W, b, then gamma, beta
  /// for hidden layers.
  std::vector<std::span<T>> trainable() {
    std::vector<std::span<T>> out;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      out.emplace_back(weights[l].data);
      out.emplace_back(biases[l]);
      if (l < bn_gamma.size()) {
        out.emplace_back(bn_gamma[l]);
        out.emplace_back(bn_beta[l]);
      }
    }
    return out;
  }

  std::size_t parameter_count() {
    std::size_t n = 0;
    for (auto t : trainable()) n += t.size();
    return n;
  }

  template <typename U>
  HeadParams<U> cast() const {
    HeadParams<U> o;
    o.sizes = sizes;
    o.dropout = dropout;
    o.bn_eps = bn_eps;
    o.bn_momentum = bn_momentum;
    o.generation = generation;
    auto conv = [](const std::vector<T>& v) { return std::vector<U>(v.begin(), v.end()); };
    for (const auto& w : weights) o.weights.emplace_back(w.rows, w.cols, conv(w.data));
    for (const auto& b : biases) o.biases.push_back(conv(b));
    for (const auto& v : bn_gamma) o.bn_gamma.push_back(conv(v));
    for (const auto& v : bn_beta) o.bn_beta.push_back(conv(v));
    for (const auto& v : bn_running_mean) o.bn_running_mean.push_back(conv(v));
    for (const auto& v : bn_running_var) o.bn_running_var.push_back(conv(v));
    return o;
  }
};

/// Same layout as the trainable tensors of HeadParams.
template <typename T>
struct HeadGradients {
  std::vector<Matrix<T>> weights;
  std::vector<std::vector<T>> biases;
  std::vector<std::vector<T>> bn_gamma, bn_beta;

  std::vector<std::span<T>> tensors() {
    std::vector<std::span<T>> out;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      out.emplace_back(weights[l].data);
      out.emplace_back(biases[l]);
      if (l < bn_gamma.size()) {
        out.emplace_back(bn_gamma[l]);
        out.emplace_back(bn_beta[l]);
      }
    }
    return out;
  }
};

/// Glorot-uniform weights, zero biases, identity BatchNorm.
template <typename T>
HeadParams<T> init_head(std::size_t input_dim, std::span<const std::size_t> hidden,
                        std::size_t num_classes, double dropout, std::uint64_t seed) {
  if (input_dim == 0 || num_classes == 0) fail(ErrorCode::InvalidParam, "empty head layer");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail(ErrorCode::InvalidParam, "dropout must be in [0, 1)");
  HeadParams<T> p;
  p.dropout = dropout;
  p.sizes.push_back(input_dim);
  for (auto h : hidden) {
    if (h == 0) fail(ErrorCode::InvalidParam, "empty hidden layer");
    p.sizes.push_back(h);
  }
  p.sizes.push_back(num_classes);
  for (std::size_t l = 0; l + 1 < p.sizes.size(); ++l) {
    const std::size_t in = p.sizes[l], out = p.sizes[l + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    CounterRng rng(mix_key({seed, 0x494e4954ULL, l}));
    Matrix<T> w(in, out);
    for (auto& v : w.data) v = static_cast<T>(rng.uniform(-limit, limit));
    p.weights.push_back(std::move(w));
    p.biases.emplace_back(out, T(0));
    if (l + 2 < p.sizes.size()) {
      p.bn_gamma.emplace_back(out, T(1));
      p.bn_beta.emplace_back(out, T(0));
      p.bn_running_mean.emplace_back(out, T(0));
      p.bn_running_var.emplace_back(out, T(1));
    }
  }
  return p;
}

enum class Mode { Train, Eval };

template <typename T>
struct HiddenCache {
  std::vector<T> mean, var, inv_std;  // batch statistics (train mode)
  Matrix<T> xhat;                     // normalized pre-activation
  Matrix<T> bn_out;                   // gamma * xhat + beta, the GELU input
  Matrix<T> mask;                     // dropout multipliers (0 or 1/(1-p))
};

template <typename T>
struct ForwardCache {
  Mode mode = Mode::Eval;
  std::uint64_t generation = 0;
  std::vector<Matrix<T>> inputs;  // input of every dense layer
  std::vector<HiddenCache<T>> hidden;
  Matrix<T> logits;
};

namespace detail {

// out = x * w + b. The k-outer loop streams each weight row once per batch;
// each output element accumulates in k order regardless of batch size.
template <typename T>
Matrix<T> dense_forward(const Matrix<T>& x, const Matrix<T>& w, const std::vector<T>& b) {
  Matrix<T> out(x.rows, w.cols);
  for (std::size_t s = 0; s < x.rows; ++s) std::copy(b.begin(), b.end(), out.row(s).begin());
  for (std::size_t k = 0; k < w.rows; ++k) {
    const T* wr = w.data.data() + k * w.cols;
    for (std::size_t s = 0; s < x.rows; ++s) {
      const T xv = x.data[s * x.cols + k];
      if (xv == T(0)) continue;
      T* o = out.data.data() + s * out.cols;
      for (std::size_t j = 0; j < w.cols; ++j) o[j] += xv * wr[j];
    }
  }
  return out;
}

// dw = x^T dz
template <typename T>
Matrix<T> dense_weight_grad(const Matrix<T>& x, const Matrix<T>& dz) {
  Matrix<T> dw(x.cols, dz.cols);
  for (std::size_t k = 0; k < x.cols; ++k) {
    T* g = dw.data.data() + k * dw.cols;
    for (std::size_t s = 0; s < x.rows; ++s) {
      const T xv = x.data[s * x.cols + k];
      if (xv == T(0)) continue;
      const T* d = dz.data.data() + s * dz.cols;
      for (std::size_t j = 0; j < dz.cols; ++j) g[j] += xv * d[j];
    }
  }
  return dw;
}

// dx = dz w^T
template <typename T>
Matrix<T> dense_input_grad(const Matrix<T>& dz, const Matrix<T>& w) {
  Matrix<T> dx(dz.rows, w.rows);
  for (std::size_t s = 0; s < dz.rows; ++s) {
    const T* d = dz.data.data() + s * dz.cols;
    for (std::size_t k = 0; k < w.rows; ++k) {
      const T* wr = w.data.data() + k * w.cols;
      T acc = 0;
      for (std::size_t j = 0; j < w.cols; ++j) acc += d[j] * wr[j];
      dx(s, k) = acc;
    }
  }
  return dx;
}

template <typename T>
std::vector<T> column_sums(const Matrix<T>& m) {
  std::vector<T> out(m.cols, T(0));
  for (std::size_t s = 0; s < m.rows; ++s) {
    const T* r = m.data.data() + s * m.cols;
    for (std::size_t j = 0; j < m.cols; ++j) out[j] += r[j];
  }
  return out;
}

}  // namespace detail

/// Forward pass. Train mode normalizes with batch statistics and applies
/// inverted dropout drawn from a stream keyed by (dropout_seed, layer); eval
/// mode uses running statistics and no dropout. Parameters are not modified;
/// see update_running_stats.
template <typename T>
ForwardCache<T> head_forward(const HeadParams<T>& params, const Matrix<T>& batch, Mode mode,
                             std::uint64_t dropout_seed = 0) {
  if (batch.cols != params.input_dim()) {
    fail(ErrorCode::ShapeMismatch, "batch width " + std::to_string(batch.cols) +
                                       " != head input " + std::to_string(params.input_dim()));
  }
  if (mode == Mode::Train && batch.rows < 2) {
    fail(ErrorCode::DegenerateBatch, "train-mode batches need at least 2 rows");
  }
  ForwardCache<T> cache;
  cache.mode = mode;
  cache.generation = params.generation;
  const std::size_t n = batch.rows;
  const T keep_scale = T(1) / static_cast<T>(1.0 - params.dropout);
  Matrix<T> act = batch;
  for (std::size_t l = 0; l < params.num_hidden(); ++l) {
    Matrix<T> z = detail::dense_forward(act, params.weights[l], params.biases[l]);
    if (mode == Mode::Train) cache.inputs.push_back(std::move(act));
    const std::size_t width = z.cols;
    HiddenCache<T> hc;
    if (mode == Mode::Train) {
      hc.mean = detail::column_sums(z);
      for (auto& m : hc.mean) m /= static_cast<T>(n);
      hc.var.assign(width, T(0));
      for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t j = 0; j < width; ++j) {
          const T d = z(s, j) - hc.mean[j];
          hc.var[j] += d * d;
        }
      }
      for (auto& v : hc.var) v /= static_cast<T>(n);
    } else {
      hc.mean = params.bn_running_mean[l];
      hc.var = params.bn_running_var[l];
    }
    hc.inv_std.resize(width);
    for (std::size_t j = 0; j < width; ++j) {
      hc.inv_std[j] = T(1) / std::sqrt(hc.var[j] + static_cast<T>(params.bn_eps));
    }
    hc.xhat = Matrix<T>(n, width);
    hc.bn_out = Matrix<T>(n, width);
    Matrix<T> out(n, width);
    for (std::size_t s = 0; s < n; ++s) {
      for (std::size_t j = 0; j < width; ++j) {
        const T xh = (z(s, j) - hc.mean[j]) * hc.inv_std[j];
        const T y = params.bn_gamma[l][j] * xh + params.bn_beta[l][j];
        hc.xhat(s, j) = xh;
        hc.bn_out(s, j) = y;
        out(s, j) = gelu(y);
      }
    }
    if (mode == Mode::Train && params.dropout > 0.0) {
      hc.mask = Matrix<T>(n, width);
      CounterRng rng(mix_key({dropout_seed, 0x44524f50ULL, l}));
      for (std::size_t i = 0; i < hc.mask.data.size(); ++i) {
        hc.mask.data[i] = rng.bernoulli(params.dropout) ? T(0) : keep_scale;
        out.data[i] *= hc.mask.data[i];
      }
    }
    if (mode == Mode::Train) cache.hidden.push_back(std::move(hc));
    act = std::move(out);
  }
  const std::size_t last = params.num_dense() - 1;
  cache.logits = detail::dense_forward(act, params.weights[last], params.biases[last]);
  if (mode == Mode::Train) cache.inputs.push_back(std::move(act));
  return cache;
}

/// Backpropagates mean softmax cross-entropy through a train-mode cache.
/// The logit gradient uses the fused form (softmax(z) - y) / N.
template <typename T>
HeadGradients<T> head_backward(const HeadParams<T>& params, const ForwardCache<T>& cache,
                               const Matrix<T>& targets) {
  if (cache.mode != Mode::Train || cache.inputs.size() != params.num_dense()) {
    fail(ErrorCode::StaleCache, "backward needs a train-mode forward cache");
  }
  if (cache.generation != params.generation) {
    fail(ErrorCode::StaleCache, "parameters changed since the forward pass");
  }
  if (targets.rows != cache.logits.rows || targets.cols != cache.logits.cols) {
    fail(ErrorCode::ShapeMismatch, "target shape does not match logits");
  }
  const std::size_t n = targets.rows;
  const T inv_n = T(1) / static_cast<T>(n);
  HeadGradients<T> g;
  g.weights.resize(params.num_dense());
  g.biases.resize(params.num_dense());
  g.bn_gamma.resize(params.num_hidden());
  g.bn_beta.resize(params.num_hidden());

  Matrix<T> dz = softmax_rows(cache.logits);
  for (std::size_t i = 0; i < dz.data.size(); ++i) {
    dz.data[i] = (dz.data[i] - targets.data[i]) * inv_n;
  }
  for (std::size_t l = params.num_dense(); l-- > 0;) {
    g.weights[l] = detail::dense_weight_grad(cache.inputs[l], dz);
    g.biases[l] = detail::column_sums(dz);
    if (l == 0) break;
    Matrix<T> da = detail::dense_input_grad(dz, params.weights[l]);
    // Back through the hidden block l-1: dropout, GELU, BatchNorm.
    const auto& hc = cache.hidden[l - 1];
    const std::size_t width = da.cols;
    if (!hc.mask.data.empty()) {
      for (std::size_t i = 0; i < da.data.size(); ++i) da.data[i] *= hc.mask.data[i];
    }
    for (std::size_t i = 0; i < da.data.size(); ++i) da.data[i] *= gelu_grad(hc.bn_out.data[i]);
    auto& dgamma = g.bn_gamma[l - 1];
    auto& dbeta = g.bn_beta[l - 1];
    dgamma.assign(width, T(0));
    dbeta.assign(width, T(0));
    std::vector<T> sum_dxhat(width, T(0)), sum_dxhat_xhat(width, T(0));
    const auto& gamma = params.bn_gamma[l - 1];
    for (std::size_t s = 0; s < n; ++s) {
      for (std::size_t j = 0; j < width; ++j) {
        const T dy = da(s, j);
        const T xh = hc.xhat(s, j);
        dgamma[j] += dy * xh;
        dbeta[j] += dy;
        const T dxh = dy * gamma[j];
        sum_dxhat[j] += dxh;
        sum_dxhat_xhat[j] += dxh * xh;
      }
    }
    Matrix<T> dpre(n, width);
    for (std::size_t s = 0; s < n; ++s) {
      for (std::size_t j = 0; j < width; ++j) {
        const T dxh = da(s, j) * gamma[j];
        dpre(s, j) = hc.inv_std[j] * inv_n *
                     (static_cast<T>(n) * dxh - sum_dxhat[j] - hc.xhat(s, j) * sum_dxhat_xhat[j]);
      }
    }
    dz = std::move(dpre);
  }
  return g;
}

/// Exponential moving update of BatchNorm running statistics from a
/// train-mode cache; the running variance uses the unbiased batch variance.
template <typename T>
void update_running_stats(HeadParams<T>& params, const ForwardCache<T>& cache) {
  if (cache.mode != Mode::Train) return;
  const T mom = static_cast<T>(params.bn_momentum);
  for (std::size_t l = 0; l < cache.hidden.size(); ++l) {
    const auto& hc = cache.hidden[l];
    const auto n = static_cast<T>(hc.xhat.rows);
    for (std::size_t j = 0; j < hc.mean.size(); ++j) {
      params.bn_running_mean[l][j] = (T(1) - mom) * params.bn_running_mean[l][j] + mom * hc.mean[j];
      params.bn_running_var[l][j] =
          (T(1) - mom) * params.bn_running_var[l][j] + mom * hc.var[j] * n / (n - T(1));
    }
  }
}

/// Class probabilities in eval mode, processed in row chunks.
template <typename T>
Matrix<T> predict_proba(const HeadParams<T>& params, const Matrix<T>& x,
                        std::size_t chunk = 256) {
  Matrix<T> out(x.rows, params.num_classes());
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < x.rows; start += chunk) {
    const std::size_t end = std::min(x.rows, start + chunk);
    idx.resize(end - start);
    for (std::size_t i = start; i < end; ++i) idx[i - start] = i;
    const auto cache = head_forward(params, select_rows(x, std::span<const std::size_t>(idx)), Mode::Eval);
    const auto probs = softmax_rows(cache.logits);
    std::copy(probs.data.begin(), probs.data.end(), out.row(start).begin());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Optimizer and schedules
// ---------------------------------------------------------------------------

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Decoupled weight decay (AdamW style); 0 disables it.
  double weight_decay = 0.0;
};

template <typename T>
struct OptimizerState {
  AdamConfig config;
  double lr = 1e-3;
  std::uint64_t t = 0;
  std::vector<std::vector<T>> m, v;
};

template <typename T>
OptimizerState<T> init_optimizer(HeadParams<T>& params, double lr, AdamConfig cfg = {}) {
  OptimizerState<T> st;
  st.config = cfg;
  st.lr = lr;
  for (auto t : params.trainable()) {
    st.m.emplace_back(t.size(), T(0));
    st.v.emplace_back(t.size(), T(0));
  }
  return st;
}

/// Bias-corrected Adam update over raw tensors.
template <typename T>
void adam_update(std::span<const std::span<T>> params, std::span<const std::span<T>> grads,
                 OptimizerState<T>& st) {
  if (params.size() != grads.size() || params.size() != st.m.size()) {
    fail(ErrorCode::ShapeMismatch, "optimizer tensor count mismatch");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].size() != grads[i].size() || params[i].size() != st.m[i].size()) {
      fail(ErrorCode::ShapeMismatch, "optimizer tensor shape mismatch");
    }
  }
  ++st.t;
  const auto& c = st.config;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(st.t));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(st.t));
  const T b1 = static_cast<T>(c.beta1), b2 = static_cast<T>(c.beta2);
  const T one_b1 = static_cast<T>(1.0 - c.beta1), one_b2 = static_cast<T>(1.0 - c.beta2);
  const T inv_bc1 = static_cast<T>(1.0 / bc1), inv_bc2 = static_cast<T>(1.0 / bc2);
  const T lr = static_cast<T>(st.lr), eps = static_cast<T>(c.eps);
  const T decay = static_cast<T>(st.lr * c.weight_decay);
  for (std::size_t i = 0; i < params.size(); ++i) {
    T* p = params[i].data();
    const T* g = grads[i].data();
    T* m = st.m[i].data();
    T* v = st.v[i].data();
    for (std::size_t e = 0; e < params[i].size(); ++e) {
      m[e] = b1 * m[e] + one_b1 * g[e];
      v[e] = b2 * v[e] + one_b2 * g[e] * g[e];
      const T mhat = m[e] * inv_bc1;
      const T vhat = v[e] * inv_bc2;
      p[e] -= lr * mhat / (std::sqrt(vhat) + eps) + decay * p[e];
    }
  }
}

template <typename T>
void adam_step(HeadParams<T>& params, HeadGradients<T>& grads, OptimizerState<T>& st) {
  const auto p = params.trainable();
  const auto g = grads.tensors();
  adam_update<T>(p, g, st);
  ++params.generation;
}

/// Multiplies the learning rate by `factor` once `patience` consecutive
/// epochs fail to improve the best validation loss by more than `threshold`.
struct PlateauScheduler {
  double factor = 0.1;
  std::size_t patience = 5;
  double min_lr = 1e-6;
  double threshold = 1e-8;
  double best = std::numeric_limits<double>::infinity();
  std::size_t bad_epochs = 0;

  double step(double val_loss, double lr) {
    if (val_loss < best - threshold) {
      best = val_loss;
      bad_epochs = 0;
      return lr;
    }
    if (++bad_epochs >= patience) {
      bad_epochs = 0;
      return std::max(lr * factor, min_lr);
    }
    return lr;
  }
};

/// Signals a stop once `patience` consecutive epochs fail to improve.
struct EarlyStopping {
  std::size_t patience = 10;
  double threshold = 1e-8;
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
  std::size_t bad_epochs = 0;

  /// Returns true when this epoch is the new best.
  bool update(double val_loss, std::size_t epoch) {
    if (val_loss < best - threshold) {
      best = val_loss;
      best_epoch = epoch;
      bad_epochs = 0;
      return true;
    }
    ++bad_epochs;
    return false;
  }
  bool should_stop() const { return bad_epochs >= patience; }
};

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainConfig {
  std::size_t batch_size = 32;
  std::size_t max_epochs = 50;
  std::size_t early_stop_patience = 10;
  double learning_rate = 1e-3;
  double plateau_factor = 0.1;
  std::size_t plateau_patience = 5;
  double min_lr = 1e-6;
  double improvement_threshold = 1e-8;
  std::vector<std::size_t> hidden{512, 128};
  double dropout = 0.5;
  std::size_t num_classes = 4;
  AdamConfig adam;
  std::uint64_t seed = 0;

  void validate() const {
    if (batch_size < 2 || max_epochs < 1 || early_stop_patience < 1 || plateau_patience < 1 ||
        !(plateau_factor > 0.0 && plateau_factor < 1.0) || !(learning_rate > 0.0) ||
        !(min_lr >= 0.0) || num_classes < 2) {
      fail(ErrorCode::InvalidParam, "invalid training config");
    }
  }
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
  double lr = 0.0;  // learning rate in effect during the epoch

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

inline std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  bool stopped_early = false;

  std::string to_csv() const {
    std::string out = "epoch,train_loss,train_acc,val_loss,val_acc,lr\n";
    for (const auto& e : epochs) {
      out += std::to_string(e.epoch) + ',' + format_number(e.train_loss) + ',' +
             format_number(e.train_acc) + ',' + format_number(e.val_loss) + ',' +
             format_number(e.val_acc) + ',' + format_number(e.lr) + '\n';
    }
    return out;
  }
};

template <typename T>
struct TrainResult {
  HeadParams<T> params;
  TrainHistory history;
};

template <typename T>
double accuracy_of(const Matrix<T>& probs, std::span<const std::uint8_t> labels) {
  std::size_t correct = 0;
  for (std::size_t r = 0; r < probs.rows; ++r) {
    correct += argmax(probs.row(r)) == labels[r];
  }
  return probs.rows ? static_cast<double>(correct) / static_cast<double>(probs.rows) : 0.0;
}

/// Mini-batch training with Adam, plateau LR reduction and early stopping on
/// the validation loss. The parameters of the best validation epoch are
/// returned. A trailing mini-batch of a single row is skipped, since train
/// mode BatchNorm needs two rows; reshuffling moves a different sample there
/// each epoch.
template <typename T>
TrainResult<T> train(const Matrix<T>& train_x, std::span<const std::uint8_t> train_y,
                     const Matrix<T>& val_x, std::span<const std::uint8_t> val_y,
                     const TrainConfig& cfg) {
  cfg.validate();
  if (train_x.rows == 0 || val_x.rows == 0) fail(ErrorCode::EmptyDataset, "empty train or validation set");
  if (train_x.rows != train_y.size() || val_x.rows != val_y.size()) {
    fail(ErrorCode::DimMismatch, "feature rows and labels disagree");
  }
  if (train_x.cols != val_x.cols) fail(ErrorCode::DimMismatch, "train and validation widths differ");
  if (train_x.rows < 2) fail(ErrorCode::DegenerateBatch, "need at least 2 training rows");

  TrainResult<T> result;
  auto& params = result.params;
  params = init_head<T>(train_x.cols, cfg.hidden, cfg.num_classes, cfg.dropout, cfg.seed);
  auto opt = init_optimizer(params, cfg.learning_rate, cfg.adam);
  PlateauScheduler plateau{cfg.plateau_factor, cfg.plateau_patience, cfg.min_lr,
                           cfg.improvement_threshold};
  EarlyStopping stopper{cfg.early_stop_patience, cfg.improvement_threshold};
  HeadParams<T> best = params;
  const auto val_targets = onehot_rows<T>(val_y, cfg.num_classes);

  std::vector<std::size_t> order(train_x.rows);
  std::vector<std::size_t> batch_idx;
  std::vector<std::uint8_t> batch_labels;
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    CounterRng shuffle(mix_key({cfg.seed, 0x53485546ULL, epoch}));
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      std::swap(order[i], order[shuffle.below(i + 1)]);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = opt.lr;
    double loss_sum = 0.0;
    std::size_t correct = 0, seen = 0, batch_no = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      if (end - start < 2) continue;
      batch_idx.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                       order.begin() + static_cast<std::ptrdiff_t>(end));
      batch_labels.clear();
      for (auto i : batch_idx) batch_labels.push_back(train_y[i]);
      const auto xb = select_rows(train_x, std::span<const std::size_t>(batch_idx));
      const auto yb = onehot_rows<T>(batch_labels, cfg.num_classes);
      const auto cache = head_forward(params, xb, Mode::Train,
                                      mix_key({cfg.seed, epoch, batch_no++}));
      const auto probs = softmax_rows(cache.logits);
      loss_sum += cross_entropy(probs, yb) * static_cast<double>(xb.rows);
      for (std::size_t r = 0; r < probs.rows; ++r) correct += argmax(probs.row(r)) == batch_labels[r];
      seen += xb.rows;
      auto grads = head_backward(params, cache, yb);
      update_running_stats(params, cache);
      adam_step(params, grads, opt);
    }
    rec.train_loss = loss_sum / static_cast<double>(seen);
    rec.train_acc = static_cast<double>(correct) / static_cast<double>(seen);
    const auto val_probs = predict_proba(params, val_x);
    rec.val_loss = cross_entropy(val_probs, val_targets);
    rec.val_acc = accuracy_of(val_probs, val_y);
    result.history.epochs.push_back(rec);

    if (stopper.update(rec.val_loss, epoch)) best = params;
    opt.lr = plateau.step(rec.val_loss, opt.lr);
    if (stopper.should_stop()) {
      result.history.stopped_early = true;
      break;
    }
  }
  result.history.best_epoch = stopper.best_epoch;
  params = std::move(best);
  return result;
}

// ---------------------------------------------------------------------------
// Checkpoint: "RHN1" | version | layer sizes | deep_dim | dropout | bn_eps |
//             W, b per dense layer | gamma, beta, mean, var per hidden layer |
//             class table. All little-endian, parameters as float32.
// ---------------------------------------------------------------------------

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  HeadParams<float> params;
  std::size_t deep_dim = 0;
  std::vector<std::string> classes;
};

template <typename T>
std::vector<std::uint8_t> encode_checkpoint(const HeadParams<T>& p, std::size_t deep_dim,
                                            std::span<const std::string> classes) {
  std::vector<std::uint8_t> out{'R', 'H', 'N', '1'};
  bin::put_u32(out, kCheckpointVersion);
  bin::put_u32(out, static_cast<std::uint32_t>(p.sizes.size()));
  for (auto s : p.sizes) bin::put_u32(out, static_cast<std::uint32_t>(s));
  bin::put_u32(out, static_cast<std::uint32_t>(deep_dim));
  bin::put_f32(out, static_cast<float>(p.dropout));
  bin::put_f32(out, static_cast<float>(p.bn_eps));
  auto blob = [&out](const auto& v) {
    for (auto x : v) bin::put_f32(out, static_cast<float>(x));
  };
  for (std::size_t l = 0; l < p.num_dense(); ++l) {
    blob(p.weights[l].data);
    blob(p.biases[l]);
  }
  for (std::size_t l = 0; l < p.num_hidden(); ++l) {
    blob(p.bn_gamma[l]);
    blob(p.bn_beta[l]);
    blob(p.bn_running_mean[l]);
    blob(p.bn_running_var[l]);
  }
  bin::put_u32(out, static_cast<std::uint32_t>(classes.size()));
  for (const auto& c : classes) {
    bin::put_u32(out, static_cast<std::uint32_t>(c.size()));
    out.insert(out.end(), c.begin(), c.end());
  }
  return out;
}

inline Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::string_view(reinterpret_cast<const char*>(bytes.data()), 4) != "RHN1") {
    fail(ErrorCode::BadMagic, "not an RHN1 checkpoint");
  }
  bin::Reader rd(bytes.subspan(4));
  if (rd.u32() != kCheckpointVersion) fail(ErrorCode::CorruptFile, "unsupported checkpoint version");
  Checkpoint ck;
  auto& p = ck.params;
  const std::size_t n_sizes = rd.u32();
  if (n_sizes < 2 || n_sizes > 64) fail(ErrorCode::CorruptFile, "bad layer table");
  for (std::size_t i = 0; i < n_sizes; ++i) {
    p.sizes.push_back(rd.u32());
    if (p.sizes.back() == 0) fail(ErrorCode::CorruptFile, "zero-width layer");
  }
  ck.deep_dim = rd.u32();
  p.dropout = rd.f32();
  p.bn_eps = rd.f32();
  auto blob = [&rd](std::size_t n) {
    if (rd.remaining() / 4 < n) fail(ErrorCode::CorruptFile, "truncated parameter blob");
    std::vector<float> v(n);
    for (auto& x : v) x = rd.f32();
    return v;
  };
  for (std::size_t l = 0; l + 1 < n_sizes; ++l) {
    p.weights.emplace_back(p.sizes[l], p.sizes[l + 1], blob(p.sizes[l] * p.sizes[l + 1]));
    p.biases.push_back(blob(p.sizes[l + 1]));
  }
  for (std::size_t l = 0; l + 2 < n_sizes; ++l) {
    const std::size_t w = p.sizes[l + 1];
    p.bn_gamma.push_back(blob(w));
    p.bn_beta.push_back(blob(w));
    p.bn_running_mean.push_back(blob(w));
    p.bn_running_var.push_back(blob(w));
  }
  const std::size_t n_classes = rd.u32();
  if (n_classes != p.sizes.back()) fail(ErrorCode::CorruptFile, "class table size != output width");
  for (std::size_t i = 0; i < n_classes; ++i) ck.classes.push_back(rd.str(rd.u32()));
  if (rd.remaining() != 0) fail(ErrorCode::CorruptFile, "trailing bytes in checkpoint");
  if (ck.deep_dim >= p.sizes.front() && ck.deep_dim != 0) {
    fail(ErrorCode::CorruptFile, "deep_dim exceeds input width");
  }
  return ck;
}

}  // namespace radnet
