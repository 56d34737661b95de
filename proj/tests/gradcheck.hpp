#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "radnet/fusionnet.hpp"
#include "radnet/rng.hpp"

namespace radnet::testing {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t params = 0;
};

/// Random head and batch for configuration `index`. BatchNorm affine
/// parameters and biases are moved off their identity initialization so
/// every gradient path is exercised.
struct GradCheckCase {
  HeadParams<double> params;
  Matrix<double> x, y;
  std::uint64_t dropout_seed = 0;
};

inline GradCheckCase make_gradcheck_case(std::uint64_t index) {
  CounterRng rng(mix_key({0x47524144ULL, index}));
  GradCheckCase c;
  const std::size_t in = 2 + rng.below(6);
  const std::size_t n_hidden = 1 + rng.below(2);
  std::vector<std::size_t> hidden;
  for (std::size_t i = 0; i < n_hidden; ++i) hidden.push_back(2 + rng.below(5));
  const std::size_t classes = 2 + rng.below(4);
  const std::size_t batch = 3 + rng.below(5);
  const double dropout = index % 2 ? 0.3 : 0.0;
  c.params = init_head<double>(in, hidden, classes, dropout, index);
  for (auto& b : c.params.biases) {
    for (auto& v : b) v = rng.uniform(-0.5, 0.5);
  }
  for (auto& g : c.params.bn_gamma) {
    for (auto& v : g) v = rng.uniform(0.5, 1.5);
  }
  for (auto& b : c.params.bn_beta) {
    for (auto& v : b) v = rng.uniform(-0.5, 0.5);
  }
  c.x = Matrix<double>(batch, in);
  for (auto& v : c.x.data) v = rng.uniform(-2.0, 2.0);
  std::vector<std::uint8_t> labels;
  for (std::size_t i = 0; i < batch; ++i) labels.push_back(static_cast<std::uint8_t>(rng.below(classes)));
  c.y = onehot_rows<double>(labels, classes);
  c.dropout_seed = mix_key({index, 0x5345454400ULL});
  return c;
}

inline double gradcheck_loss(const GradCheckCase& c) {
  const auto cache = head_forward(c.params, c.x, Mode::Train, c.dropout_seed);
  return cross_entropy(softmax_rows(cache.logits), c.y);
}

/// Compares every analytic gradient entry with a central difference.
/// Relative error is |a - n| / max(|a|, |n|, 1e-6).
inline GradCheckResult gradcheck(GradCheckCase& c, double h = 1e-5) {
  GradCheckResult r;
  const auto cache = head_forward(c.params, c.x, Mode::Train, c.dropout_seed);
  auto grads = head_backward(c.params, cache, c.y);
  auto p = c.params.trainable();
  auto g = grads.tensors();
  for (std::size_t t = 0; t < p.size(); ++t) {
    for (std::size_t e = 0; e < p[t].size(); ++e) {
      const double saved = p[t][e];
      p[t][e] = saved + h;
      const double up = gradcheck_loss(c);
      p[t][e] = saved - h;
      const double down = gradcheck_loss(c);
      p[t][e] = saved;
      const double numeric = (up - down) / (2 * h);
      const double analytic = g[t][e];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
      r.max_rel_error = std::max(r.max_rel_error, std::abs(analytic - numeric) / denom);
      ++r.checked;
    }
  }
  r.params = c.params.parameter_count();
  return r;
}

}  // namespace radnet::testing
