#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "appd/autodiff.hpp"
#include "appd/rng.hpp"

namespace appd {

// ---------------------------------------------------------------------------
// Minimal dense-network building blocks, templated over the scalar type so
// the same forward code serves plain evaluation (double) and taped gradients
// (ad::Var). Weight layout is fixed and documented per block; parameters are
// always a flat span.
// ---------------------------------------------------------------------------

/// Fully-connected network with tanh hidden layers and a linear output
/// layer. sizes = {in, hidden..., out}; a two-entry spec is a single affine
/// map. Per layer the weights are W (out x in, row-major) followed by b.
struct MlpSpec {
  std::vector<int> sizes;

  int input_dim() const { return sizes.front(); }
  int output_dim() const { return sizes.back(); }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
      n += static_cast<std::size_t>(sizes[l + 1]) * sizes[l] + sizes[l + 1];
    }
    return n;
  }
};

template <class S>
std::vector<S> mlp_apply(const MlpSpec& spec, std::span<const S> w,
                         std::span<const S> in) {
  using std::tanh;
  if (static_cast<int>(in.size()) != spec.input_dim()) {
    throw std::invalid_argument("mlp_apply: input dimension mismatch");
  }
  std::vector<S> cur(in.begin(), in.end());
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < spec.sizes.size(); ++l) {
    const int n_in = spec.sizes[l];
    const int n_out = spec.sizes[l + 1];
    std::vector<S> next(n_out);
    for (int o = 0; o < n_out; ++o) {
      S acc = w[off + static_cast<std::size_t>(n_out) * n_in + o];  // bias
      const std::size_t row = off + static_cast<std::size_t>(o) * n_in;
      for (int i = 0; i < n_in; ++i) {
        acc += w[row + i] * cur[i];
      }
      next[o] = (l + 2 < spec.sizes.size()) ? tanh(acc) : acc;
    }
    cur = std::move(next);
    off += static_cast<std::size_t>(n_out) * n_in + n_out;
  }
  return cur;
}

inline void mlp_init(const MlpSpec& spec, std::span<double> w, Rng& rng) {
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < spec.sizes.size(); ++l) {
    const int n_in = spec.sizes[l];
    const int n_out = spec.sizes[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(n_in));
    const std::size_t count = static_cast<std::size_t>(n_out) * n_in + n_out;
    for (std::size_t i = 0; i < count; ++i) {
      w[off + i] = rng.uniform(-bound, bound);
    }
    off += count;
  }
}

/// Identity initialization for a square single-layer spec ({n, n}).
inline void mlp_init_identity(const MlpSpec& spec, std::span<double> w) {
  if (spec.sizes.size() != 2 || spec.sizes[0] != spec.sizes[1]) {
    throw std::invalid_argument("identity init needs a square single-layer spec");
  }
  const int n = spec.sizes[0];
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = 0.0;
  for (int i = 0; i < n; ++i) w[static_cast<std::size_t>(i) * n + i] = 1.0;
}

/// Single LSTM cell. Parameters are W_x (4h x in), W_h (4h x h), b (4h),
/// gate rows ordered input, forget, candidate, output.
struct LstmSpec {
  int input = 0;
  int hidden = 0;

  std::size_t param_count() const {
    const std::size_t h4 = static_cast<std::size_t>(4) * hidden;
    return h4 * input + h4 * hidden + h4;
  }
};

template <class S>
void lstm_step(const LstmSpec& spec, std::span<const S> w, std::span<const S> x,
               std::vector<S>& h, std::vector<S>& c) {
  using std::tanh;
  const int hd = spec.hidden;
  const std::size_t h4 = static_cast<std::size_t>(4) * hd;
  const std::size_t wx_off = 0;
  const std::size_t wh_off = h4 * spec.input;
  const std::size_t b_off = wh_off + h4 * hd;

  std::vector<S> gates(h4);
  for (std::size_t g = 0; g < h4; ++g) {
    S acc = w[b_off + g];
    const std::size_t xrow = wx_off + g * spec.input;
    for (int i = 0; i < spec.input; ++i) acc += w[xrow + i] * x[i];
    const std::size_t hrow = wh_off + g * hd;
    for (int i = 0; i < hd; ++i) acc += w[hrow + i] * h[i];
    gates[g] = acc;
  }
  for (int i = 0; i < hd; ++i) {
    S in_g = logistic(gates[i]);
    S forget_g = logistic(gates[hd + i]);
    S cand = tanh(gates[2 * hd + i]);
    S out_g = logistic(gates[3 * hd + i]);
    c[i] = forget_g * c[i] + in_g * cand;
    h[i] = out_g * tanh(c[i]);
  }
}

inline void lstm_init(const LstmSpec& spec, std::span<double> w, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(spec.input + spec.hidden));
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = rng.uniform(-bound, bound);
  }
}

}  // namespace appd
