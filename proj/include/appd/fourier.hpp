#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "appd/events.hpp"
#include "appd/nn.hpp"
#include "appd/rng.hpp"

namespace appd {

/// Learned spectral density: frequency vectors are produced by pushing
/// standard-normal noise through this network.
struct SpectrumNet {
  MlpSpec arch;                 // {q, hidden..., r}
  std::vector<double> weights;

  int noise_dim() const { return arch.input_dim(); }
  int feature_dim() const { return arch.output_dim(); }

  static SpectrumNet make(int q, int r, std::span<const int> hidden, Rng& rng) {
    SpectrumNet net;
    net.arch.sizes.push_back(q);
    for (int hs : hidden) net.arch.sizes.push_back(hs);
    net.arch.sizes.push_back(r);
    net.weights.resize(net.arch.param_count());
    mlp_init(net.arch, net.weights, rng);
    return net;
  }

  /// Pass-through spectrum: frequencies keep the standard-normal law of the
  /// noise, which realizes a unit-bandwidth Gaussian kernel.
  static SpectrumNet identity(int n) {
    SpectrumNet net;
    net.arch.sizes = {n, n};
    net.weights.resize(net.arch.param_count());
    mlp_init_identity(net.arch, net.weights);
    return net;
  }
};

/// A realized draw of random Fourier features: D frequency vectors with
/// their phases. The noise vectors are retained so gradients can flow
/// through the spectrum network by reparameterization.
struct FourierFeatureSet {
  int omega_dim = 0;                // r
  int noise_dim = 0;                // q
  std::vector<double> omegas;       // D x r, row-major
  std::vector<double> phases;       // D, each in [0, 2pi]
  std::vector<double> zetas;        // D x q, row-major

  int count() const { return static_cast<int>(phases.size()); }

  std::span<const double> omega(int k) const {
    return std::span<const double>(omegas).subspan(
        static_cast<std::size_t>(k) * omega_dim, omega_dim);
  }
  std::span<const double> zeta(int k) const {
    return std::span<const double>(zetas).subspan(
        static_cast<std::size_t>(k) * noise_dim, noise_dim);
  }
};

inline FourierFeatureSet sample_features(const SpectrumNet& net, int count, Rng& rng) {
  if (count < 1) {
    throw std::invalid_argument("sample_features: count must be >= 1");
  }
  FourierFeatureSet fs;
  fs.omega_dim = net.feature_dim();
  fs.noise_dim = net.noise_dim();
  fs.omegas.reserve(static_cast<std::size_t>(count) * fs.omega_dim);
  fs.phases.reserve(count);
  fs.zetas.reserve(static_cast<std::size_t>(count) * fs.noise_dim);
  std::vector<double> zeta(fs.noise_dim);
  for (int k = 0; k < count; ++k) {
    for (double& z : zeta) z = rng.normal();
    fs.zetas.insert(fs.zetas.end(), zeta.begin(), zeta.end());
    std::vector<double> omega =
        mlp_apply<double>(net.arch, net.weights, zeta);
    fs.omegas.insert(fs.omegas.end(), omega.begin(), omega.end());
    fs.phases.push_back(rng.uniform(0.0, kTwoPi));
  }
  return fs;
}

/// Linear map from stacked event coordinates [t, mark...] into the frequency
/// space; rows x cols with cols = d + 1.
struct KernelProjection {
  int rows = 0;
  int cols = 0;
  std::vector<double> w;  // row-major

  static KernelProjection identity(int n) {
    KernelProjection p;
    p.rows = p.cols = n;
    p.w.assign(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) p.w[static_cast<std::size_t>(i) * n + i] = 1.0;
    return p;
  }

  static KernelProjection random(int rows, int cols, Rng& rng) {
    KernelProjection p;
    p.rows = rows;
    p.cols = cols;
    const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
    p.w.resize(static_cast<std::size_t>(rows) * cols);
    for (double& v : p.w) v = rng.uniform(-bound, bound);
    return p;
  }
};

/// Angle of feature k at stacked coordinates x: omega_k . (W x) + u_k.
inline double feature_angle(const FourierFeatureSet& fs, const KernelProjection& w,
                            int k, std::span<const double> x) {
  if (static_cast<int>(x.size()) != w.cols) {
    throw std::invalid_argument("feature_angle: point dimension mismatch");
  }
  std::span<const double> omega = fs.omega(k);
  double angle = fs.phases[k];
  for (int row = 0; row < w.rows; ++row) {
    double proj = 0.0;
    const std::size_t base = static_cast<std::size_t>(row) * w.cols;
    for (int c = 0; c < w.cols; ++c) proj += w.w[base + c] * x[c];
    angle += omega[row] * proj;
  }
  return angle;
}

/// Feature embedding of a stacked event vector. Component k is
/// sqrt(2) cos(omega_k . W x + u_k) / sqrt(D); with the 1/sqrt(D) folded in,
/// the plain dot product of two embeddings is the empirical kernel value.
inline std::vector<double> feature_map(std::span<const double> x,
                                       const FourierFeatureSet& fs,
                                       const KernelProjection& w) {
  const double scale = std::sqrt(2.0 / fs.count());
  std::vector<double> out(fs.count());
  for (int k = 0; k < fs.count(); ++k) {
    out[k] = scale * std::cos(feature_angle(fs, w, k, x));
  }
  return out;
}

/// Empirical shift-invariant kernel value; symmetric and bounded in [-2, 2].
inline double kernel_estimate(std::span<const double> x, std::span<const double> y,
                              const FourierFeatureSet& fs, const KernelProjection& w) {
  double acc = 0.0;
  for (int k = 0; k < fs.count(); ++k) {
    acc += std::cos(feature_angle(fs, w, k, x)) * std::cos(feature_angle(fs, w, k, y));
  }
  return 2.0 * acc / fs.count();
}

inline std::vector<double> stack_event(const Event& e) {
  std::vector<double> x;
  x.reserve(e.mark.size() + 1);
  x.push_back(e.t);
  x.insert(x.end(), e.mark.begin(), e.mark.end());
  return x;
}

}  // namespace appd
