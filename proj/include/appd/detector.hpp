#pragma once

#include <cmath>
#include <complex>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "appd/autodiff.hpp"
#include "appd/events.hpp"
#include "appd/fourier.hpp"

namespace appd {

/// Additive floor applied to the conditional intensity before taking logs;
/// the cosine kernel can drive mu + alpha * sum below zero.
inline constexpr double kIntensityFloor = 1e-9;

struct DetectorParams {
  double mu = 1.0;
  double alpha = 0.1;
  KernelProjection projection;              // r x (d+1)
  SpectrumNet spectrum;
  std::optional<FourierFeatureSet> frozen_features;  // set when detecting

  int mark_dim() const { return projection.cols - 1; }
  int feature_space_dim() const { return projection.rows; }
};

// ---------------------------------------------------------------------------
// Scalar-generic likelihood core. Both the event coordinates and the model
// quantities are of type S, so the same code produces plain values
// (S = double, constants free), detector gradients (model active) and
// generator gradients (event coordinates active).
// ---------------------------------------------------------------------------

template <class S>
struct SequenceView {
  std::span<const S> times;  // N
  std::span<const S> marks;  // N x d, row-major
  int d = 0;
  double horizon = 0.0;

  int size() const { return static_cast<int>(times.size()); }
};

template <class S>
struct DetectorView {
  S mu;
  S alpha;
  std::span<const S> w;              // r x (d+1), row-major
  std::span<const S> omegas;         // D x r, row-major
  std::span<const double> phases;    // D
  int r = 0;
  int d = 0;
  int feature_count = 0;
};

namespace detail {

/// cos of every feature angle at event i of the view.
template <class S>
void event_feature_cosines(const SequenceView<S>& seq, const DetectorView<S>& det,
                           int i, std::vector<S>& proj, std::vector<S>& out) {
  using std::cos;
  const int cols = det.d + 1;
  proj.assign(det.r, S(0.0));
  for (int row = 0; row < det.r; ++row) {
    S acc = det.w[static_cast<std::size_t>(row) * cols] * seq.times[i];
    for (int c = 0; c < det.d; ++c) {
      acc += det.w[static_cast<std::size_t>(row) * cols + 1 + c] *
             seq.marks[static_cast<std::size_t>(i) * det.d + c];
    }
    proj[row] = acc;
  }
  out.assign(det.feature_count, S(0.0));
  for (int k = 0; k < det.feature_count; ++k) {
    S angle = S(det.phases[k]);
    const std::size_t base = static_cast<std::size_t>(k) * det.r;
    for (int row = 0; row < det.r; ++row) {
      angle += det.omegas[base + row] * proj[row];
    }
    out[k] = cos(angle);
  }
}

/// Runs the event loop shared by the batch and prefix likelihoods. Per event
/// the kernel sum over the history reduces to a per-feature running sum of
/// cosines, which keeps the whole pass linear in N * D.
template <class S, class PerEvent>
void likelihood_scan(const SequenceView<S>& seq, const DetectorView<S>& det,
                     PerEvent&& per_event) {
  using std::log;
  const int n = seq.size();
  const double inv_scale = 2.0 / det.feature_count;
  std::vector<S> cosine_prefix(det.feature_count, S(0.0));
  std::vector<S> proj, cosines;
  for (int i = 0; i < n; ++i) {
    event_feature_cosines(seq, det, i, proj, cosines);
    S kernel_sum = S(0.0);
    for (int k = 0; k < det.feature_count; ++k) {
      kernel_sum += cosines[k] * cosine_prefix[k];
    }
    S lambda = det.mu + det.alpha * S(inv_scale) * kernel_sum;
    per_event(i, log(floor_at(lambda, kIntensityFloor)));
    for (int k = 0; k < det.feature_count; ++k) {
      cosine_prefix[k] += cosines[k];
    }
  }
}

inline double mark_volume(int d) { return std::pow(kTwoPi, d); }

}  // namespace detail

/// Full-horizon log-likelihood: sum of log intensities at the events minus
/// the integral term mu * T * (2pi)^d of the normalized model.
template <class S>
S log_likelihood_core(const SequenceView<S>& seq, const DetectorView<S>& det) {
  S acc = S(0.0);
  detail::likelihood_scan(seq, det, [&](int, const S& log_lambda) { acc += log_lambda; });
  return acc - det.mu * S(seq.horizon * detail::mark_volume(det.d));
}

/// Prefix statistics: entry i is the log-likelihood of the first i+1 events
/// with the integral taken only up to t_{i+1} (no terminal survival term).
template <class S>
std::vector<S> prefix_log_likelihood_core(const SequenceView<S>& seq,
                                          const DetectorView<S>& det) {
  const double vol = detail::mark_volume(det.d);
  std::vector<S> out;
  out.reserve(seq.size());
  S running = S(0.0);
  S prev_t = S(0.0);
  detail::likelihood_scan(seq, det, [&](int i, const S& log_lambda) {
    running += log_lambda - det.mu * (seq.times[i] - prev_t) * S(vol);
    prev_t = seq.times[i];
    out.push_back(running);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Plain-value wrappers over the core.
// ---------------------------------------------------------------------------

/// Flattened copy of a sequence for the scalar-generic core. An explicit
/// mark dimension pins down (2pi)^d for empty sequences, whose own d is
/// indeterminate.
struct FlatSequence {
  std::vector<double> times;
  std::vector<double> marks;
  int d = 0;
  double horizon = 0.0;

  explicit FlatSequence(const Sequence& seq, int mark_dim = -1) {
    d = mark_dim >= 0 ? mark_dim : seq.mark_dim();
    if (!seq.empty() && seq.mark_dim() != d) {
      throw std::invalid_argument("sequence mark dimension does not match the model");
    }
    horizon = seq.horizon;
    times.reserve(seq.size());
    marks.reserve(seq.size() * d);
    for (const Event& e : seq.events) {
      times.push_back(e.t);
      marks.insert(marks.end(), e.mark.begin(), e.mark.end());
    }
  }

  SequenceView<double> view() const { return {times, marks, d, horizon}; }
};

inline DetectorView<double> make_view(const DetectorParams& params,
                                      const FourierFeatureSet& fs) {
  return DetectorView<double>{params.mu,
                              params.alpha,
                              params.projection.w,
                              fs.omegas,
                              fs.phases,
                              params.projection.rows,
                              params.mark_dim(),
                              fs.count()};
}

/// Conditional intensity of a candidate event given a strictly earlier
/// history. Floored like the likelihood path.
inline double intensity(const Event& x, std::span<const Event> history,
                        const DetectorParams& params, const FourierFeatureSet& fs) {
  for (const Event& h : history) {
    if (!(h.t < x.t)) {
      throw std::invalid_argument("intensity: history events must precede x");
    }
  }
  const std::vector<double> xs = stack_event(x);
  double sum = 0.0;
  for (const Event& h : history) {
    sum += kernel_estimate(xs, stack_event(h), fs, params.projection);
  }
  return floor_at(params.mu + params.alpha * sum, kIntensityFloor);
}

inline double log_likelihood(const Sequence& seq, const DetectorParams& params,
                             const FourierFeatureSet& fs) {
  FlatSequence flat(seq, params.mark_dim());
  return log_likelihood_core(flat.view(), make_view(params, fs));
}

inline std::vector<double> prefix_log_likelihood(const Sequence& seq,
                                                 const DetectorParams& params,
                                                 const FourierFeatureSet& fs) {
  FlatSequence flat(seq, params.mark_dim());
  return prefix_log_likelihood_core(flat.view(), make_view(params, fs));
}

/// Integral of the conditional intensity over [0, T] x [0, 2pi]^d under the
/// canonical mark normalization.
inline double integral_closed_form(const Sequence& seq, const DetectorParams& params) {
  return params.mu * seq.horizon * detail::mark_volume(params.mark_dim());
}

/// Numerical integral of the un-floored intensity over [0, T] x [0, 2pi]^d.
/// Composite trapezoid on a tensor grid with `resolution` subdivisions per
/// unit length in every dimension; the separable weights let each dimension
/// be summed independently, so the cost stays linear in the grid sides.
inline double integral_quadrature(const Sequence& seq, const DetectorParams& params,
                                  const FourierFeatureSet& fs, double resolution) {
  const int d = params.mark_dim();
  if (!seq.empty() && seq.mark_dim() != d) {
    throw std::invalid_argument("integral_quadrature: mark dimension mismatch");
  }
  if (d > 2) {
    throw std::invalid_argument("integral_quadrature: supports d <= 2 only");
  }
  if (resolution < 100.0) {
    throw std::invalid_argument("integral_quadrature: resolution must be >= 100");
  }
  const double T = seq.horizon;
  double total = params.mu * T * detail::mark_volume(d);
  if (params.alpha == 0.0 || seq.empty()) {
    return total;
  }

  using cplx = std::complex<double>;
  const auto trapezoid_exp = [](double coef, double lo, double hi, int n) {
    // Trapezoid sum of exp(i * coef * s) over [lo, hi] with n intervals.
    const double h = (hi - lo) / n;
    cplx acc = 0.5 * (std::polar(1.0, coef * lo) + std::polar(1.0, coef * hi));
    for (int s = 1; s < n; ++s) {
      acc += std::polar(1.0, coef * (lo + h * s));
    }
    return acc * h;
  };

  const int n = static_cast<int>(seq.size());
  const KernelProjection& w = params.projection;
  std::vector<std::vector<double>> stacked;
  stacked.reserve(n);
  for (const Event& e : seq.events) stacked.push_back(stack_event(e));

  const int mark_intervals = std::max(1, static_cast<int>(std::ceil(resolution * kTwoPi)));
  double kernel_part = 0.0;
  for (int k = 0; k < fs.count(); ++k) {
    // Projected frequency coefficients: c[j] = omega_k . (column j of W).
    std::vector<double> coef(d + 1, 0.0);
    std::span<const double> omega = fs.omega(k);
    for (int j = 0; j <= d; ++j) {
      for (int row = 0; row < w.rows; ++row) {
        coef[j] += omega[row] * w.w[static_cast<std::size_t>(row) * w.cols + j];
      }
    }
    cplx mark_factor = 1.0;
    for (int j = 1; j <= d; ++j) {
      mark_factor *= trapezoid_exp(coef[j], 0.0, kTwoPi, mark_intervals);
    }
    const cplx phase = std::polar(1.0, fs.phases[k]);

    double cos_prefix = 0.0;
    cplx segment_sum = 0.0;
    for (int i = 0; i <= n; ++i) {
      if (i >= 1) {
        cos_prefix += std::cos(feature_angle(fs, w, k, stacked[i - 1]));
      }
      const double lo = (i == 0) ? 0.0 : seq.events[i - 1].t;
      const double hi = (i == n) ? T : seq.events[i].t;
      if (!(hi > lo)) continue;
      const int nt = std::max(1, static_cast<int>(std::ceil(resolution * (hi - lo))));
      segment_sum += cos_prefix * trapezoid_exp(coef[0], lo, hi, nt);
    }
    kernel_part += (phase * mark_factor * segment_sum).real();
  }
  total += params.alpha * 2.0 / fs.count() * kernel_part;
  return total;
}

}  // namespace appd
