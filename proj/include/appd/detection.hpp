#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "appd/detector.hpp"
#include "appd/events.hpp"
#include "appd/generator.hpp"
#include "appd/rng.hpp"

namespace appd {

/// Per-step alarm levels estimated from generator samples. `values` holds
/// the unscaled mean prefix statistic; the effective threshold at step i is
/// scale * values[i], carried forward beyond the last estimated step.
struct ThresholdCurve {
  std::vector<double> values;
  double scale = 1.0;
  int n_gen = 0;
  std::uint64_t seed = 0;

  std::size_t size() const { return values.size(); }

  /// Effective threshold at 1-based step i.
  double eta(std::size_t i) const {
    if (values.empty()) throw std::logic_error("threshold curve is empty");
    const std::size_t idx = std::min(i, values.size()) - 1;
    return scale * values[idx];
  }
};

/// Mean prefix statistic over n_gen generated sequences. Sequences shorter
/// than i_max contribute their last prefix value onward; empty ones are
/// skipped.
inline ThresholdCurve estimate_threshold(const DetectorParams& det,
                                         const GeneratorParams& gen, int n_gen,
                                         int i_max, double scale, std::uint64_t seed,
                                         double horizon, int max_events) {
  if (n_gen < 1 || i_max < 1) {
    throw std::invalid_argument("estimate_threshold: n_gen and i_max must be >= 1");
  }
  if (!det.frozen_features.has_value()) {
    throw std::invalid_argument("estimate_threshold: detector has no frozen features");
  }
  const Rng master(seed);
  std::vector<double> sum(i_max, 0.0);
  int contributing = 0;
  for (int l = 0; l < n_gen; ++l) {
    Rng rng = master.child(l);
    GeneratedSequence g = generate(gen, horizon, rng, max_events);
    if (g.seq.empty()) continue;
    std::vector<double> prefix =
        prefix_log_likelihood(g.seq, det, *det.frozen_features);
    ++contributing;
    for (int i = 0; i < i_max; ++i) {
      const std::size_t idx = std::min<std::size_t>(i, prefix.size() - 1);
      sum[i] += prefix[idx];
    }
  }
  if (contributing == 0) {
    throw std::runtime_error("estimate_threshold: all generated sequences were empty");
  }
  ThresholdCurve curve;
  curve.scale = scale;
  curve.n_gen = n_gen;
  curve.seed = seed;
  curve.values.resize(i_max);
  for (int i = 0; i < i_max; ++i) {
    curve.values[i] = sum[i] / static_cast<double>(contributing);
  }
  return curve;
}

struct DetectionResult {
  bool is_anomaly = false;
  std::optional<int> stop_index;   // 1-based event index of the alarm
  std::optional<double> stop_time;
  std::vector<double> statistic;   // prefix statistic up to the stopping step
};

/// Online pass: the prefix statistic is updated recursively per event and
/// compared against the curve; the scan ends at the first alarm.
inline DetectionResult detect(const Sequence& seq, const DetectorParams& det,
                              const ThresholdCurve& curve) {
  if (!det.frozen_features.has_value()) {
    throw std::invalid_argument("detect: detector has no frozen features");
  }
  const FourierFeatureSet& fs = *det.frozen_features;
  DetectionResult result;
  FlatSequence flat(seq, det.mark_dim());
  SequenceView<double> sv = flat.view();
  DetectorView<double> dv = make_view(det, fs);

  const double vol = detail::mark_volume(sv.d);
  double running = 0.0;
  double prev_t = 0.0;
  bool alarmed = false;
  detail::likelihood_scan(sv, dv, [&](int i, double log_lambda) {
    if (alarmed) return;
    running += log_lambda - det.mu * (sv.times[i] - prev_t) * vol;
    prev_t = sv.times[i];
    result.statistic.push_back(running);
    if (running >= curve.eta(static_cast<std::size_t>(i) + 1)) {
      alarmed = true;
      result.is_anomaly = true;
      result.stop_index = i + 1;
      result.stop_time = sv.times[i];
    }
  });
  return result;
}

/// Variant that re-estimates the threshold from fresh generator samples at
/// every step, as an online procedure would. Statistically identical to the
/// precomputed curve in expectation, but far slower.
inline DetectionResult detect_online_threshold(const Sequence& seq,
                                               const DetectorParams& det,
                                               const GeneratorParams& gen, int n_gen,
                                               double scale, std::uint64_t seed,
                                               int max_events) {
  if (!det.frozen_features.has_value()) {
    throw std::invalid_argument("detect: detector has no frozen features");
  }
  const FourierFeatureSet& fs = *det.frozen_features;
  DetectionResult result;
  std::vector<double> prefix = prefix_log_likelihood(seq, det, fs);
  const Rng master(seed);
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    Rng step_rng = master.child(i);
    ThresholdCurve curve =
        estimate_threshold(det, gen, n_gen, static_cast<int>(i) + 1, scale,
                           step_rng.seed(), seq.horizon, max_events);
    result.statistic.push_back(prefix[i]);
    if (prefix[i] >= curve.eta(i + 1)) {
      result.is_anomaly = true;
      result.stop_index = static_cast<int>(i) + 1;
      result.stop_time = seq.events[i].t;
      break;
    }
  }
  return result;
}

inline nlohmann::json detection_result_to_json(const DetectionResult& r) {
  nlohmann::json j{{"is_anomaly", r.is_anomaly}};
  if (r.is_anomaly) {
    j["stop_index"] = *r.stop_index;
    j["stop_time"] = *r.stop_time;
  }
  j["statistic"] = r.statistic;
  return j;
}

}  // namespace appd
