#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <span>
#include <stdexcept>
#include <vector>

#include "appd/detection.hpp"
#include "appd/events.hpp"
#include "appd/format.hpp"

namespace appd {

struct StepMetrics {
  int step = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t u = 0;        // true anomalies
  std::size_t v = 0;        // sequences alarmed by this step
  std::size_t u_and_v = 0;  // correctly alarmed
  bool degenerate = false;  // no alarms at all by this step
};

/// Cumulative detection quality per step: a sequence counts as positive at
/// step i if it alarmed at any step <= i, so sequences shorter than i keep
/// their final status.
inline std::vector<StepMetrics> stepwise_evaluate(std::span<const Sequence> dataset,
                                                  const DetectorParams& det,
                                                  const ThresholdCurve& curve,
                                                  int i_max) {
  std::size_t u = 0;
  for (const Sequence& s : dataset) {
    if (s.label == Label::anomalous) ++u;
  }
  if (u == 0) {
    throw std::invalid_argument("stepwise_evaluate: dataset has no anomalous sequences");
  }

  // alarm step per sequence, 0 = never
  std::vector<int> alarm_step(dataset.size(), 0);
  for (std::size_t s = 0; s < dataset.size(); ++s) {
    DetectionResult r = detect(dataset[s], det, curve);
    if (r.is_anomaly) alarm_step[s] = *r.stop_index;
  }

  std::vector<StepMetrics> out;
  out.reserve(i_max);
  for (int i = 1; i <= i_max; ++i) {
    StepMetrics m;
    m.step = i;
    m.u = u;
    for (std::size_t s = 0; s < dataset.size(); ++s) {
      if (alarm_step[s] >= 1 && alarm_step[s] <= i) {
        ++m.v;
        if (dataset[s].label == Label::anomalous) ++m.u_and_v;
      }
    }
    if (m.v == 0) {
      m.degenerate = true;
      m.precision = 0.0;
    } else {
      m.precision = static_cast<double>(m.u_and_v) / static_cast<double>(m.v);
    }
    m.recall = static_cast<double>(m.u_and_v) / static_cast<double>(m.u);
    m.f1 = (m.precision + m.recall) > 0.0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    out.push_back(m);
  }
  return out;
}

inline void write_metrics_csv(std::span<const StepMetrics> metrics,
                              const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "step,precision,recall,f1,U,V,UiV,degenerate\n";
  for (const StepMetrics& m : metrics) {
    out << m.step << ',' << format_double(m.precision) << ',' << format_double(m.recall)
        << ',' << format_double(m.f1) << ',' << m.u << ',' << m.v << ',' << m.u_and_v
        << ',' << (m.degenerate ? 1 : 0) << '\n';
  }
}

/// Mean prefix-statistic traces for threshold/separation plots. Entries are
/// per step (carry-forward for shorter sequences); normal_mean is NaN when
/// the dataset has no normal-labeled sequences.
struct TraceSummary {
  std::vector<double> anomalous_mean;
  std::vector<double> normal_mean;
  std::vector<double> generated_mean;  // unscaled curve values
  std::vector<double> threshold;       // scaled curve values
};

inline TraceSummary summarize_traces(std::span<const Sequence> dataset,
                                     const DetectorParams& det,
                                     const ThresholdCurve& curve, int i_max) {
  if (!det.frozen_features.has_value()) {
    throw std::invalid_argument("summarize_traces: detector has no frozen features");
  }
  TraceSummary out;
  out.anomalous_mean.assign(i_max, 0.0);
  out.normal_mean.assign(i_max, 0.0);
  std::size_t n_anom = 0, n_norm = 0;
  for (const Sequence& s : dataset) {
    if (s.empty() || s.label == Label::unknown) continue;
    std::vector<double> prefix = prefix_log_likelihood(s, det, *det.frozen_features);
    auto& acc = (s.label == Label::anomalous) ? out.anomalous_mean : out.normal_mean;
    (s.label == Label::anomalous ? n_anom : n_norm) += 1;
    for (int i = 0; i < i_max; ++i) {
      acc[i] += prefix[std::min<std::size_t>(i, prefix.size() - 1)];
    }
  }
  for (int i = 0; i < i_max; ++i) {
    out.anomalous_mean[i] =
        n_anom > 0 ? out.anomalous_mean[i] / static_cast<double>(n_anom) : NAN;
    out.normal_mean[i] =
        n_norm > 0 ? out.normal_mean[i] / static_cast<double>(n_norm) : NAN;
    out.generated_mean.push_back(curve.values[std::min<std::size_t>(i, curve.size() - 1)]);
    out.threshold.push_back(curve.eta(static_cast<std::size_t>(i) + 1));
  }
  return out;
}

inline void write_traces_csv(const TraceSummary& traces,
                             const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "step,real_mean,generated_mean,threshold,normal_mean\n";
  for (std::size_t i = 0; i < traces.threshold.size(); ++i) {
    out << (i + 1) << ',' << format_double(traces.anomalous_mean[i]) << ','
        << format_double(traces.generated_mean[i]) << ','
        << format_double(traces.threshold[i]) << ','
        << format_double(traces.normal_mean[i]) << '\n';
  }
}

}  // namespace appd
