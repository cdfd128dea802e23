#include "appd/evaluation.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "appd/rng.hpp"

using namespace appd;

namespace {

/// Homogeneous detector with mu = 1: log(mu) = 0, so the prefix statistic at
/// step i is exactly -t_i. Event times therefore place crossings anywhere we
/// want them.
DetectorParams unit_rate_detector() {
  DetectorParams det;
  det.mu = 1.0;
  det.alpha = 0.0;
  det.projection = KernelProjection::identity(1);
  det.spectrum = SpectrumNet::identity(1);
  FourierFeatureSet fs;
  fs.omega_dim = 1;
  fs.noise_dim = 1;
  fs.omegas = {0.0};
  fs.phases = {0.0};
  fs.zetas = {0.0};
  det.frozen_features = fs;
  return det;
}

Sequence labeled(std::vector<double> times, Label label, double horizon = 2.0) {
  Sequence s;
  s.horizon = horizon;
  s.label = label;
  for (double t : times) s.events.push_back(Event{t, {}});
  return s;
}

TEST(StepwiseEvaluate, PerfectDetectorScoresOneEverywhere) {
  DetectorParams det = unit_rate_detector();
  // Anomalous first events are early (statistic -t1 >= -0.3), normal late.
  std::vector<Sequence> data{
      labeled({0.1, 0.6, 1.2}, Label::anomalous),
      labeled({0.2, 0.8}, Label::anomalous),
      labeled({0.5, 1.0, 1.5}, Label::normal),
      labeled({0.7, 1.4}, Label::normal),
  };
  ThresholdCurve curve;
  curve.values = {-0.3, 1e18, 1e18, 1e18};
  auto metrics = stepwise_evaluate(data, det, curve, 4);
  ASSERT_EQ(metrics.size(), 4u);
  for (const auto& m : metrics) {
    EXPECT_DOUBLE_EQ(m.precision, 1.0);
    EXPECT_DOUBLE_EQ(m.recall, 1.0);
    EXPECT_DOUBLE_EQ(m.f1, 1.0);
    EXPECT_FALSE(m.degenerate);
  }
}

TEST(StepwiseEvaluate, NeverAlarmingDetectorIsDegenerate) {
  DetectorParams det = unit_rate_detector();
  std::vector<Sequence> data{
      labeled({0.1, 0.6}, Label::anomalous),
      labeled({0.5, 1.0}, Label::normal),
  };
  ThresholdCurve curve;
  curve.values = {1e18};
  auto metrics = stepwise_evaluate(data, det, curve, 3);
  for (const auto& m : metrics) {
    EXPECT_DOUBLE_EQ(m.precision, 0.0);
    EXPECT_DOUBLE_EQ(m.recall, 0.0);
    EXPECT_DOUBLE_EQ(m.f1, 0.0);
    EXPECT_TRUE(m.degenerate);
    EXPECT_EQ(m.v, 0u);
  }
}

TEST(StepwiseEvaluate, HandBuiltFourSequenceCase) {
  DetectorParams det = unit_rate_detector();
  // Alarms become possible only at step 3 with eta_3 = -0.5, i.e. alarm iff
  // t_3 <= 0.5. s1 and s3 cross; s2 and s4 do not (and never later, since
  // -t_i only decreases while the curve stays at -0.5).
  std::vector<Sequence> data{
      labeled({0.1, 0.2, 0.3, 0.9}, Label::anomalous),   // s1: alarm at 3
      labeled({0.3, 0.6, 0.9, 1.2}, Label::anomalous),   // s2: no alarm
      labeled({0.15, 0.25, 0.4, 1.0}, Label::normal),    // s3: alarm at 3
      labeled({0.4, 0.6, 0.8, 1.0}, Label::normal),      // s4: no alarm
  };
  ThresholdCurve curve;
  curve.values = {1e18, 1e18, -0.5};
  auto metrics = stepwise_evaluate(data, det, curve, 5);
  for (const auto& m : metrics) {
    if (m.step < 3) {
      EXPECT_TRUE(m.degenerate);
      continue;
    }
    EXPECT_EQ(m.u, 2u);
    EXPECT_EQ(m.v, 2u);
    EXPECT_EQ(m.u_and_v, 1u);
    EXPECT_DOUBLE_EQ(m.precision, 0.5);
    EXPECT_DOUBLE_EQ(m.recall, 0.5);
    EXPECT_DOUBLE_EQ(m.f1, 0.5);
  }
}

TEST(StepwiseEvaluate, RecallNonDecreasingAndF1Bounded) {
  DetectorParams det = unit_rate_detector();
  Rng rng(17);
  std::vector<Sequence> data;
  for (int i = 0; i < 40; ++i) {
    std::vector<double> times;
    double t = 0.0;
    while (true) {
      t += rng.exponential(rng.uniform(2.0, 12.0));
      if (t >= 2.0) break;
      times.push_back(t);
    }
    if (times.empty()) times.push_back(1.0);
    data.push_back(labeled(times, i % 3 == 0 ? Label::anomalous : Label::normal));
  }
  ThresholdCurve curve;
  for (int i = 1; i <= 12; ++i) curve.values.push_back(-0.15 * i);
  auto metrics = stepwise_evaluate(data, det, curve, 12);
  for (std::size_t i = 0; i < metrics.size(); ++i) {
    if (i > 0) {
      EXPECT_GE(metrics[i].recall, metrics[i - 1].recall);
    }
    EXPECT_LE(metrics[i].f1,
              std::min(2.0 * metrics[i].precision, 2.0 * metrics[i].recall) + 1e-12);
    EXPECT_GE(metrics[i].precision, 0.0);
    EXPECT_LE(metrics[i].precision, 1.0);
  }
}

TEST(StepwiseEvaluate, RequiresAnomalousGroundTruth) {
  DetectorParams det = unit_rate_detector();
  std::vector<Sequence> data{labeled({0.5}, Label::normal)};
  ThresholdCurve curve;
  curve.values = {0.0};
  EXPECT_THROW(stepwise_evaluate(data, det, curve, 2), std::invalid_argument);
}

TEST(Traces, SummaryHasAllSeries) {
  DetectorParams det = unit_rate_detector();
  std::vector<Sequence> data{
      labeled({0.1, 0.4}, Label::anomalous),
      labeled({0.6, 1.2}, Label::normal),
  };
  ThresholdCurve curve;
  curve.values = {-0.5, -0.9};
  curve.scale = 2.0;
  TraceSummary tr = summarize_traces(data, det, curve, 3);
  ASSERT_EQ(tr.threshold.size(), 3u);
  EXPECT_DOUBLE_EQ(tr.anomalous_mean[0], -0.1);
  EXPECT_DOUBLE_EQ(tr.normal_mean[0], -0.6);
  EXPECT_DOUBLE_EQ(tr.generated_mean[0], -0.5);
  EXPECT_DOUBLE_EQ(tr.threshold[0], -1.0);
  // carry-forward past the curve end
  EXPECT_DOUBLE_EQ(tr.threshold[2], -1.8);
}

TEST(Traces, CsvShapeIsRectangular) {
  DetectorParams det = unit_rate_detector();
  std::vector<Sequence> data{labeled({0.1, 0.4}, Label::anomalous)};
  ThresholdCurve curve;
  curve.values = {-0.5};
  TraceSummary tr = summarize_traces(data, det, curve, 2);
  const auto path = std::filesystem::temp_directory_path() / "appd_traces.csv";
  write_traces_csv(tr, path);
  std::ifstream in(path);
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 4);
    ++rows;
  }
  EXPECT_EQ(rows, 3);  // header + 2 steps
}

}  // namespace
