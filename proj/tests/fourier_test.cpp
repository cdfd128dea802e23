#include "appd/fourier.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "appd/rng.hpp"

using namespace appd;

namespace {

TEST(SampleFeatures, ZeroNetworkGivesZeroFrequencies) {
  Rng rng(1);
  SpectrumNet net = SpectrumNet::make(2, 2, std::vector<int>{8}, rng);
  for (double& w : net.weights) w = 0.0;
  FourierFeatureSet fs = sample_features(net, 32, rng);
  for (double omega : fs.omegas) EXPECT_EQ(omega, 0.0);
  for (double u : fs.phases) {
    EXPECT_GE(u, 0.0);
    EXPECT_LE(u, kTwoPi);
  }
}

TEST(SampleFeatures, IdentitySpectrumMatchesStandardNormalMoments) {
  Rng rng(5);
  SpectrumNet net = SpectrumNet::identity(2);
  const int count = 20000;
  FourierFeatureSet fs = sample_features(net, count, rng);
  const double bound = 3.0 / std::sqrt(static_cast<double>(count));
  for (int c = 0; c < 2; ++c) {
    double mean = 0.0, sq = 0.0;
    for (int k = 0; k < count; ++k) {
      const double v = fs.omega(k)[c];
      mean += v;
      sq += v * v;
    }
    mean /= count;
    const double var = sq / count - mean * mean;
    EXPECT_LE(std::abs(mean), bound);
    EXPECT_LE(std::abs(var - 1.0), 3.0 * bound);
  }
}

TEST(SampleFeatures, SameSeedSameFeatures) {
  SpectrumNet net = [] {
    Rng r(2);
    return SpectrumNet::make(2, 3, std::vector<int>{16, 16}, r);
  }();
  Rng a(77), b(77);
  FourierFeatureSet fa = sample_features(net, 64, a);
  FourierFeatureSet fb = sample_features(net, 64, b);
  EXPECT_EQ(fa.omegas, fb.omegas);
  EXPECT_EQ(fa.phases, fb.phases);
  EXPECT_EQ(fa.zetas, fb.zetas);
}

TEST(SampleFeatures, CountMustBePositive) {
  Rng rng(3);
  SpectrumNet net = SpectrumNet::identity(1);
  EXPECT_THROW(sample_features(net, 0, rng), std::invalid_argument);
}

FourierFeatureSet single_feature(double omega, double phase) {
  FourierFeatureSet fs;
  fs.omega_dim = 1;
  fs.noise_dim = 1;
  fs.omegas = {omega};
  fs.phases = {phase};
  fs.zetas = {0.0};
  return fs;
}

TEST(FeatureMap, SingleFeatureValues) {
  KernelProjection w = KernelProjection::identity(1);
  const std::vector<double> x{0.37};

  auto at_zero = feature_map(x, single_feature(0.0, 0.0), w);
  ASSERT_EQ(at_zero.size(), 1u);
  EXPECT_DOUBLE_EQ(at_zero[0], std::sqrt(2.0));

  auto at_half_pi = feature_map(x, single_feature(0.0, std::numbers::pi / 2.0), w);
  EXPECT_NEAR(at_half_pi[0], 0.0, 1e-15);
}

TEST(FeatureMap, SquaredNormBoundedByTwo) {
  Rng rng(9);
  SpectrumNet net = SpectrumNet::make(2, 2, std::vector<int>{8}, rng);
  KernelProjection w = KernelProjection::random(2, 2, rng);
  FourierFeatureSet fs = sample_features(net, 50, rng);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x{rng.normal(), rng.normal()};
    auto phi = feature_map(x, fs, w);
    double norm2 = 0.0;
    for (double v : phi) norm2 += v * v;
    EXPECT_GE(norm2, 0.0);
    EXPECT_LE(norm2, 2.0 + 1e-12);
  }
}

TEST(KernelEstimate, SingleZeroFrequencyGivesTwo) {
  KernelProjection w = KernelProjection::identity(1);
  FourierFeatureSet fs = single_feature(0.0, 0.0);
  const std::vector<double> x{0.2}, y{5.0};
  EXPECT_DOUBLE_EQ(kernel_estimate(x, y, fs, w), 2.0);
}

TEST(KernelEstimate, SymmetricExactly) {
  Rng rng(21);
  SpectrumNet net = SpectrumNet::make(2, 2, std::vector<int>{8, 8}, rng);
  KernelProjection w = KernelProjection::random(2, 3, rng);
  FourierFeatureSet fs = sample_features(net, 32, rng);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> x{rng.normal(), rng.normal(), rng.normal()};
    std::vector<double> y{rng.normal(), rng.normal(), rng.normal()};
    EXPECT_EQ(kernel_estimate(x, y, fs, w), kernel_estimate(y, x, fs, w));
  }
}

TEST(KernelEstimate, MatchesFeatureMapInnerProduct) {
  Rng rng(22);
  SpectrumNet net = SpectrumNet::make(2, 2, std::vector<int>{8}, rng);
  KernelProjection w = KernelProjection::random(2, 2, rng);
  FourierFeatureSet fs = sample_features(net, 64, rng);
  std::vector<double> x{0.5, 1.5}, y{1.0, 0.25};
  auto px = feature_map(x, fs, w);
  auto py = feature_map(y, fs, w);
  double dot = 0.0;
  for (std::size_t k = 0; k < px.size(); ++k) dot += px[k] * py[k];
  EXPECT_NEAR(kernel_estimate(x, y, fs, w), dot, 1e-12);
}

/// With the pass-through spectrum the population kernel is the unit Gaussian
/// exp(-|x - y|^2 / 2), which serves as a closed-form oracle.
TEST(KernelEstimate, GaussianSpectrumOracle) {
  Rng rng(31);
  SpectrumNet net = SpectrumNet::identity(2);
  KernelProjection w = KernelProjection::identity(2);
  FourierFeatureSet fs = sample_features(net, 10000, rng);
  double max_err = 0.0;
  for (int pair = 0; pair < 100; ++pair) {
    std::vector<double> x{rng.uniform(0.0, 2.0), rng.uniform(0.0, 2.0)};
    std::vector<double> delta{rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)};
    std::vector<double> y{x[0] + delta[0], x[1] + delta[1]};
    const double dist2 = delta[0] * delta[0] + delta[1] * delta[1];
    const double expected = std::exp(-dist2 / 2.0);
    max_err = std::max(max_err, std::abs(kernel_estimate(x, y, fs, w) - expected));
  }
  EXPECT_LE(max_err, 0.05);
}

TEST(KernelEstimate, GramMatrixIsPositiveSemiDefinite) {
  Rng rng(41);
  SpectrumNet net = SpectrumNet::make(2, 2, std::vector<int>{8}, rng);
  KernelProjection w = KernelProjection::random(2, 2, rng);
  FourierFeatureSet fs = sample_features(net, 24, rng);
  const int n = 12;
  std::vector<std::vector<double>> pts;
  for (int i = 0; i < n; ++i) pts.push_back({rng.normal(), rng.normal()});
  std::vector<double> gram(n * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      gram[i * n + j] = kernel_estimate(pts[i], pts[j], fs, w);
    }
  }
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v(n);
    double norm2 = 0.0;
    for (double& vi : v) {
      vi = rng.normal();
      norm2 += vi * vi;
    }
    double quad = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) quad += v[i] * gram[i * n + j] * v[j];
    }
    EXPECT_GE(quad, -1e-9 * norm2);
  }
}

/// Sup-error over a fixed grid of pairs shrinks as the number of features
/// grows.
TEST(KernelEstimate, ApproximationErrorDecaysWithFeatureCount) {
  SpectrumNet net = SpectrumNet::identity(2);
  KernelProjection w = KernelProjection::identity(2);
  std::vector<std::vector<double>> grid;
  for (int i = 0; i < 20; ++i) {
    grid.push_back({3.0 * i / 19.0, 3.0 * (19 - i) / 19.0});
  }
  auto sup_error = [&](const FourierFeatureSet& fs) {
    double err = 0.0;
    for (const auto& x : grid) {
      for (const auto& y : grid) {
        const double dx = x[0] - y[0], dy = x[1] - y[1];
        const double expected = std::exp(-(dx * dx + dy * dy) / 2.0);
        err = std::max(err, std::abs(kernel_estimate(x, y, fs, w) - expected));
      }
    }
    return err;
  };
  int wins = 0;
  const int trials = 20;
  for (int t = 0; t < trials; ++t) {
    Rng rng(1000 + t);
    Rng small_rng = rng.child(0);
    Rng large_rng = rng.child(1);
    const double err_small = sup_error(sample_features(net, 64, small_rng));
    const double err_large = sup_error(sample_features(net, 4096, large_rng));
    if (err_small > err_large) ++wins;
  }
  EXPECT_GE(wins, 19);
}

/// The diagonal of the kernel averages to one across feature resamplings,
/// reflecting a spectrum normalized as a probability measure.
TEST(KernelEstimate, DiagonalAveragesToOne) {
  Rng rng(51);
  SpectrumNet net = SpectrumNet::identity(2);
  KernelProjection w = KernelProjection::identity(2);
  const std::vector<double> x{0.4, 1.2};
  double mean = 0.0;
  const int resamples = 10000;
  for (int s = 0; s < resamples; ++s) {
    FourierFeatureSet fs = sample_features(net, 2, rng);
    mean += kernel_estimate(x, x, fs, w);
  }
  mean /= resamples;
  EXPECT_NEAR(mean, 1.0, 0.02);
}

}  // namespace
