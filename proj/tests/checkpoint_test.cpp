#include "appd/checkpoint.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "appd/rng.hpp"

namespace fs = std::filesystem;
using namespace appd;

namespace {

Checkpoint sample_checkpoint(std::uint64_t seed) {
  Rng rng(seed);
  Checkpoint ckpt;
  ckpt.detector.mu = rng.uniform(1.0, 20.0);
  ckpt.detector.alpha = rng.uniform(0.01, 2.0);
  ckpt.detector.projection = KernelProjection::random(2, 2, rng);
  ckpt.detector.spectrum = SpectrumNet::make(2, 2, std::vector<int>{8, 8}, rng);
  ckpt.detector.frozen_features = sample_features(ckpt.detector.spectrum, 12, rng);
  ckpt.generator = GeneratorParams::make(8, 1, rng, 0.3);
  ThresholdCurve curve;
  curve.scale = 1.5;
  curve.n_gen = 16;
  curve.seed = 99;
  for (int i = 0; i < 10; ++i) curve.values.push_back(rng.normal());
  ckpt.threshold = curve;
  ckpt.config.m0 = 123;
  ckpt.config.seed = seed;
  ckpt.horizon = 2.1333;
  ckpt.dataset_digest = "0123456789abcdef";
  return ckpt;
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const fs::path path = fs::temp_directory_path() / "appd_ckpt.json";
  Checkpoint a = sample_checkpoint(7);
  save_checkpoint(a, path);
  Checkpoint b = load_checkpoint(path);

  EXPECT_EQ(a.detector.mu, b.detector.mu);
  EXPECT_EQ(a.detector.alpha, b.detector.alpha);
  EXPECT_EQ(a.detector.projection.w, b.detector.projection.w);
  EXPECT_EQ(a.detector.spectrum.arch.sizes, b.detector.spectrum.arch.sizes);
  EXPECT_EQ(a.detector.spectrum.weights, b.detector.spectrum.weights);
  ASSERT_TRUE(b.detector.frozen_features.has_value());
  EXPECT_EQ(a.detector.frozen_features->omegas, b.detector.frozen_features->omegas);
  EXPECT_EQ(a.detector.frozen_features->phases, b.detector.frozen_features->phases);
  EXPECT_EQ(a.detector.frozen_features->zetas, b.detector.frozen_features->zetas);
  EXPECT_EQ(a.generator.weights, b.generator.weights);
  ASSERT_TRUE(b.threshold.has_value());
  EXPECT_EQ(a.threshold->values, b.threshold->values);
  EXPECT_EQ(a.threshold->scale, b.threshold->scale);
  EXPECT_EQ(a.config.m0, b.config.m0);
  EXPECT_EQ(a.horizon, b.horizon);
  EXPECT_EQ(a.dataset_digest, b.dataset_digest);
}

TEST(Checkpoint, ResaveIsByteIdentical) {
  const fs::path p1 = fs::temp_directory_path() / "appd_ckpt1.json";
  const fs::path p2 = fs::temp_directory_path() / "appd_ckpt2.json";
  Checkpoint a = sample_checkpoint(11);
  save_checkpoint(a, p1);
  save_checkpoint(load_checkpoint(p1), p2);
  std::ifstream f1(p1), f2(p2);
  std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  EXPECT_EQ(s1, s2);
}

TEST(Checkpoint, VersionMismatchRejected) {
  Checkpoint a = sample_checkpoint(13);
  nlohmann::json j = checkpoint_to_json(a);
  j["version"] = 999;
  EXPECT_THROW(checkpoint_from_json(j), CheckpointError);
}

TEST(Checkpoint, MissingGeneratorRejected) {
  Checkpoint a = sample_checkpoint(17);
  nlohmann::json j = checkpoint_to_json(a);
  j["generator"] = nullptr;
  EXPECT_THROW(checkpoint_from_json(j), CheckpointError);
}

TEST(Checkpoint, ThresholdIsOptional) {
  Checkpoint a = sample_checkpoint(19);
  a.threshold.reset();
  a.detector.frozen_features.reset();
  nlohmann::json j = checkpoint_to_json(a);
  Checkpoint b = checkpoint_from_json(j);
  EXPECT_FALSE(b.threshold.has_value());
  EXPECT_FALSE(b.detector.frozen_features.has_value());
}

TEST(Checkpoint, Base64HandlesAllLengths) {
  Rng rng(23);
  for (std::size_t n : {0u, 1u, 2u, 3u, 4u, 7u, 64u}) {
    std::vector<double> values(n);
    for (double& v : values) v = rng.normal();
    const std::string text = detail::encode_doubles(values);
    EXPECT_EQ(detail::decode_doubles(text), values);
  }
}

TEST(FileDigest, StableAndContentSensitive) {
  const fs::path p1 = fs::temp_directory_path() / "appd_digest1.txt";
  const fs::path p2 = fs::temp_directory_path() / "appd_digest2.txt";
  std::ofstream(p1) << "abc";
  std::ofstream(p2) << "abd";
  EXPECT_EQ(file_digest(p1), file_digest(p1));
  EXPECT_NE(file_digest(p1), file_digest(p2));
  EXPECT_EQ(file_digest(p1).size(), 16u);
}

}  // namespace
