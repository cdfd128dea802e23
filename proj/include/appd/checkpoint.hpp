#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "appd/detection.hpp"
#include "appd/detector.hpp"
#include "appd/generator.hpp"
#include "appd/training.hpp"

namespace appd {

class CheckpointError : public std::runtime_error {
 public:
  explicit CheckpointError(const std::string& what) : std::runtime_error(what) {}
};

// ---------------------------------------------------------------------------
// base64 of little-endian IEEE-754 doubles: human-inspectable JSON envelope,
// bit-exact numerics.
// ---------------------------------------------------------------------------

namespace detail {

inline constexpr char kB64Alphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

inline std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 3 <= bytes.size(); i += 3) {
    const std::uint32_t b = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out.push_back(kB64Alphabet[(b >> 18) & 63]);
    out.push_back(kB64Alphabet[(b >> 12) & 63]);
    out.push_back(kB64Alphabet[(b >> 6) & 63]);
    out.push_back(kB64Alphabet[b & 63]);
  }
  const std::size_t rem = bytes.size() - i;
  if (rem == 1) {
    const std::uint32_t b = bytes[i] << 16;
    out.push_back(kB64Alphabet[(b >> 18) & 63]);
    out.push_back(kB64Alphabet[(b >> 12) & 63]);
    out.push_back('=');
    out.push_back('=');
  } else if (rem == 2) {
    const std::uint32_t b = (bytes[i] << 16) | (bytes[i + 1] << 8);
    out.push_back(kB64Alphabet[(b >> 18) & 63]);
    out.push_back(kB64Alphabet[(b >> 12) & 63]);
    out.push_back(kB64Alphabet[(b >> 6) & 63]);
    out.push_back('=');
  }
  return out;
}

inline std::vector<std::uint8_t> base64_decode(const std::string& text) {
  auto value_of = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  std::uint32_t buf = 0;
  int bits = 0;
  for (char c : text) {
    if (c == '=') break;
    const int v = value_of(c);
    if (v < 0) throw CheckpointError("invalid base64 payload");
    buf = (buf << 6) | static_cast<std::uint32_t>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<std::uint8_t>((buf >> bits) & 0xff));
    }
  }
  return out;
}

inline std::string encode_doubles(std::span<const double> values) {
  std::vector<std::uint8_t> bytes(values.size() * sizeof(double));
  static_assert(std::endian::native == std::endian::little,
                "checkpoint encoding assumes a little-endian host");
  std::memcpy(bytes.data(), values.data(), bytes.size());
  return base64_encode(bytes);
}

inline std::vector<double> decode_doubles(const std::string& text) {
  std::vector<std::uint8_t> bytes = base64_decode(text);
  if (bytes.size() % sizeof(double) != 0) {
    throw CheckpointError("encoded array has a truncated payload");
  }
  std::vector<double> values(bytes.size() / sizeof(double));
  std::memcpy(values.data(), bytes.data(), bytes.size());
  return values;
}

}  // namespace detail

/// FNV-1a digest of a file, used to tie checkpoints to the dataset manifest
/// they were trained from.
inline std::string file_digest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  char chunk[4096];
  while (in.read(chunk, sizeof(chunk)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      hash ^= static_cast<std::uint8_t>(chunk[i]);
      hash *= 0x100000001b3ULL;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
  return std::string(buf);
}

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  int version = kCheckpointVersion;
  DetectorParams detector;
  GeneratorParams generator;
  std::optional<ThresholdCurve> threshold;
  TrainConfig config;
  double horizon = 0.0;  // training-data horizon, used when sampling
  std::string dataset_digest;
};

inline nlohmann::json checkpoint_to_json(const Checkpoint& ckpt) {
  nlohmann::json det{
      {"mu", detail::encode_doubles(std::span<const double>(&ckpt.detector.mu, 1))},
      {"alpha", detail::encode_doubles(std::span<const double>(&ckpt.detector.alpha, 1))},
      {"projection",
       {{"rows", ckpt.detector.projection.rows},
        {"cols", ckpt.detector.projection.cols},
        {"data", detail::encode_doubles(ckpt.detector.projection.w)}}},
      {"spectrum",
       {{"sizes", ckpt.detector.spectrum.arch.sizes},
        {"weights", detail::encode_doubles(ckpt.detector.spectrum.weights)}}}};
  if (ckpt.detector.frozen_features.has_value()) {
    const FourierFeatureSet& fs = *ckpt.detector.frozen_features;
    det["frozen_features"] = {{"count", fs.count()},
                              {"omega_dim", fs.omega_dim},
                              {"noise_dim", fs.noise_dim},
                              {"omegas", detail::encode_doubles(fs.omegas)},
                              {"phases", detail::encode_doubles(fs.phases)},
                              {"zetas", detail::encode_doubles(fs.zetas)}};
  } else {
    det["frozen_features"] = nullptr;
  }

  nlohmann::json j{{"version", ckpt.version},
                   {"detector", std::move(det)},
                   {"generator",
                    {{"hidden", ckpt.generator.hidden},
                     {"mark_dim", ckpt.generator.mark_dim},
                     {"weights", detail::encode_doubles(ckpt.generator.weights)}}},
                   {"config", train_config_to_json(ckpt.config)},
                   {"horizon", detail::encode_doubles(std::span<const double>(&ckpt.horizon, 1))},
                   {"dataset_digest", ckpt.dataset_digest}};
  if (ckpt.threshold.has_value()) {
    j["threshold"] = {{"scale", ckpt.threshold->scale},
                      {"n_gen", ckpt.threshold->n_gen},
                      {"seed", ckpt.threshold->seed},
                      {"values", detail::encode_doubles(ckpt.threshold->values)}};
  } else {
    j["threshold"] = nullptr;
  }
  return j;
}

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  Checkpoint ckpt;
  try {
    ckpt.version = j.at("version").get<int>();
    if (ckpt.version != kCheckpointVersion) {
      throw CheckpointError("unsupported checkpoint version " +
                            std::to_string(ckpt.version));
    }
    const auto& det = j.at("detector");
    ckpt.detector.mu = detail::decode_doubles(det.at("mu").get<std::string>()).at(0);
    ckpt.detector.alpha = detail::decode_doubles(det.at("alpha").get<std::string>()).at(0);
    const auto& proj = det.at("projection");
    ckpt.detector.projection.rows = proj.at("rows").get<int>();
    ckpt.detector.projection.cols = proj.at("cols").get<int>();
    ckpt.detector.projection.w = detail::decode_doubles(proj.at("data").get<std::string>());
    const auto& spec = det.at("spectrum");
    ckpt.detector.spectrum.arch.sizes = spec.at("sizes").get<std::vector<int>>();
    ckpt.detector.spectrum.weights =
        detail::decode_doubles(spec.at("weights").get<std::string>());
    if (det.contains("frozen_features") && !det.at("frozen_features").is_null()) {
      const auto& ff = det.at("frozen_features");
      FourierFeatureSet fs;
      fs.omega_dim = ff.at("omega_dim").get<int>();
      fs.noise_dim = ff.at("noise_dim").get<int>();
      fs.omegas = detail::decode_doubles(ff.at("omegas").get<std::string>());
      fs.phases = detail::decode_doubles(ff.at("phases").get<std::string>());
      fs.zetas = detail::decode_doubles(ff.at("zetas").get<std::string>());
      ckpt.detector.frozen_features = std::move(fs);
    }
    if (!j.contains("generator") || j.at("generator").is_null()) {
      throw CheckpointError("checkpoint has no generator parameters");
    }
    const auto& gen = j.at("generator");
    ckpt.generator.hidden = gen.at("hidden").get<int>();
    ckpt.generator.mark_dim = gen.at("mark_dim").get<int>();
    ckpt.generator.weights = detail::decode_doubles(gen.at("weights").get<std::string>());
    if (ckpt.generator.weights.size() != ckpt.generator.param_count()) {
      throw CheckpointError("generator weight count does not match its shape");
    }
    ckpt.config = train_config_from_json(j.at("config"));
    ckpt.horizon = detail::decode_doubles(j.at("horizon").get<std::string>()).at(0);
    ckpt.dataset_digest = j.value("dataset_digest", std::string{});
    if (j.contains("threshold") && !j.at("threshold").is_null()) {
      const auto& th = j.at("threshold");
      ThresholdCurve curve;
      curve.scale = th.at("scale").get<double>();
      curve.n_gen = th.at("n_gen").get<int>();
      curve.seed = th.at("seed").get<std::uint64_t>();
      curve.values = detail::decode_doubles(th.at("values").get<std::string>());
      ckpt.threshold = std::move(curve);
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  }
  return ckpt;
}

inline void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << checkpoint_to_json(ckpt).dump(2) << '\n';
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("unparsable checkpoint: ") + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace appd
