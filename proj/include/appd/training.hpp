#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "appd/autodiff.hpp"
#include "appd/detector.hpp"
#include "appd/events.hpp"
#include "appd/format.hpp"
#include "appd/generator.hpp"
#include "appd/rng.hpp"

namespace appd {

struct TrainConfig {
  int m0 = 1000;              // outer iterations
  int m1 = 5;                 // detector steps per outer iteration
  int n_gen = 32;             // generated minibatch
  int n_real = 32;            // real minibatch
  int fourier_features = 20;  // features drawn per iteration
  double lr_detector = 1e-3;
  double lr_generator = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double clip_norm = 0.0;     // 0 disables clipping
  std::uint64_t seed = 0;
  // model architecture
  int noise_dim = 2;                       // q
  int feature_dim = 2;                     // r
  std::vector<int> spectrum_hidden{32, 32};
  int gen_hidden = 32;                     // p
  int max_events = 0;                      // 0: derived from the data

  void check() const {
    if (m0 < 0 || m1 < 1 || n_gen < 1 || n_real < 1 || fourier_features < 1) {
      throw std::invalid_argument("train config: counts must be positive");
    }
    if (lr_detector < 0.0 || lr_generator < 0.0) {
      throw std::invalid_argument("train config: learning rates must be non-negative");
    }
  }
};

inline nlohmann::json train_config_to_json(const TrainConfig& c) {
  return nlohmann::json{{"m0", c.m0},
                        {"m1", c.m1},
                        {"n_gen", c.n_gen},
                        {"n_real", c.n_real},
                        {"fourier_features", c.fourier_features},
                        {"lr_detector", c.lr_detector},
                        {"lr_generator", c.lr_generator},
                        {"adam_beta1", c.adam_beta1},
                        {"adam_beta2", c.adam_beta2},
                        {"adam_eps", c.adam_eps},
                        {"clip_norm", c.clip_norm},
                        {"seed", c.seed},
                        {"noise_dim", c.noise_dim},
                        {"feature_dim", c.feature_dim},
                        {"spectrum_hidden", c.spectrum_hidden},
                        {"gen_hidden", c.gen_hidden},
                        {"max_events", c.max_events}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("m0", c.m0);
  get("m1", c.m1);
  get("n_gen", c.n_gen);
  get("n_real", c.n_real);
  get("fourier_features", c.fourier_features);
  get("lr_detector", c.lr_detector);
  get("lr_generator", c.lr_generator);
  get("adam_beta1", c.adam_beta1);
  get("adam_beta2", c.adam_beta2);
  get("adam_eps", c.adam_eps);
  get("clip_norm", c.clip_norm);
  get("seed", c.seed);
  get("noise_dim", c.noise_dim);
  get("feature_dim", c.feature_dim);
  get("spectrum_hidden", c.spectrum_hidden);
  get("gen_hidden", c.gen_hidden);
  get("max_events", c.max_events);
  return c;
}

struct TrainRecord {
  int iteration = 0;
  double objective = 0.0;
  double real_mean = 0.0;
  double gen_mean = 0.0;
  double grad_norm_theta = 0.0;
  double grad_norm_phi = 0.0;
};

struct TrainHistory {
  std::vector<TrainRecord> records;

  void write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "iteration,J,real_mean,gen_mean,grad_norm_theta,grad_norm_phi\n";
    for (const TrainRecord& r : records) {
      out << r.iteration << ',' << format_double(r.objective) << ','
          << format_double(r.real_mean) << ',' << format_double(r.gen_mean) << ','
          << format_double(r.grad_norm_theta) << ',' << format_double(r.grad_norm_phi)
          << '\n';
    }
  }
};

struct TrainResult {
  DetectorParams detector;
  GeneratorParams generator;
  TrainHistory history;
  bool aborted = false;
  std::string abort_reason;
};

// ---------------------------------------------------------------------------
// Parameter flattening.
// ---------------------------------------------------------------------------

/// Detector parameters as a flat vector. mu and alpha travel in log space so
/// gradient steps cannot leave the non-negative orthant.
inline ParamVector detector_to_params(const DetectorParams& det) {
  ParamVector p;
  p.layout.add("log_mu", 1);
  p.layout.add("log_alpha", 1);
  p.layout.add("projection", det.projection.w.size());
  p.layout.add("spectrum", det.spectrum.weights.size());
  p.values.reserve(p.layout.total);
  p.values.push_back(std::log(det.mu));
  p.values.push_back(std::log(det.alpha));
  p.values.insert(p.values.end(), det.projection.w.begin(), det.projection.w.end());
  p.values.insert(p.values.end(), det.spectrum.weights.begin(),
                  det.spectrum.weights.end());
  return p;
}

inline DetectorParams params_to_detector(const ParamVector& p, const DetectorParams& proto) {
  DetectorParams det = proto;
  det.mu = std::exp(p.values[0]);
  det.alpha = std::exp(p.values[1]);
  auto w = p.segment("projection");
  det.projection.w.assign(w.begin(), w.end());
  auto s = p.segment("spectrum");
  det.spectrum.weights.assign(s.begin(), s.end());
  return det;
}

inline ParamVector generator_to_params(const GeneratorParams& gen) {
  ParamVector p;
  p.layout.add("lstm", gen.lstm_param_count());
  p.layout.add("head", gen.head().param_count());
  p.values = gen.weights;
  return p;
}

inline GeneratorParams params_to_generator(const ParamVector& p, const GeneratorParams& proto) {
  GeneratorParams gen = proto;
  gen.weights = p.values;
  return gen;
}

// ---------------------------------------------------------------------------
// Differentiable losses.
// ---------------------------------------------------------------------------

namespace detail {

template <class S>
std::vector<S> to_scalars(std::span<const double> values) {
  return std::vector<S>(values.begin(), values.end());
}

}  // namespace detail

/// Frequency vectors as taped values: the stored noise pushed through the
/// spectrum network, so detector gradients reach the spectrum weights.
inline std::vector<ad::Var> spectrum_frequencies(std::span<const ad::Var> spectrum_w,
                                                 const MlpSpec& arch,
                                                 const FourierFeatureSet& fs) {
  std::vector<ad::Var> omegas;
  omegas.reserve(static_cast<std::size_t>(fs.count()) * arch.output_dim());
  for (int k = 0; k < fs.count(); ++k) {
    std::vector<ad::Var> zeta = detail::to_scalars<ad::Var>(fs.zeta(k));
    std::vector<ad::Var> omega = mlp_apply<ad::Var>(arch, spectrum_w, zeta);
    omegas.insert(omegas.end(), omega.begin(), omega.end());
  }
  return omegas;
}

/// View over flattened detector parameters with prebuilt frequencies.
inline DetectorView<ad::Var> detector_var_view(std::span<const ad::Var> theta,
                                               const DetectorParams& proto,
                                               std::span<const ad::Var> omegas,
                                               const FourierFeatureSet& fs) {
  return DetectorView<ad::Var>{exp(theta[0]),
                               exp(theta[1]),
                               theta.subspan(2, proto.projection.w.size()),
                               omegas,
                               fs.phases,
                               proto.feature_space_dim(),
                               proto.mark_dim(),
                               fs.count()};
}

/// Sequence log-likelihood as a function of the flattened detector
/// parameters; frequencies are recomputed from the stored noise so the
/// gradient flows through the spectrum network.
inline ad::Var detector_sequence_loss(std::span<const ad::Var> theta,
                                      const DetectorParams& proto,
                                      const FlatSequence& seq,
                                      const FourierFeatureSet& fs) {
  using ad::Var;
  std::vector<Var> omegas =
      spectrum_frequencies(theta.subspan(2 + proto.projection.w.size()),
                           proto.spectrum.arch, fs);
  std::vector<Var> times = detail::to_scalars<Var>(seq.times);
  std::vector<Var> marks = detail::to_scalars<Var>(seq.marks);
  SequenceView<Var> sv{times, marks, seq.d, seq.horizon};
  return log_likelihood_core(sv, detector_var_view(theta, proto, omegas, fs));
}

/// Log-likelihood of a replayed generated sequence as a function of the
/// flattened generator parameters; the detector is held fixed.
inline ad::Var generator_sequence_loss(std::span<const ad::Var> phi,
                                       const GeneratorParams& proto,
                                       const DetectorParams& det,
                                       const FourierFeatureSet& fs,
                                       std::span<const double> noise, double horizon) {
  using ad::Var;
  GeneratorView<Var> gv{phi.first(proto.lstm_param_count()),
                        phi.subspan(proto.lstm_param_count()), proto.hidden,
                        proto.mark_dim};
  std::vector<GenEvent<Var>> events = replay_generation(gv, noise);

  const int d = proto.mark_dim;
  std::vector<Var> times, marks;
  times.reserve(events.size());
  marks.reserve(events.size() * d);
  for (const auto& e : events) {
    times.push_back(e.t);
    for (const Var& m : e.mark) marks.push_back(m);
  }
  std::vector<Var> w = detail::to_scalars<Var>(det.projection.w);
  std::vector<Var> omegas = detail::to_scalars<Var>(fs.omegas);
  SequenceView<Var> sv{times, marks, d, horizon};
  DetectorView<Var> dv{Var(det.mu),         Var(det.alpha), w, omegas,
                       fs.phases,           det.feature_space_dim(),
                       d,                   fs.count()};
  return log_likelihood_core(sv, dv);
}

/// Minimax objective estimate: mean log-likelihood over the real batch minus
/// the mean over the generated batch.
inline double objective(std::span<const Sequence> real_batch,
                        std::span<const Sequence> gen_batch,
                        const DetectorParams& det, const FourierFeatureSet& fs) {
  if (real_batch.empty() || gen_batch.empty()) {
    throw std::invalid_argument("objective: batches must be non-empty");
  }
  double real_mean = 0.0;
  for (const Sequence& s : real_batch) real_mean += log_likelihood(s, det, fs);
  real_mean /= static_cast<double>(real_batch.size());
  double gen_mean = 0.0;
  for (const Sequence& s : gen_batch) gen_mean += log_likelihood(s, det, fs);
  gen_mean /= static_cast<double>(gen_batch.size());
  return real_mean - gen_mean;
}

// ---------------------------------------------------------------------------
// Optimizer.
// ---------------------------------------------------------------------------

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;

  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

/// One adaptive-moment update. direction = +1 ascends, -1 descends.
inline void adam_update(std::vector<double>& params, std::span<const double> grad,
                        AdamState& state, double lr, double beta1, double beta2,
                        double eps, double direction) {
  ++state.step;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grad[i];
    state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * grad[i] * grad[i];
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    params[i] += direction * lr * mhat / (std::sqrt(vhat) + eps);
  }
}

inline double l2_norm(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

inline void clip_to_norm(std::vector<double>& v, double max_norm) {
  if (max_norm <= 0.0) return;
  const double n = l2_norm(v);
  if (n > max_norm) {
    const double s = max_norm / n;
    for (double& x : v) x *= s;
  }
}

// ---------------------------------------------------------------------------
// Adversarial training loop.
// ---------------------------------------------------------------------------

struct InitialParams {
  DetectorParams detector;
  GeneratorParams generator;
};

/// Sampling guard for untrained generators: ten times the expected event
/// count, hard-capped.
inline int resolve_max_events(const TrainConfig& config, double mean_count) {
  if (config.max_events > 0) return config.max_events;
  return std::min(10000, 10 * static_cast<int>(std::ceil(std::max(1.0, mean_count))));
}

inline double mean_event_count(std::span<const Sequence> data) {
  double total = 0.0;
  for (const Sequence& s : data) total += static_cast<double>(s.size());
  return data.empty() ? 0.0 : total / static_cast<double>(data.size());
}

namespace detail {

inline std::vector<std::size_t> draw_batch(std::size_t n, std::size_t batch, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (batch >= n) return idx;
  // Partial Fisher-Yates: the first `batch` entries become the sample.
  for (std::size_t i = 0; i < batch; ++i) {
    std::size_t j = i + rng.index(n - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(batch);
  return idx;
}

struct BatchStats {
  double mean = 0.0;
  double grad_norm = 0.0;
  bool finite = true;
};

}  // namespace detail

/// Alternating stochastic optimization of the minimax objective: one
/// generator descent step, then m1 detector ascent steps, each on freshly
/// drawn minibatches, generated sequences and Fourier features.
inline TrainResult train(const std::vector<Sequence>& data, const TrainConfig& config,
                         const std::optional<InitialParams>& start = std::nullopt) {
  config.check();
  if (data.empty()) throw ValidationError("train: dataset is empty");
  const int d = data.front().mark_dim();
  const double horizon = data.front().horizon;
  double total_events = 0.0;
  for (const Sequence& s : data) {
    if (s.mark_dim() != d) {
      throw ValidationError("train: sequences disagree on mark dimension");
    }
    if (std::abs(s.horizon - horizon) > 1e-9 * std::max(1.0, horizon)) {
      throw ValidationError("train: sequences must share one horizon");
    }
    total_events += static_cast<double>(s.size());
  }

  Rng master(config.seed);
  TrainResult result;
  if (start.has_value()) {
    result.detector = start->detector;
    result.generator = start->generator;
  } else {
    Rng det_rng = master.child(0);
    result.detector.mu = std::max(
        total_events / (static_cast<double>(data.size()) * horizon *
                        detail::mark_volume(d)),
        1e-3);
    result.detector.alpha = 0.1;
    result.detector.projection =
        KernelProjection::random(config.feature_dim, d + 1, det_rng);
    result.detector.spectrum = SpectrumNet::make(config.noise_dim, config.feature_dim,
                                                 config.spectrum_hidden, det_rng);
    Rng gen_rng = master.child(1);
    const double mean_dt =
        total_events > 0.0 ? static_cast<double>(data.size()) * horizon / total_events
                           : horizon;
    result.generator = GeneratorParams::make(config.gen_hidden, d, gen_rng, mean_dt);
  }

  const double mean_count = total_events / static_cast<double>(data.size());
  const int max_events = resolve_max_events(config, mean_count);

  ParamVector theta = detector_to_params(result.detector);
  ParamVector phi = generator_to_params(result.generator);
  AdamState theta_opt(theta.size());
  AdamState phi_opt(phi.size());

  std::vector<FlatSequence> flat;
  flat.reserve(data.size());
  for (const Sequence& s : data) flat.emplace_back(s);

  ad::Tape tape;
  std::vector<double> adjoints;

  // Batch objective and its theta gradient on one tape, so the spectrum
  // frequencies are built once and shared by every sequence in the batch.
  auto detector_pass = [&](std::span<const std::size_t> real_idx,
                           std::span<const GeneratedSequence> gen_batch,
                           const FourierFeatureSet& fs, std::vector<double>& grad_out,
                           double& real_mean, double& gen_mean) -> bool {
    grad_out.assign(theta.size(), 0.0);
    real_mean = gen_mean = 0.0;
    tape.clear();
    std::vector<ad::Var> vars = tape.inputs(theta.values);
    std::vector<ad::Var> omegas = spectrum_frequencies(
        std::span<const ad::Var>(vars).subspan(2 + result.detector.projection.w.size()),
        result.detector.spectrum.arch, fs);
    DetectorView<ad::Var> dv = detector_var_view(vars, result.detector, omegas, fs);

    const ad::Var wr(1.0 / static_cast<double>(real_idx.size()));
    const ad::Var wg(1.0 / static_cast<double>(gen_batch.size()));
    ad::Var objective_var(0.0);
    const int d = result.detector.mark_dim();
    auto sequence_ll = [&](const FlatSequence& fseq) {
      std::vector<ad::Var> times = detail::to_scalars<ad::Var>(fseq.times);
      std::vector<ad::Var> marks = detail::to_scalars<ad::Var>(fseq.marks);
      SequenceView<ad::Var> sv{times, marks, fseq.d, fseq.horizon};
      return log_likelihood_core(sv, dv);
    };
    for (std::size_t idx : real_idx) {
      ad::Var ll = sequence_ll(flat[idx]);
      real_mean += wr.value() * ll.value();
      objective_var += wr * ll;
    }
    for (const GeneratedSequence& g : gen_batch) {
      FlatSequence fseq(g.seq, d);
      ad::Var ll = sequence_ll(fseq);
      gen_mean += wg.value() * ll.value();
      objective_var -= wg * ll;
    }
    if (!std::isfinite(objective_var.value())) return false;
    tape.gradient(objective_var, adjoints);
    for (std::size_t i = 0; i < vars.size(); ++i) {
      grad_out[i] = adjoints[vars[i].index()];
    }
    return true;
  };

  // Gradient of the generated-batch mean log-likelihood in phi. The real
  // term of the objective is constant in phi, so the objective's phi
  // gradient is the negation of this.
  auto generator_pass = [&](std::span<const GeneratedSequence> gen_batch,
                            const FourierFeatureSet& fs,
                            std::vector<double>& grad_out) -> bool {
    grad_out.assign(phi.size(), 0.0);
    const double wg = 1.0 / static_cast<double>(gen_batch.size());
    for (const GeneratedSequence& g : gen_batch) {
      if (g.seq.empty()) continue;
      tape.clear();
      std::vector<ad::Var> vars = tape.inputs(phi.values);
      ad::Var loss = generator_sequence_loss(vars, result.generator, result.detector,
                                             fs, g.noise, horizon);
      if (!std::isfinite(loss.value())) return false;
      tape.gradient(loss, adjoints);
      for (std::size_t i = 0; i < vars.size(); ++i) {
        grad_out[i] += wg * adjoints[vars[i].index()];
      }
    }
    return true;
  };

  auto make_gen_batch = [&](Rng& rng) {
    std::vector<GeneratedSequence> batch;
    batch.reserve(config.n_gen);
    for (int i = 0; i < config.n_gen; ++i) {
      Rng child = rng.child(i);
      batch.push_back(generate(result.generator, horizon, child, max_events));
    }
    return batch;
  };

  std::vector<double> grad_theta, grad_phi;
  for (int iter = 1; iter <= config.m0; ++iter) {
    Rng iter_rng = master.child(1000 + static_cast<std::uint64_t>(iter));
    Rng pick_rng = iter_rng.child(0);
    Rng gen_rng = iter_rng.child(1);
    Rng feat_rng = iter_rng.child(2);

    auto real_idx = detail::draw_batch(data.size(), config.n_real, pick_rng);
    auto gen_batch = make_gen_batch(gen_rng);
    FourierFeatureSet fs =
        sample_features(result.detector.spectrum, config.fourier_features, feat_rng);

    TrainRecord rec;
    rec.iteration = iter;

    // Generator update: descend the objective, which touches phi only
    // through the generated term.
    if (!generator_pass(gen_batch, fs, grad_phi)) {
      result.aborted = true;
      result.abort_reason = "non-finite generator loss at iteration " + std::to_string(iter);
      break;
    }
    for (double& g : grad_phi) g = -g;  // d(objective)/d(phi)
    clip_to_norm(grad_phi, config.clip_norm);
    rec.grad_norm_phi = l2_norm(grad_phi);
    adam_update(phi.values, grad_phi, phi_opt, config.lr_generator, config.adam_beta1,
                config.adam_beta2, config.adam_eps, -1.0);
    result.generator = params_to_generator(phi, result.generator);

    {
      double real_mean = 0.0, gen_mean = 0.0;
      for (std::size_t idx : real_idx) {
        real_mean += log_likelihood_core(flat[idx].view(), make_view(result.detector, fs));
      }
      real_mean /= static_cast<double>(real_idx.size());
      for (const GeneratedSequence& g : gen_batch) {
        gen_mean += log_likelihood(g.seq, result.detector, fs);
      }
      gen_mean /= static_cast<double>(gen_batch.size());
      rec.real_mean = real_mean;
      rec.gen_mean = gen_mean;
      rec.objective = real_mean - gen_mean;
    }
    if (!std::isfinite(rec.objective)) {
      result.history.records.push_back(rec);
      result.aborted = true;
      result.abort_reason = "non-finite objective at iteration " + std::to_string(iter);
      break;
    }

    // Detector updates: ascend on fresh batches and fresh features.
    bool ok = true;
    for (int inner = 1; inner <= config.m1; ++inner) {
      Rng inner_rng = iter_rng.child(10 + static_cast<std::uint64_t>(inner));
      Rng ipick = inner_rng.child(0);
      Rng igen = inner_rng.child(1);
      Rng ifeat = inner_rng.child(2);
      auto inner_idx = detail::draw_batch(data.size(), config.n_real, ipick);
      auto inner_gen = make_gen_batch(igen);
      FourierFeatureSet ifs = sample_features(result.detector.spectrum,
                                              config.fourier_features, ifeat);
      double rm = 0.0, gm = 0.0;
      if (!detector_pass(inner_idx, inner_gen, ifs, grad_theta, rm, gm)) {
        result.aborted = true;
        result.abort_reason =
            "non-finite detector loss at iteration " + std::to_string(iter);
        ok = false;
        break;
      }
      clip_to_norm(grad_theta, config.clip_norm);
      rec.grad_norm_theta = l2_norm(grad_theta);
      adam_update(theta.values, grad_theta, theta_opt, config.lr_detector,
                  config.adam_beta1, config.adam_beta2, config.adam_eps, +1.0);
      result.detector = params_to_detector(theta, result.detector);
    }
    result.history.records.push_back(rec);
    if (!ok) break;
  }
  return result;
}

}  // namespace appd
