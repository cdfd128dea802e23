#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "appd/events.hpp"
#include "appd/nn.hpp"
#include "appd/rng.hpp"

namespace appd {

/// Stochastic recurrent sequence generator: an LSTM cell whose Gaussian
/// read-out head parameterizes the next inter-arrival time and mark. Times
/// are squashed through softplus (plus a small floor) and marks through a
/// 2pi-scaled logistic so every sample is a valid event and the whole path
/// stays differentiable under reparameterized noise.
struct GeneratorParams {
  int hidden = 32;    // p
  int mark_dim = 0;   // d
  std::vector<double> weights;  // [lstm cell | gaussian head]

  LstmSpec cell() const { return LstmSpec{mark_dim + 1, hidden}; }
  MlpSpec head() const { return MlpSpec{{hidden, 2 * (mark_dim + 1)}}; }

  std::size_t lstm_param_count() const { return cell().param_count(); }
  std::size_t param_count() const {
    return cell().param_count() + head().param_count();
  }

  std::span<const double> lstm_weights() const {
    return std::span<const double>(weights).first(lstm_param_count());
  }
  std::span<const double> head_weights() const {
    return std::span<const double>(weights).subspan(lstm_param_count());
  }

  static double inv_softplus(double y) { return std::log(std::expm1(y)); }

  /// target_dt > 0 biases the head toward that mean inter-arrival time with
  /// an exponential-like spread, i.e. near a homogeneous fit of the data.
  static GeneratorParams make(int hidden, int mark_dim, Rng& rng,
                              double target_dt = 0.0) {
    GeneratorParams g;
    g.hidden = hidden;
    g.mark_dim = mark_dim;
    g.weights.resize(g.param_count());
    std::span<double> w(g.weights);
    lstm_init(g.cell(), w.first(g.lstm_param_count()), rng);
    mlp_init(g.head(), w.subspan(g.lstm_param_count()), rng);
    if (target_dt > 0.0) {
      const std::size_t head_w_count =
          static_cast<std::size_t>(2 * (mark_dim + 1)) * hidden;
      std::span<double> bias = w.subspan(g.lstm_param_count() + head_w_count);
      const double mean_raw = inv_softplus(target_dt);
      bias[0] = mean_raw;
      // Match the spread as well: scale by the local softplus slope.
      bias[mark_dim + 1] = inv_softplus(target_dt / logistic(mean_raw));
    }
    return g;
  }
};

template <class S>
struct GeneratorView {
  std::span<const S> lstm_w;
  std::span<const S> head_w;
  int hidden = 0;
  int mark_dim = 0;
};

inline GeneratorView<double> make_view(const GeneratorParams& params) {
  return GeneratorView<double>{params.lstm_weights(), params.head_weights(),
                               params.hidden, params.mark_dim};
}

template <class S>
struct GenStateT {
  std::vector<S> h;
  std::vector<S> c;
  S t_prev = S(0.0);

  explicit GenStateT(int hidden) : h(hidden, S(0.0)), c(hidden, S(0.0)) {}
};

using GenState = GenStateT<double>;

template <class S>
struct GenEvent {
  S t;
  S dt;
  std::vector<S> mark;
};

inline constexpr double kMinInterArrival = 1e-6;

/// One generation step: read the Gaussian head off the current hidden state,
/// transform the noise block (d+1 standard normals), then feed the realized
/// event back into the cell.
template <class S>
GenEvent<S> generator_step(const GeneratorView<S>& gen, GenStateT<S>& state,
                           std::span<const double> noise) {
  const int d = gen.mark_dim;
  if (static_cast<int>(noise.size()) != d + 1) {
    throw std::invalid_argument("generator_step: noise must have d+1 entries");
  }
  const MlpSpec head{{gen.hidden, 2 * (d + 1)}};
  std::vector<S> out = mlp_apply<S>(head, gen.head_w, state.h);

  GenEvent<S> ev;
  ev.mark.resize(d);
  {
    S sigma = softplus(out[d + 1]);
    S raw = out[0] + sigma * S(noise[0]);
    ev.dt = softplus(raw) + S(kMinInterArrival);
    ev.t = state.t_prev + ev.dt;
  }
  for (int c = 0; c < d; ++c) {
    S sigma = softplus(out[d + 2 + c]);
    S raw = out[1 + c] + sigma * S(noise[1 + c]);
    ev.mark[c] = S(kTwoPi) * logistic(raw);
  }

  std::vector<S> x;
  x.reserve(d + 1);
  x.push_back(ev.t);
  for (const S& m : ev.mark) x.push_back(m);
  lstm_step<S>(LstmSpec{d + 1, gen.hidden}, gen.lstm_w, x, state.h, state.c);
  state.t_prev = ev.t;
  return ev;
}

struct GeneratedSequence {
  Sequence seq;
  std::vector<double> noise;  // accepted steps x (d+1), replay input
  bool truncated = false;
};

/// Rolls the generator forward from the zero state until the next event
/// would land at or beyond the horizon, or max_events is hit.
inline GeneratedSequence generate(const GeneratorParams& params, double horizon,
                                  Rng& rng, int max_events) {
  if (!(horizon > 0.0) || max_events < 1) {
    throw std::invalid_argument("generate: need horizon > 0 and max_events >= 1");
  }
  GeneratedSequence out;
  out.seq.horizon = horizon;
  GeneratorView<double> view = make_view(params);
  GenState state(params.hidden);
  const int d = params.mark_dim;
  std::vector<double> block(d + 1);
  while (true) {
    for (double& b : block) b = rng.normal();
    GenEvent<double> ev = generator_step(view, state, block);
    if (ev.t >= horizon) break;
    out.seq.events.push_back(Event{ev.t, ev.mark});
    out.noise.insert(out.noise.end(), block.begin(), block.end());
    if (static_cast<int>(out.seq.events.size()) >= max_events) {
      out.truncated = true;
      break;
    }
  }
  return out;
}

/// Re-runs the generation path on recorded noise; with S = ad::Var this is
/// the differentiable branch of the sampled sequence.
template <class S>
std::vector<GenEvent<S>> replay_generation(const GeneratorView<S>& gen,
                                           std::span<const double> noise) {
  const int block = gen.mark_dim + 1;
  if (noise.size() % block != 0) {
    throw std::invalid_argument("replay_generation: noise length mismatch");
  }
  const std::size_t steps = noise.size() / block;
  std::vector<GenEvent<S>> events;
  events.reserve(steps);
  GenStateT<S> state(gen.hidden);
  for (std::size_t i = 0; i < steps; ++i) {
    events.push_back(generator_step(gen, state, noise.subspan(i * block, block)));
  }
  return events;
}

}  // namespace appd
