#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "appd/events.hpp"
#include "appd/parallel.hpp"
#include "appd/rng.hpp"

namespace appd {

/// Exponentially self-exciting temporal process: intensity
/// mu + sum_i alpha * exp(-beta (t - t_i)). Requires alpha < beta so the
/// branching ratio stays below one.
struct ExpHawkesSpec {
  double mu = 0.0;
  double alpha = 0.0;
  double beta = 1.0;
  double horizon = 0.0;
  /// Pre-window simulation span so the process is stationary at time zero;
  /// negative selects an automatic span that damps the cold-start transient
  /// to a negligible level.
  double burn_in = -1.0;

  double branching_ratio() const { return beta > 0.0 ? alpha / beta : INFINITY; }
  double stationary_rate() const { return mu / (1.0 - branching_ratio()); }
  double resolved_burn_in() const {
    if (burn_in >= 0.0) return burn_in;
    if (alpha <= 0.0) return 0.0;
    // The mean-intensity transient decays like exp(-(beta - alpha) t).
    return 10.0 / (beta - alpha);
  }

  void check() const {
    if (!(mu > 0.0)) throw std::invalid_argument("hawkes: mu must be positive");
    if (alpha < 0.0) throw std::invalid_argument("hawkes: alpha must be >= 0");
    if (!(alpha < beta)) {
      throw std::invalid_argument("hawkes: need alpha < beta for stationarity");
    }
    if (!(horizon > 0.0)) throw std::invalid_argument("hawkes: horizon must be positive");
  }
};

/// Per-candidate record of the thinning loop, for verification.
struct ThinningTrace {
  struct Candidate {
    double time;
    double lambda;  // intensity at the candidate, before any accept jump
    double bound;   // dominating rate in force when it was proposed
    bool accepted;
  };
  std::vector<Candidate> candidates;
};

/// Exact simulation by thinning: between events the excitation only decays,
/// so the intensity at the current position dominates everything later.
inline Sequence simulate_hawkes(const ExpHawkesSpec& spec, Rng& rng,
                                ThinningTrace* trace = nullptr) {
  spec.check();
  const double start = -spec.resolved_burn_in();
  double s = start;
  double excitation = 0.0;  // sum of alpha * exp(-beta (s - t_i)) at current s
  Sequence seq;
  seq.horizon = spec.horizon;
  while (true) {
    const double bound = spec.mu + excitation;
    const double wait = rng.exponential(bound);
    s += wait;
    if (s >= spec.horizon) break;
    excitation *= std::exp(-spec.beta * wait);
    const double lambda = spec.mu + excitation;
    const bool accept = rng.uniform() * bound <= lambda;
    if (trace != nullptr) {
      trace->candidates.push_back({s, lambda, bound, accept});
    }
    if (accept) {
      if (s >= 0.0) {
        seq.events.push_back(Event{s, {}});
      }
      excitation += spec.alpha;
    }
  }
  return seq;
}

inline Sequence simulate_poisson(double rate, double horizon, Rng& rng) {
  if (!(rate > 0.0)) throw std::invalid_argument("poisson: rate must be positive");
  Sequence seq;
  seq.horizon = horizon;
  double t = 0.0;
  while (true) {
    t += rng.exponential(rate);
    if (t >= horizon) break;
    seq.events.push_back(Event{t, {}});
  }
  return seq;
}

// ---------------------------------------------------------------------------
// Benchmark datasets: self-exciting "anomalous" sequences, optionally mixed
// with homogeneous "normal" traffic.
// ---------------------------------------------------------------------------

enum class DatasetKind { singleton, composite, mixed, mixed_composite };

inline const char* dataset_kind_name(DatasetKind k) {
  switch (k) {
    case DatasetKind::singleton: return "singleton";
    case DatasetKind::composite: return "composite";
    case DatasetKind::mixed: return "mixed";
    default: return "mixed-composite";
  }
}

inline DatasetKind parse_dataset_kind(const std::string& name) {
  if (name == "singleton") return DatasetKind::singleton;
  if (name == "composite") return DatasetKind::composite;
  if (name == "mixed") return DatasetKind::mixed;
  if (name == "mixed-composite") return DatasetKind::mixed_composite;
  throw std::invalid_argument("unknown dataset kind: " + name);
}

struct Dataset {
  std::vector<Sequence> sequences;
  nlohmann::json manifest;
};

namespace detail {

inline std::vector<ExpHawkesSpec> composite_strata(double horizon) {
  // beta = 1 with the nominal alpha = 1 would sit exactly at the
  // stationarity boundary; that stratum runs at alpha = 0.5 instead.
  std::vector<ExpHawkesSpec> strata;
  for (int beta = 1; beta <= 5; ++beta) {
    ExpHawkesSpec s;
    s.mu = 10.0;
    s.alpha = (beta == 1) ? 0.5 : 1.0;
    s.beta = beta;
    s.horizon = horizon;
    strata.push_back(s);
  }
  return strata;
}

inline double composite_horizon(double target_mean_length) {
  const auto strata = composite_strata(1.0);
  double mean_rate = 0.0;
  for (const auto& s : strata) mean_rate += s.stationary_rate();
  mean_rate /= static_cast<double>(strata.size());
  return target_mean_length / mean_rate;
}

}  // namespace detail

/// Horizon solved from the stationary count so singleton sequences average
/// 32 events.
inline double singleton_horizon() {
  ExpHawkesSpec s;
  s.mu = 10.0;
  s.alpha = 1.0;
  s.beta = 3.0;
  s.horizon = 1.0;
  return 32.0 / s.stationary_rate();
}

inline double composite_horizon() { return detail::composite_horizon(29.0); }

inline constexpr int kAnomalousPerDataset = 1000;
inline constexpr int kNormalsPerMixedDataset = 5000;
inline constexpr double kNormalRateLow = 5.0;
inline constexpr double kNormalRateHigh = 15.0;

/// Builds one of the benchmark datasets. Every sequence draws from its own
/// seed-derived stream, so generation order (or parallelism) cannot change
/// the result.
inline Dataset make_dataset(DatasetKind kind, std::uint64_t seed, int threads = 1) {
  Dataset ds;
  const Rng master(seed);

  const bool composite =
      kind == DatasetKind::composite || kind == DatasetKind::mixed_composite;
  const bool with_normals =
      kind == DatasetKind::mixed || kind == DatasetKind::mixed_composite;
  const double horizon = composite ? composite_horizon() : singleton_horizon();

  std::vector<ExpHawkesSpec> strata;
  if (composite) {
    strata = detail::composite_strata(horizon);
  } else {
    ExpHawkesSpec s;
    s.mu = 10.0;
    s.alpha = 1.0;
    s.beta = 3.0;
    s.horizon = horizon;
    strata.push_back(s);
  }

  struct Job {
    const ExpHawkesSpec* hawkes;  // null for a Poisson normal
  };
  std::vector<Job> jobs;
  nlohmann::json strata_json = nlohmann::json::array();
  const int per_stratum = kAnomalousPerDataset / static_cast<int>(strata.size());
  for (const auto& spec : strata) {
    for (int i = 0; i < per_stratum; ++i) jobs.push_back({&spec});
    strata_json.push_back({{"mu", spec.mu},
                           {"alpha", spec.alpha},
                           {"beta", spec.beta},
                           {"count", per_stratum},
                           {"burn_in", spec.resolved_burn_in()}});
  }
  if (with_normals) {
    for (int i = 0; i < kNormalsPerMixedDataset; ++i) jobs.push_back({nullptr});
  }

  ds.sequences.resize(jobs.size());
  parallel_for(jobs.size(), threads, [&](std::size_t i) {
    Rng rng = master.child(i);
    if (jobs[i].hawkes != nullptr) {
      Sequence seq = simulate_hawkes(*jobs[i].hawkes, rng);
      seq.label = Label::anomalous;
      ds.sequences[i] = std::move(seq);
    } else {
      const double rate = rng.uniform(kNormalRateLow, kNormalRateHigh);
      Sequence seq = simulate_poisson(rate, horizon, rng);
      seq.label = Label::normal;
      ds.sequences[i] = std::move(seq);
    }
  });

  ds.manifest = nlohmann::json{
      {"kind", dataset_kind_name(kind)},
      {"seed", seed},
      {"horizon", horizon},
      {"sequence_count", ds.sequences.size()},
      {"anomalous", strata_json},
      {"deviations", nlohmann::json::array()},
  };
  if (composite) {
    ds.manifest["deviations"].push_back(
        "beta=1 stratum uses alpha=0.5 to keep the branching ratio below 1");
  }
  if (with_normals) {
    ds.manifest["normals"] = {{"count", kNormalsPerMixedDataset},
                              {"rate_range", {kNormalRateLow, kNormalRateHigh}}};
  }
  return ds;
}

}  // namespace appd
