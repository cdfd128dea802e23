// appd — adversarial point-process detection pipeline.
//
// Subcommands: simulate | train | threshold | detect | evaluate.
// Exit codes: 0 ok, 2 usage, 3 data validation, 4 checkpoint state.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "appd/checkpoint.hpp"
#include "appd/detection.hpp"
#include "appd/evaluation.hpp"
#include "appd/events.hpp"
#include "appd/parallel.hpp"
#include "appd/simulate.hpp"
#include "appd/training.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitValidation = 3;
constexpr int kExitCheckpoint = 4;

std::uint64_t env_seed_fallback() {
  const char* env = std::getenv("APPD_SEED");
  if (env == nullptr) return 0;
  return std::strtoull(env, nullptr, 10);
}

struct SeedOption {
  std::uint64_t value = 0;
  bool given = false;

  std::uint64_t resolve(std::optional<std::uint64_t> secondary = std::nullopt) const {
    if (given) return value;
    if (secondary.has_value()) return *secondary;
    return env_seed_fallback();
  }
};

void add_seed_option(CLI::App* cmd, SeedOption& seed) {
  cmd->add_option("--seed", seed.value, "random seed (fallback: APPD_SEED, then 0)")
      ->each([&seed](const std::string&) { seed.given = true; });
}

fs::path sibling_manifest(const fs::path& data) {
  fs::path p = data;
  p.replace_extension(".manifest.json");
  return p;
}

std::string dataset_digest_for(const fs::path& data) {
  const fs::path manifest = sibling_manifest(data);
  return appd::file_digest(fs::exists(manifest) ? manifest : data);
}

/// One-class training data: anomalous-labeled sequences when the file has
/// labels, otherwise everything in it.
std::vector<appd::Sequence> training_subset(std::vector<appd::Sequence> all) {
  std::vector<appd::Sequence> anomalous;
  for (auto& s : all) {
    if (s.label == appd::Label::anomalous) anomalous.push_back(std::move(s));
  }
  return anomalous.empty() ? all : anomalous;
}

int cmd_simulate(const std::string& kind_name, const SeedOption& seed,
                 const fs::path& out_dir, int threads) {
  appd::DatasetKind kind;
  try {
    kind = appd::parse_dataset_kind(kind_name);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  fs::create_directories(out_dir);
  appd::Dataset ds = appd::make_dataset(kind, seed.resolve(), threads);
  const fs::path data_path = out_dir / (kind_name + ".jsonl");
  const fs::path manifest_path = out_dir / (kind_name + ".manifest.json");
  appd::save_jsonl(ds.sequences, data_path);
  std::ofstream manifest(manifest_path);
  manifest << ds.manifest.dump(2) << '\n';
  std::cout << "wrote " << ds.sequences.size() << " sequences to " << data_path.string()
            << "\n";
  return 0;
}

int cmd_train(const fs::path& data_path, const fs::path& config_path,
              const fs::path& out_path, const fs::path& history_path,
              const fs::path& resume_path, const SeedOption& seed) {
  appd::TrainConfig config;
  std::optional<std::uint64_t> config_seed;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) {
      std::cerr << "error: cannot open config " << config_path.string() << "\n";
      return kExitUsage;
    }
    nlohmann::json j;
    try {
      in >> j;
      config = appd::train_config_from_json(j);
    } catch (const nlohmann::json::exception& e) {
      std::cerr << "error: bad config: " << e.what() << "\n";
      return kExitUsage;
    }
    if (j.contains("seed")) config_seed = config.seed;
  }
  config.seed = seed.resolve(config_seed);

  std::vector<appd::Sequence> data = training_subset(appd::load_jsonl(data_path));
  for (const auto& s : data) {
    const auto violations = appd::validate(s);
    if (!violations.empty()) {
      std::cerr << "validation report for " << data_path.string() << ":\n";
      for (const auto& v : violations) std::cerr << "  " << v << "\n";
      return kExitValidation;
    }
  }

  std::optional<appd::InitialParams> start;
  if (!resume_path.empty()) {
    appd::Checkpoint prev = appd::load_checkpoint(resume_path);
    start = appd::InitialParams{prev.detector, prev.generator};
  }

  appd::TrainResult result = appd::train(data, config, start);

  appd::Checkpoint ckpt;
  ckpt.detector = result.detector;
  ckpt.generator = result.generator;
  ckpt.config = config;
  ckpt.config.max_events =
      appd::resolve_max_events(config, appd::mean_event_count(data));
  ckpt.horizon = data.front().horizon;
  ckpt.dataset_digest = dataset_digest_for(data_path);
  appd::save_checkpoint(ckpt, out_path);

  const fs::path hist =
      history_path.empty() ? fs::path(out_path.string() + ".history.csv") : history_path;
  result.history.write_csv(hist);

  if (result.aborted) {
    std::cerr << "training aborted: " << result.abort_reason << "\n";
    return 1;
  }
  std::cout << "trained " << config.m0 << " iterations; checkpoint " << out_path.string()
            << "\n";
  return 0;
}

int cmd_threshold(const fs::path& ckpt_path, int n_gen, int i_max, double scale,
                  const SeedOption& seed, const fs::path& out_path) {
  appd::Checkpoint ckpt = appd::load_checkpoint(ckpt_path);
  if (ckpt.generator.weights.empty()) {
    std::cerr << "error: checkpoint has no generator parameters\n";
    return kExitCheckpoint;
  }
  const std::uint64_t s = seed.resolve();
  appd::Rng master(s);
  // Detection-time feature draw is frozen here, alongside the curve that
  // references it.
  appd::Rng feat_rng = master.child(0);
  ckpt.detector.frozen_features = appd::sample_features(
      ckpt.detector.spectrum, ckpt.config.fourier_features, feat_rng);
  ckpt.threshold = appd::estimate_threshold(
      ckpt.detector, ckpt.generator, n_gen, i_max, scale, master.child(1).seed(),
      ckpt.horizon, appd::resolve_max_events(ckpt.config, 0.0));
  appd::save_checkpoint(ckpt, out_path.empty() ? ckpt_path : out_path);
  std::cout << "threshold curve with " << i_max << " steps (n'=" << n_gen
            << ", c=" << scale << ")\n";
  return 0;
}

int cmd_detect(const fs::path& ckpt_path, const fs::path& data_path,
               const fs::path& out_path, bool online_threshold, int threads,
               const SeedOption& seed) {
  appd::Checkpoint ckpt = appd::load_checkpoint(ckpt_path);
  if (!ckpt.detector.frozen_features.has_value() ||
      (!online_threshold && !ckpt.threshold.has_value())) {
    std::cerr << "error: checkpoint has no threshold curve; run `appd threshold` first\n";
    return kExitCheckpoint;
  }
  std::vector<appd::Sequence> data = appd::load_jsonl(data_path);
  std::vector<appd::DetectionResult> results(data.size());
  if (online_threshold) {
    const std::uint64_t s = seed.resolve(ckpt.threshold.has_value()
                                             ? std::optional<std::uint64_t>(
                                                   ckpt.threshold->seed)
                                             : std::nullopt);
    const int n_gen = ckpt.threshold.has_value() ? ckpt.threshold->n_gen
                                                 : ckpt.config.n_gen;
    const double scale = ckpt.threshold.has_value() ? ckpt.threshold->scale : 1.0;
    const appd::Rng master(s);
    appd::parallel_for(data.size(), threads, [&](std::size_t i) {
      results[i] = appd::detect_online_threshold(
          data[i], ckpt.detector, ckpt.generator, n_gen, scale,
          master.child(i).seed(), appd::resolve_max_events(ckpt.config, 0.0));
    });
  } else {
    appd::parallel_for(data.size(), threads, [&](std::size_t i) {
      results[i] = appd::detect(data[i], ckpt.detector, *ckpt.threshold);
    });
  }
  std::ofstream out(out_path);
  if (!out) {
    std::cerr << "error: cannot write " << out_path.string() << "\n";
    return 1;
  }
  std::size_t alarms = 0;
  for (const auto& r : results) {
    out << appd::detection_result_to_json(r).dump() << '\n';
    alarms += r.is_anomaly ? 1 : 0;
  }
  std::cout << alarms << " of " << results.size() << " sequences alarmed\n";
  return 0;
}

int cmd_evaluate(const fs::path& ckpt_path, const fs::path& data_path,
                 const fs::path& out_path, const fs::path& traces_path, int i_max,
                 int threads) {
  appd::Checkpoint ckpt = appd::load_checkpoint(ckpt_path);
  if (!ckpt.detector.frozen_features.has_value() || !ckpt.threshold.has_value()) {
    std::cerr << "error: checkpoint has no threshold curve; run `appd threshold` first\n";
    return kExitCheckpoint;
  }
  std::vector<appd::Sequence> data = appd::load_jsonl(data_path);
  if (i_max <= 0) i_max = static_cast<int>(ckpt.threshold->size());

  // Same metrics as appd::stepwise_evaluate, with the detect pass spread
  // over threads.
  std::vector<int> alarm_step(data.size(), 0);
  appd::parallel_for(data.size(), threads, [&](std::size_t i) {
    appd::DetectionResult r = appd::detect(data[i], ckpt.detector, *ckpt.threshold);
    if (r.is_anomaly) alarm_step[i] = *r.stop_index;
  });
  std::size_t u = 0;
  for (const auto& s : data) u += s.label == appd::Label::anomalous ? 1 : 0;
  if (u == 0) {
    std::cerr << "error: dataset has no anomalous sequences to evaluate against\n";
    return kExitValidation;
  }
  std::vector<appd::StepMetrics> metrics;
  for (int i = 1; i <= i_max; ++i) {
    appd::StepMetrics m;
    m.step = i;
    m.u = u;
    for (std::size_t s = 0; s < data.size(); ++s) {
      if (alarm_step[s] >= 1 && alarm_step[s] <= i) {
        ++m.v;
        if (data[s].label == appd::Label::anomalous) ++m.u_and_v;
      }
    }
    m.degenerate = m.v == 0;
    m.precision = m.v == 0 ? 0.0 : static_cast<double>(m.u_and_v) / m.v;
    m.recall = static_cast<double>(m.u_and_v) / static_cast<double>(m.u);
    m.f1 = (m.precision + m.recall) > 0.0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    metrics.push_back(m);
  }
  appd::write_metrics_csv(metrics, out_path);

  const fs::path traces =
      traces_path.empty() ? fs::path(out_path.string() + ".traces.csv") : traces_path;
  appd::write_traces_csv(
      appd::summarize_traces(data, ckpt.detector, *ckpt.threshold, i_max), traces);
  std::cout << "wrote metrics for steps 1.." << i_max << " to " << out_path.string()
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adversarial sequential anomaly detection for event sequences"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "generate a synthetic benchmark dataset");
  std::string sim_kind;
  SeedOption sim_seed;
  fs::path sim_out;
  int sim_threads = appd::default_thread_count();
  sim->add_option("--kind", sim_kind,
                  "singleton | composite | mixed | mixed-composite")
      ->required();
  add_seed_option(sim, sim_seed);
  sim->add_option("--out", sim_out, "output directory")->required();
  sim->add_option("--threads", sim_threads, "worker threads");

  // train
  auto* train = app.add_subcommand("train", "adversarial training on anomalous data");
  fs::path train_data, train_config, train_out, train_history, train_resume;
  SeedOption train_seed;
  train->add_option("--data", train_data, "training sequences (JSONL)")->required();
  train->add_option("--config", train_config, "training config (JSON)");
  train->add_option("--out", train_out, "output checkpoint path")->required();
  train->add_option("--history", train_history, "history CSV path");
  train->add_option("--resume", train_resume, "checkpoint to continue from");
  add_seed_option(train, train_seed);

  // threshold
  auto* thr = app.add_subcommand("threshold", "estimate the per-step alarm curve");
  fs::path thr_ckpt, thr_out;
  int thr_n = 32, thr_imax = 40;
  double thr_c = 1.0;
  SeedOption thr_seed;
  thr->add_option("--checkpoint", thr_ckpt, "trained checkpoint")->required();
  thr->add_option("--n-prime", thr_n, "generated sequences for the estimate");
  thr->add_option("--i-max", thr_imax, "number of steps to estimate");
  thr->add_option("--c", thr_c, "threshold scale factor");
  thr->add_option("--out", thr_out, "output checkpoint (default: in place)");
  add_seed_option(thr, thr_seed);

  // detect
  auto* det = app.add_subcommand("detect", "online detection over a dataset");
  fs::path det_ckpt, det_data, det_out;
  bool det_online = false;
  int det_threads = appd::default_thread_count();
  SeedOption det_seed;
  det->add_option("--checkpoint", det_ckpt)->required();
  det->add_option("--data", det_data, "sequences to scan (JSONL)")->required();
  det->add_option("--out", det_out, "detection results (JSONL)")->required();
  det->add_flag("--online-threshold", det_online,
                "re-estimate the threshold from fresh samples at every step");
  det->add_option("--threads", det_threads, "worker threads");
  add_seed_option(det, det_seed);

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "step-wise precision/recall/F1");
  fs::path ev_ckpt, ev_data, ev_out, ev_traces;
  int ev_imax = 0;
  int ev_threads = appd::default_thread_count();
  ev->add_option("--checkpoint", ev_ckpt)->required();
  ev->add_option("--data", ev_data, "labeled sequences (JSONL)")->required();
  ev->add_option("--out", ev_out, "metrics CSV")->required();
  ev->add_option("--traces", ev_traces, "mean-statistic traces CSV");
  ev->add_option("--i-max", ev_imax, "steps to report (default: curve length)");
  ev->add_option("--threads", ev_threads, "worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (sim->parsed()) return cmd_simulate(sim_kind, sim_seed, sim_out, sim_threads);
    if (train->parsed()) {
      return cmd_train(train_data, train_config, train_out, train_history, train_resume,
                       train_seed);
    }
    if (thr->parsed()) {
      return cmd_threshold(thr_ckpt, thr_n, thr_imax, thr_c, thr_seed, thr_out);
    }
    if (det->parsed()) {
      return cmd_detect(det_ckpt, det_data, det_out, det_online, det_threads, det_seed);
    }
    if (ev->parsed()) {
      return cmd_evaluate(ev_ckpt, ev_data, ev_out, ev_traces, ev_imax, ev_threads);
    }
  } catch (const appd::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const appd::CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return kExitCheckpoint;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
