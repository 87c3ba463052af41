// Command-line surface for the spatio-temporal graph attention trajectory
// predictor: dataset generation, training, evaluation, the ablation and
// sampling-frequency experiments, and plot export. Commands are thin
// compositions of library calls; every run writes a manifest with checksums
// of its artifacts.
//
// Exit codes: 0 success, 2 bad input/config, 3 I/O failure, 4 numerical
// abort.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "stgat/stgat.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
  }
};

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw stgat::io_error("cannot create output directory " + dir + ": " +
                          ec.message());
  }
  // Probe writability up front so failures map to a clean I/O error.
  const std::string probe = (fs::path(dir) / ".write_probe").string();
  {
    std::ofstream f(probe, std::ios::binary);
    if (!f) throw stgat::io_error("output directory " + dir + " not writable");
  }
  fs::remove(probe, ec);
}

json load_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw stgat::io_error("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw stgat::config_error(path + ": invalid JSON: " + e.what());
  }
}

std::string resolve_data_dir(const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv("STGAT_DATA_DIR")) return env;
  throw stgat::config_error(
      "no data directory: pass --data or set STGAT_DATA_DIR");
}

std::vector<stgat::Engagement> read_data_dir(const std::string& dir,
                                             std::size_t filter_window) {
  if (!fs::is_directory(dir)) {
    throw stgat::config_error("data directory " + dir + " does not exist");
  }
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") {
      files.push_back(entry.path().string());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) {
    throw stgat::config_error("data directory " + dir + " has no .csv files");
  }
  std::vector<stgat::Engagement> out;
  out.reserve(files.size());
  for (const std::string& f : files) {
    stgat::Engagement e = stgat::read_csv(f);
    if (filter_window > 1) e = stgat::low_pass_filter(e, filter_window);
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<stgat::WindowSample> windowize_all(
    const std::vector<stgat::Engagement>& engagements,
    const stgat::ModelConfig& cfg) {
  std::vector<stgat::WindowSample> out;
  for (const stgat::Engagement& e : engagements) {
    auto w = stgat::windowize(e, cfg.history_len, cfg.norm_scale_km);
    out.insert(out.end(), std::make_move_iterator(w.begin()),
               std::make_move_iterator(w.end()));
  }
  return out;
}

void check_fighter_counts(const std::vector<stgat::Engagement>& engagements,
                          const stgat::ModelConfig& cfg) {
  for (const stgat::Engagement& e : engagements) {
    if (e.fighters.size() > cfg.n_max) {
      throw stgat::config_error(
          "engagement " + e.id + " has " +
          std::to_string(e.fighters.size()) +
          " fighters, above the configured n_max " + std::to_string(cfg.n_max));
    }
  }
}

// ---------------------------------------------------------------------------

struct GenerateArgs {
  std::string spec_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_given = false;
  double rate = 0.0;  // 0 = keep spec value
};

int run_generate(const GenerateArgs& a, const std::vector<std::string>& argv) {
  Timer timer;
  stgat::GeneratorSpec spec = a.spec_path.empty()
                                  ? stgat::default_generator_spec()
                                  : load_json_file(a.spec_path)
                                        .get<stgat::GeneratorSpec>();
  if (a.seed_given) spec.seed = a.seed;
  if (a.rate > 0.0) spec.sample_rate_hz = a.rate;
  ensure_dir(a.out_dir);

  const auto engagements = stgat::generate_dataset(spec);
  stgat::RunManifest manifest;
  manifest.command = "generate";
  manifest.argv = argv;
  manifest.config = spec;
  manifest.seed = spec.seed;
  if (!a.spec_path.empty()) manifest.inputs.push_back(a.spec_path);
  for (const stgat::Engagement& e : engagements) {
    const std::string path = (fs::path(a.out_dir) / (e.id + ".csv")).string();
    stgat::write_csv(e, path);
    manifest.add_output(path);
  }
  manifest.wall_time_s = timer.seconds();
  stgat::write_manifest((fs::path(a.out_dir) / "manifest.json").string(),
                        manifest);
  std::cout << "generated " << engagements.size() << " engagements into "
            << a.out_dir << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string data_dir;
  std::string out_path;
  std::string report_path;
  std::string model_config_path;
  std::string train_config_path;
  std::string variant = "full";
  std::size_t filter_window = 5;
  // Flag overrides; only applied when the flag was passed.
  std::size_t epochs = 0;
  bool epochs_given = false;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::size_t history_len = 0;
  std::size_t batch_size = 0;
  double learning_rate = 0.0;
};

struct LoadedConfigs {
  stgat::ModelConfig model;
  stgat::TrainConfig train;
};

LoadedConfigs resolve_configs(const TrainArgs& a) {
  LoadedConfigs c;
  if (!a.model_config_path.empty()) {
    c.model = load_json_file(a.model_config_path).get<stgat::ModelConfig>();
  }
  if (!a.train_config_path.empty()) {
    c.train = load_json_file(a.train_config_path).get<stgat::TrainConfig>();
  }
  if (a.epochs_given) c.train.epochs = a.epochs;
  if (a.seed_given) c.train.seed = a.seed;
  if (a.history_len > 0) c.model.history_len = a.history_len;
  if (a.batch_size > 0) c.train.batch_size = a.batch_size;
  if (a.learning_rate > 0.0) c.train.learning_rate = a.learning_rate;
  c.model.validate();
  c.train.validate();
  return c;
}

int run_train(const TrainArgs& a, const std::vector<std::string>& argv) {
  Timer timer;
  const std::string data_dir = resolve_data_dir(a.data_dir);
  LoadedConfigs cfg = resolve_configs(a);
  const stgat::Variant variant = stgat::variant_from_name(a.variant);

  const auto engagements = read_data_dir(data_dir, a.filter_window);
  check_fighter_counts(engagements, cfg.model);
  const auto split = stgat::split_dataset(engagements, cfg.train.seed);
  const auto train_windows = windowize_all(split.train, cfg.model);
  const auto val_windows = windowize_all(split.test, cfg.model);

  auto [weights, report] =
      stgat::train(train_windows, cfg.train, cfg.model, variant, &val_windows);

  stgat::save_checkpoint(a.out_path, weights, cfg.model, cfg.train.seed);
  const std::string report_path =
      a.report_path.empty() ? a.out_path + ".report.jsonl" : a.report_path;
  stgat::write_train_report(report_path, report);

  stgat::RunManifest manifest;
  manifest.command = "train";
  manifest.argv = argv;
  manifest.config = {{"model", cfg.model},
                     {"train", cfg.train},
                     {"variant", stgat::variant_name(variant)},
                     {"filter_window", a.filter_window},
                     {"data_dir", data_dir},
                     {"train_engagements", split.train.size()},
                     {"test_engagements", split.test.size()},
                     {"train_windows", train_windows.size()}};
  manifest.seed = cfg.train.seed;
  manifest.inputs.push_back(data_dir);
  manifest.add_output(a.out_path);
  manifest.add_output(report_path);
  manifest.wall_time_s = timer.seconds();
  stgat::write_manifest(a.out_path + ".manifest.json", manifest);

  if (!report.epochs.empty()) {
    const auto& last = report.epochs.back();
    std::cout << "trained " << stgat::variant_name(variant) << " for "
              << report.epochs.size() << " epochs (" << report.total_steps
              << " steps), final loss " << last.train_loss << ", val ADE "
              << last.val_ade_km << " km\n";
  } else {
    std::cout << "epochs=0: wrote freshly initialized weights\n";
  }
  std::cout << "checkpoint: " << a.out_path << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct EvaluateArgs {
  std::string checkpoint;
  std::string data_dir;
  std::string out_path;
  std::size_t horizon = 8;
  std::size_t filter_window = 5;
};

int run_evaluate(const EvaluateArgs& a, const std::vector<std::string>& argv) {
  Timer timer;
  stgat::Checkpoint ck = stgat::load_checkpoint(a.checkpoint);
  const std::string data_dir = resolve_data_dir(a.data_dir);
  auto engagements = read_data_dir(data_dir, a.filter_window);
  check_fighter_counts(engagements, ck.config);
  const auto split = stgat::split_dataset(engagements, ck.seed);

  const stgat::MetricsReport report =
      stgat::evaluate_model(ck.weights, ck.config, split.test, a.horizon);
  const std::string out_path =
      a.out_path.empty() ? a.checkpoint + ".metrics.json" : a.out_path;
  stgat::write_metrics_report(out_path, report);

  stgat::RunManifest manifest;
  manifest.command = "evaluate";
  manifest.argv = argv;
  manifest.config = {{"checkpoint", a.checkpoint},
                     {"horizon", a.horizon},
                     {"filter_window", a.filter_window},
                     {"model", ck.config},
                     {"data_dir", data_dir}};
  manifest.seed = ck.seed;
  manifest.inputs = {a.checkpoint, data_dir};
  manifest.add_output(out_path);
  manifest.wall_time_s = timer.seconds();
  stgat::write_manifest(out_path + ".manifest.json", manifest);

  std::cout << "horizon " << a.horizon << " over " << report.overall.windows
            << " windows: ADE " << report.overall.ade_km << " km, FDE "
            << report.overall.fde_km << " km\n";
  for (const auto& [label, g] : report.groups) {
    std::cout << "  " << label << ": ADE " << g.ade_km << " km, FDE "
              << g.fde_km << " km (" << g.windows << " windows)\n";
  }
  if (a.horizon == 1) std::cout << "  (single-step horizon: ADE == FDE)\n";
  std::cout << "report: " << out_path << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct AblateArgs {
  std::string data_dir;
  std::string out_dir;
  std::size_t epochs = 10;
  std::uint64_t seed = 42;
  std::size_t filter_window = 5;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  std::size_t history_len = 8;
};

int run_ablate(const AblateArgs& a, const std::vector<std::string>& argv) {
  Timer timer;
  const std::string data_dir = resolve_data_dir(a.data_dir);
  ensure_dir(a.out_dir);

  stgat::ModelConfig mcfg;
  mcfg.history_len = a.history_len;
  stgat::TrainConfig tcfg;
  tcfg.epochs = a.epochs;
  tcfg.seed = a.seed;
  tcfg.batch_size = a.batch_size;
  tcfg.learning_rate = a.learning_rate;

  auto engagements = read_data_dir(data_dir, a.filter_window);
  check_fighter_counts(engagements, mcfg);
  const auto split = stgat::split_dataset(engagements, tcfg.seed);
  const auto train_windows = windowize_all(split.train, mcfg);

  const std::vector<stgat::Variant> arms = {stgat::Variant::kFull,
                                            stgat::Variant::kTransformerOnly,
                                            stgat::Variant::kGatOnly};
  json arm_reports = json::array();
  json runtimes;
  double full_ade = 0.0;
  double best_branch_ade = std::numeric_limits<double>::infinity();
  stgat::RunManifest manifest;
  manifest.command = "ablate";
  manifest.argv = argv;

  for (stgat::Variant v : arms) {
    Timer arm_timer;
    auto [weights, train_report] =
        stgat::train(train_windows, tcfg, mcfg, v, nullptr);
    const stgat::MetricsReport metrics =
        stgat::evaluate_model(weights, mcfg, split.test, 1);
    const std::string name = stgat::variant_name(v);
    const std::string ckpt =
        (fs::path(a.out_dir) / (name + ".stgat")).string();
    stgat::save_checkpoint(ckpt, weights, mcfg, tcfg.seed);
    manifest.add_output(ckpt);

    arm_reports.push_back({{"variant", name},
                           {"test_ade_km", metrics.overall.ade_km},
                           {"test_fde_km", metrics.overall.fde_km},
                           {"test_windows", metrics.overall.windows},
                           {"parameters", stgat::count_parameters(weights)},
                           {"adam_steps", train_report.total_steps},
                           {"final_train_loss",
                            train_report.epochs.empty()
                                ? 0.0
                                : train_report.epochs.back().train_loss}});
    runtimes[name] = arm_timer.seconds();
    if (v == stgat::Variant::kFull) {
      full_ade = metrics.overall.ade_km;
    } else {
      best_branch_ade = std::min(best_branch_ade, metrics.overall.ade_km);
    }
    std::cout << name << ": single-step test ADE " << metrics.overall.ade_km
              << " km\n";
  }

  json report;
  report["arms"] = arm_reports;
  report["seed"] = tcfg.seed;
  report["epochs"] = tcfg.epochs;
  report["full_over_best_branch"] = full_ade / best_branch_ade;
  report["full_leq_branches_at_1.05"] = full_ade <= 1.05 * best_branch_ade;
  const std::string report_path =
      (fs::path(a.out_dir) / "ablation.json").string();
  stgat::atomic_write_text(report_path, report.dump(2) + "\n");
  manifest.add_output(report_path);

  manifest.config = {{"model", mcfg},
                     {"train", tcfg},
                     {"filter_window", a.filter_window},
                     {"data_dir", data_dir},
                     {"arm_runtimes_s", runtimes}};
  manifest.seed = tcfg.seed;
  manifest.inputs.push_back(data_dir);
  manifest.wall_time_s = timer.seconds();
  stgat::write_manifest((fs::path(a.out_dir) / "manifest.json").string(),
                        manifest);
  std::cout << "full/best-branch ADE ratio: " << full_ade / best_branch_ade
            << "\nreport: " << report_path << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct FreqArgs {
  std::string out_dir;
  std::size_t engagements = 3;
  double duration_s = 60.0;
  std::size_t epochs = 3;
  std::uint64_t seed = 42;
  double noise_sigma_km = 0.002;
};

int run_freq_experiment(const FreqArgs& a,
                        const std::vector<std::string>& argv) {
  Timer timer;
  ensure_dir(a.out_dir);
  constexpr double kHistorySeconds = 4.0;
  constexpr std::size_t kHighRate = 50, kLowRate = 2;
  constexpr std::size_t kDecimation = kHighRate / kLowRate;

  // One set of battles sampled at 50 Hz; the 2 Hz arm sees the same battles
  // decimated, so both arms consume exactly the same 4 s of history.
  std::vector<stgat::Engagement> high, low;
  for (std::size_t i = 0; i < a.engagements; ++i) {
    stgat::EngagementSpec spec;
    spec.id = "freq_" + std::to_string(i) + "_2v2";
    spec.n_blue = 2;
    spec.n_red = 2;
    spec.duration_s = a.duration_s;
    spec.sample_rate_hz = static_cast<double>(kHighRate);
    spec.seed = stgat::Rng::derive_seed(a.seed, i);
    spec.noise_sigma_km = a.noise_sigma_km;
    high.push_back(stgat::generate_engagement(spec));
    low.push_back(stgat::decimate(high.back(), kDecimation));
  }

  struct Arm {
    std::string name;
    std::size_t rate;
    std::size_t history_len;
    std::size_t stride;  // window-start subsampling
    const std::vector<stgat::Engagement>* data;
  };
  const std::vector<Arm> arms = {
      {"2hz", kLowRate, 8, 1, &low},
      {"50hz", kHighRate, 200, kDecimation, &high}};

  json arm_json;
  json runtimes;
  double ade_2hz = 0.0, ade_50hz = 0.0;
  for (const Arm& arm : arms) {
    Timer arm_timer;
    if (static_cast<double>(arm.history_len) / arm.rate != kHistorySeconds) {
      throw stgat::config_error("freq arm " + arm.name +
                                " history is not 4 seconds");
    }
    stgat::ModelConfig mcfg;
    mcfg.history_len = arm.history_len;
    stgat::TrainConfig tcfg;
    tcfg.epochs = a.epochs;
    tcfg.seed = a.seed;

    const auto split = stgat::split_dataset(*arm.data, a.seed);
    auto subsample = [&](const std::vector<stgat::Engagement>& engs) {
      std::vector<stgat::WindowSample> all;
      for (const auto& e : engs) {
        auto w = stgat::windowize(e, mcfg.history_len, mcfg.norm_scale_km);
        for (std::size_t s = 0; s < w.size(); s += arm.stride) {
          all.push_back(std::move(w[s]));
        }
      }
      return all;
    };
    const auto train_windows = subsample(split.train);
    const auto test_windows = subsample(split.test);

    auto [weights, train_report] =
        stgat::train(train_windows, tcfg, mcfg, stgat::Variant::kFull,
                     nullptr);
    const double test_ade =
        stgat::single_step_ade(test_windows, weights, mcfg);
    if (arm.name == "2hz") ade_2hz = test_ade;
    else ade_50hz = test_ade;

    // Per-window forward multiply-accumulate estimate, a machine-readable
    // stand-in for "computation volume".
    const std::size_t flops_proxy = stgat::count_parameters(weights);
    arm_json[arm.name] = {{"sample_rate_hz", arm.rate},
                          {"history_len", arm.history_len},
                          {"history_seconds", kHistorySeconds},
                          {"train_windows", train_windows.size()},
                          {"test_windows", test_windows.size()},
                          {"parameters", flops_proxy},
                          {"adam_steps", train_report.total_steps},
                          {"test_single_step_ade_km", test_ade}};
    runtimes[arm.name] = arm_timer.seconds();
    std::cout << arm.name << ": single-step test ADE " << test_ade << " km ("
              << train_windows.size() << " train windows, "
              << flops_proxy << " parameters)\n";
  }

  json report;
  report["arms"] = arm_json;
  report["ratio_50hz_over_2hz"] = ade_50hz / ade_2hz;
  report["direction_claim_50hz_leq_2hz"] = ade_50hz <= ade_2hz;
  report["seed"] = a.seed;
  const std::string report_path =
      (fs::path(a.out_dir) / "freq_experiment.json").string();
  stgat::atomic_write_text(report_path, report.dump(2) + "\n");

  stgat::RunManifest manifest;
  manifest.command = "freq-experiment";
  manifest.argv = argv;
  manifest.config = {{"engagements", a.engagements},
                     {"duration_s", a.duration_s},
                     {"epochs", a.epochs},
                     {"noise_sigma_km", a.noise_sigma_km},
                     {"arm_runtimes_s", runtimes}};
  manifest.seed = a.seed;
  manifest.add_output(report_path);
  manifest.wall_time_s = timer.seconds();
  stgat::write_manifest((fs::path(a.out_dir) / "manifest.json").string(),
                        manifest);
  std::cout << "50hz/2hz error ratio: " << ade_50hz / ade_2hz
            << "\nreport: " << report_path << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct PlotArgs {
  std::string checkpoint;
  std::string engagement_csv;
  std::string out_dir;
  std::size_t start = 0;
  std::size_t horizon = 8;
  std::size_t filter_window = 1;
};

int run_plot(const PlotArgs& a, const std::vector<std::string>& argv) {
  Timer timer;
  stgat::Checkpoint ck = stgat::load_checkpoint(a.checkpoint);
  stgat::Engagement e = stgat::read_csv(a.engagement_csv);
  if (a.filter_window > 1) e = stgat::low_pass_filter(e, a.filter_window);
  const std::size_t l = ck.config.history_len;
  if (a.start + l + a.horizon > e.length()) {
    throw stgat::config_error(
        "window [" + std::to_string(a.start) + ", " +
        std::to_string(a.start + l + a.horizon) + ") exceeds engagement of " +
        std::to_string(e.length()) + " steps");
  }
  ensure_dir(a.out_dir);

  const stgat::Tensor history =
      stgat::positions_block(e, a.start, l);
  const stgat::Tensor truth =
      stgat::positions_block(e, a.start + l, a.horizon);
  const stgat::Tensor pred =
      stgat::rollout(history, a.horizon, ck.weights, ck.config);

  const std::size_t n = e.fighters.size();
  stgat::TrajectoryPlot plot;
  plot.history.resize(n);
  plot.truth.resize(n);
  plot.prediction.resize(n);
  auto unpack = [n](const stgat::Tensor& block,
                    std::vector<std::vector<std::array<double, 3>>>& lines) {
    const std::size_t steps = block.dim(0);
    const double* p = block.values().data();
    for (std::size_t i = 0; i < n; ++i) {
      lines[i].resize(steps);
      for (std::size_t t = 0; t < steps; ++t) {
        lines[i][t] = {p[(t * n + i) * 3], p[(t * n + i) * 3 + 1],
                       p[(t * n + i) * 3 + 2]};
      }
    }
  };
  unpack(history, plot.history);
  unpack(truth, plot.truth);
  unpack(pred, plot.prediction);

  const std::string svg_path = (fs::path(a.out_dir) / "plot.svg").string();
  const std::string csv_path =
      (fs::path(a.out_dir) / "plot_data.csv").string();
  stgat::write_trajectory_svg(svg_path, plot);
  stgat::write_plot_csv(csv_path, plot);

  stgat::RunManifest manifest;
  manifest.command = "plot";
  manifest.argv = argv;
  manifest.config = {{"checkpoint", a.checkpoint},
                     {"engagement", a.engagement_csv},
                     {"start", a.start},
                     {"horizon", a.horizon},
                     {"filter_window", a.filter_window}};
  manifest.seed = ck.seed;
  manifest.inputs = {a.checkpoint, a.engagement_csv};
  manifest.add_output(svg_path);
  manifest.add_output(csv_path);
  manifest.wall_time_s = timer.seconds();
  stgat::write_manifest((fs::path(a.out_dir) / "manifest.json").string(),
                        manifest);
  std::cout << "plot: " << svg_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spatio-temporal graph attention trajectory predictor"};
  app.require_subcommand(1);
  std::vector<std::string> argv_copy(argv, argv + argc);

  GenerateArgs gen;
  auto* cmd_gen = app.add_subcommand(
      "generate", "generate synthetic engagement CSVs from a spec");
  cmd_gen->add_option("--spec", gen.spec_path,
                      "generator spec JSON (default: 30-battle composition)");
  cmd_gen->add_option("--out", gen.out_dir, "output directory")->required();
  auto* gen_seed = cmd_gen->add_option("--seed", gen.seed, "seed override");
  cmd_gen->add_option("--rate", gen.rate, "sample rate override (Hz)");

  TrainArgs tr;
  auto* cmd_train =
      app.add_subcommand("train", "train a model on a data directory");
  cmd_train->add_option("--data", tr.data_dir,
                        "engagement CSV directory (or $STGAT_DATA_DIR)");
  cmd_train->add_option("--out", tr.out_path, "checkpoint path")->required();
  cmd_train->add_option("--report", tr.report_path,
                        "train report path (default <out>.report.jsonl)");
  cmd_train->add_option("--model-config", tr.model_config_path,
                        "model config JSON");
  cmd_train->add_option("--train-config", tr.train_config_path,
                        "train config JSON");
  cmd_train->add_option("--variant", tr.variant,
                        "full | transformer | gat");
  cmd_train->add_option("--filter-window", tr.filter_window,
                        "low-pass window (odd; 1 disables)");
  auto* tr_epochs = cmd_train->add_option("--epochs", tr.epochs, "epochs");
  auto* tr_seed = cmd_train->add_option("--seed", tr.seed, "training seed");
  cmd_train->add_option("--history-len", tr.history_len, "history length l");
  cmd_train->add_option("--batch-size", tr.batch_size, "batch size");
  cmd_train->add_option("--lr", tr.learning_rate, "learning rate");

  EvaluateArgs ev;
  auto* cmd_eval = app.add_subcommand(
      "evaluate", "evaluate a checkpoint on its test split");
  cmd_eval->add_option("--checkpoint", ev.checkpoint, "checkpoint path")
      ->required();
  cmd_eval->add_option("--data", ev.data_dir,
                       "engagement CSV directory (or $STGAT_DATA_DIR)");
  cmd_eval->add_option("--horizon", ev.horizon, "prediction horizon");
  cmd_eval->add_option("--out", ev.out_path, "metrics report path");
  cmd_eval->add_option("--filter-window", ev.filter_window,
                       "low-pass window (odd; 1 disables)");

  AblateArgs ab;
  auto* cmd_ablate = app.add_subcommand(
      "ablate", "train/evaluate full, transformer-only and gat-only arms");
  cmd_ablate->add_option("--data", ab.data_dir,
                         "engagement CSV directory (or $STGAT_DATA_DIR)");
  cmd_ablate->add_option("--out", ab.out_dir, "output directory")->required();
  cmd_ablate->add_option("--epochs", ab.epochs, "epochs per arm");
  cmd_ablate->add_option("--seed", ab.seed, "shared seed for all arms");
  cmd_ablate->add_option("--filter-window", ab.filter_window,
                         "low-pass window (odd; 1 disables)");
  cmd_ablate->add_option("--batch-size", ab.batch_size, "batch size");
  cmd_ablate->add_option("--lr", ab.learning_rate, "learning rate");
  cmd_ablate->add_option("--history-len", ab.history_len, "history length l");

  FreqArgs fq;
  auto* cmd_freq = app.add_subcommand(
      "freq-experiment",
      "2 Hz / 8-point vs 50 Hz / 200-point comparison on matched battles");
  cmd_freq->add_option("--out", fq.out_dir, "output directory")->required();
  cmd_freq->add_option("--engagements", fq.engagements, "battle count");
  cmd_freq->add_option("--duration", fq.duration_s, "battle duration (s)");
  cmd_freq->add_option("--epochs", fq.epochs, "epochs per arm");
  cmd_freq->add_option("--seed", fq.seed, "seed");
  cmd_freq->add_option("--noise", fq.noise_sigma_km, "position noise (km)");

  PlotArgs pl;
  auto* cmd_plot = app.add_subcommand(
      "plot", "render history/truth/prediction projections to SVG");
  cmd_plot->add_option("--checkpoint", pl.checkpoint, "checkpoint path")
      ->required();
  cmd_plot->add_option("--engagement", pl.engagement_csv, "engagement CSV")
      ->required();
  cmd_plot->add_option("--out", pl.out_dir, "output directory")->required();
  cmd_plot->add_option("--start", pl.start, "window start index");
  cmd_plot->add_option("--horizon", pl.horizon, "prediction horizon");
  cmd_plot->add_option("--filter-window", pl.filter_window,
                       "low-pass window (odd; 1 disables)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  gen.seed_given = gen_seed->count() > 0;
  tr.epochs_given = tr_epochs->count() > 0;
  tr.seed_given = tr_seed->count() > 0;

  try {
    if (app.got_subcommand(cmd_gen)) return run_generate(gen, argv_copy);
    if (app.got_subcommand(cmd_train)) return run_train(tr, argv_copy);
    if (app.got_subcommand(cmd_eval)) return run_evaluate(ev, argv_copy);
    if (app.got_subcommand(cmd_ablate)) return run_ablate(ab, argv_copy);
    if (app.got_subcommand(cmd_freq)) return run_freq_experiment(fq, argv_copy);
    if (app.got_subcommand(cmd_plot)) return run_plot(pl, argv_copy);
  } catch (const stgat::config_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const stgat::io_error& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return 3;
  } catch (const stgat::numeric_error& e) {
    std::cerr << "numerical abort: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
