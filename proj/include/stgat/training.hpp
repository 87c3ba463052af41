#pragma once

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstring>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "stgat/model.hpp"
#include "stgat/window.hpp"

namespace stgat {

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t batch_size = 32;
  std::size_t epochs = 30;
  std::uint64_t seed = 42;
  std::optional<double> clip_norm = 5.0;  // nullopt disables clipping
  std::size_t max_steps = 0;              // 0 = no cap on optimizer steps
  double target_train_ade_km = 0.0;       // > 0: stop once train ADE drops below

  void validate() const {
    if (!(learning_rate > 0.0)) throw config_error("train: learning_rate must be positive");
    if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
      throw config_error("train: betas must lie in (0,1)");
    }
    if (batch_size == 0) throw config_error("train: batch_size must be >= 1");
  }
};

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"learning_rate", c.learning_rate},
                     {"beta1", c.beta1},
                     {"beta2", c.beta2},
                     {"adam_eps", c.adam_eps},
                     {"batch_size", c.batch_size},
                     {"epochs", c.epochs},
                     {"seed", c.seed},
                     {"clip_norm", c.clip_norm ? nlohmann::json(*c.clip_norm)
                                              : nlohmann::json()},
                     {"max_steps", c.max_steps},
                     {"target_train_ade_km", c.target_train_ade_km}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  TrainConfig d;
  c.learning_rate = j.value("learning_rate", d.learning_rate);
  c.beta1 = j.value("beta1", d.beta1);
  c.beta2 = j.value("beta2", d.beta2);
  c.adam_eps = j.value("adam_eps", d.adam_eps);
  c.batch_size = j.value("batch_size", d.batch_size);
  c.epochs = j.value("epochs", d.epochs);
  c.seed = j.value("seed", d.seed);
  if (j.contains("clip_norm") && !j.at("clip_norm").is_null()) {
    c.clip_norm = j.at("clip_norm").get<double>();
  } else if (j.contains("clip_norm")) {
    c.clip_norm = std::nullopt;
  }
  c.max_steps = j.value("max_steps", c.max_steps);
  c.target_train_ade_km = j.value("target_train_ade_km", c.target_train_ade_km);
}

// Mean squared error over fighters and coordinates. An optional [n] mask
// (nonzero = evaluated) restricts the mean to selected fighters.
inline Tensor mse_loss(Tape& tape, const Tensor& pred, const Tensor& target,
                       const Tensor* mask = nullptr) {
  if (pred.shape() != target.shape()) {
    throw config_error("mse_loss: shapes " + shape_str(pred.shape()) +
                       " and " + shape_str(target.shape()) + " differ");
  }
  Tensor diff = sub(tape, pred, target);
  Tensor sq = mul(tape, diff, diff);
  if (mask == nullptr) {
    return mean_all(tape, sq);
  }
  const std::size_t n = pred.dim(0);
  if (mask->numel() != n) {
    throw config_error("mse_loss: mask length " +
                       std::to_string(mask->numel()) + " != " +
                       std::to_string(n) + " fighters");
  }
  double count = 0.0;
  for (double m : mask->values()) count += (m != 0.0) ? 1.0 : 0.0;
  if (count == 0.0) throw config_error("mse_loss: mask selects no fighters");
  Tensor m = reshape(tape, *mask, {n, 1});
  Tensor masked = mul(tape, sq, m);
  return scale(tape, sum_all(tape, masked),
               1.0 / (count * static_cast<double>(pred.dim(1))));
}

// First/second moment estimates, one slot per named parameter.
struct AdamState {
  std::vector<std::vector<double>> m, v;
  long step = 0;

  explicit AdamState(const std::vector<std::pair<std::string, Tensor>>& params) {
    m.reserve(params.size());
    v.reserve(params.size());
    for (const auto& [name, t] : params) {
      m.emplace_back(t.numel(), 0.0);
      v.emplace_back(t.numel(), 0.0);
    }
  }
};

// One bias-corrected Adam update over all parameters. Gradients must already
// be populated; parameters with no accumulated gradient are treated as zero.
// A NaN/Inf gradient aborts with the offending tensor's name.
inline void adam_step(std::vector<std::pair<std::string, Tensor>>& params,
                      AdamState& state, const TrainConfig& cfg) {
  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, state.step);
  const double bc2 = 1.0 - std::pow(cfg.beta2, state.step);
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& [name, t] = params[p];
    if (!t.has_grad()) continue;
    const std::vector<double>& g = t.grad();
    std::vector<double>& vals = t.values_mut();
    std::vector<double>& m = state.m[p];
    std::vector<double>& v = state.v[p];
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!std::isfinite(g[i])) {
        throw numeric_error("adam_step: non-finite gradient in tensor '" +
                            name + "'");
      }
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      vals[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_eps);
    }
  }
}

namespace detail {

inline void zero_grads(std::vector<std::pair<std::string, Tensor>>& params) {
  for (auto& [name, t] : params) t.zero_grad();
}

// Scales all gradients so their global L2 norm does not exceed `max_norm`.
inline void clip_grad_norm(std::vector<std::pair<std::string, Tensor>>& params,
                           double max_norm) {
  double total = 0.0;
  for (auto& [name, t] : params) {
    if (!t.has_grad()) continue;
    for (double g : t.grad()) total += g * g;
  }
  total = std::sqrt(total);
  if (total <= max_norm || total == 0.0) return;
  const double factor = max_norm / total;
  for (auto& [name, t] : params) {
    if (!t.has_grad()) continue;
    for (double& g : t.grad_mut()) g *= factor;
  }
}

}  // namespace detail

// Mean single-step displacement error (km) of eval-mode predictions over a
// window set. With one predicted point ADE and FDE coincide.
inline double single_step_ade(const std::vector<WindowSample>& windows,
                              const ModelWeights& w, const ModelConfig& cfg) {
  if (windows.empty()) return 0.0;
  Rng rng(0);
  double sum = 0.0;
  std::size_t count = 0;
  for (const WindowSample& s : windows) {
    Tape tape(false);
    Tensor pred = predict_step(tape, s.history, w, cfg, false, rng);
    const std::size_t n = pred.dim(0);
    const double* pp = pred.values().data();
    const double* pt = s.target.values().data();
    for (std::size_t i = 0; i < n; ++i) {
      double d2 = 0.0;
      for (std::size_t c = 0; c < 3; ++c) {
        const double e = (pp[i * 3 + c] - pt[i * 3 + c]) * s.norm.scale;
        d2 += e * e;
      }
      sum += std::sqrt(d2);
      ++count;
    }
  }
  return sum / static_cast<double>(count);
}

struct EpochStats {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_ade_km = -1.0;  // < 0 when no validation set was given
  double val_fde_km = -1.0;
  std::size_t steps_done = 0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  std::size_t total_steps = 0;
  bool reached_target = false;
  double wall_time_s = 0.0;  // informational; not serialized
};

// Teacher-forced single-step training: per epoch, shuffle (seeded), batch,
// backprop the MSE of predict_step against each window's target, and apply
// one Adam update per batch with the mean gradient. Deterministic per seed.
inline std::pair<ModelWeights, TrainReport> train(
    const std::vector<WindowSample>& dataset, const TrainConfig& tcfg,
    const ModelConfig& mcfg, Variant variant,
    const std::vector<WindowSample>* validation = nullptr) {
  tcfg.validate();
  mcfg.validate();
  if (dataset.empty()) throw config_error("train: empty dataset");

  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(tcfg.seed);
  ModelWeights weights = init_weights(mcfg, variant, rng);
  auto params = weights.named_parameters();
  AdamState state(params);
  TrainReport report;

  std::vector<std::size_t> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  bool stop = false;
  for (std::size_t epoch = 0; epoch < tcfg.epochs && !stop; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    for (std::size_t begin = 0; begin < order.size() && !stop;
         begin += tcfg.batch_size) {
      const std::size_t end =
          std::min(begin + tcfg.batch_size, order.size());
      const double inv_batch = 1.0 / static_cast<double>(end - begin);
      detail::zero_grads(params);
      for (std::size_t k = begin; k < end; ++k) {
        const WindowSample& s = dataset[order[k]];
        Tape tape;
        Tensor pred = predict_step(tape, s.history, weights, mcfg, true, rng);
        Tensor loss = mse_loss(tape, pred, s.target);
        loss_sum += loss.item();
        ++loss_count;
        tape.backward(scale(tape, loss, inv_batch));
      }
      if (tcfg.clip_norm) detail::clip_grad_norm(params, *tcfg.clip_norm);
      adam_step(params, state, tcfg);
      report.total_steps += 1;
      if (tcfg.max_steps > 0 && report.total_steps >= tcfg.max_steps) {
        stop = true;
      }
    }

    EpochStats stats;
    stats.epoch = epoch + 1;
    stats.train_loss = loss_sum / static_cast<double>(loss_count);
    stats.steps_done = report.total_steps;
    if (validation != nullptr) {
      stats.val_ade_km = single_step_ade(*validation, weights, mcfg);
      stats.val_fde_km = stats.val_ade_km;  // one-step horizon
    }
    report.epochs.push_back(stats);

    if (tcfg.target_train_ade_km > 0.0) {
      const double train_ade =
          single_step_ade(dataset, weights, mcfg);
      if (train_ade < tcfg.target_train_ade_km) {
        report.reached_target = true;
        stop = true;
      }
    }
  }

  report.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return {std::move(weights), std::move(report)};
}

// One JSON record per epoch, newline-delimited. Content is a pure function
// of the training run, so reruns with the same seed produce identical bytes.
inline void write_train_report(const std::string& path,
                               const TrainReport& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write train report to " + path);
  for (const EpochStats& e : report.epochs) {
    nlohmann::json j{{"epoch", e.epoch},
                     {"train_loss", e.train_loss},
                     {"steps", e.steps_done}};
    if (e.val_ade_km >= 0.0) {
      j["val_ade_km"] = e.val_ade_km;
      j["val_fde_km"] = e.val_fde_km;
    }
    out << j.dump() << '\n';
  }
  if (!out) throw io_error("failed writing train report to " + path);
}

// ---------------------------------------------------------------------------
// Checkpoints: "STGATCK1" magic, a length-prefixed JSON header (config,
// variant, seed, tensor directory), then each tensor's float64 data raw in
// directory order. Round trips are bit-exact.

inline constexpr char kCheckpointMagic[8] = {'S', 'T', 'G', 'A',
                                             'T', 'C', 'K', '1'};

struct Checkpoint {
  ModelWeights weights;
  ModelConfig config;
  std::uint64_t seed = 0;
};

inline void save_checkpoint(const std::string& path, const ModelWeights& w,
                            const ModelConfig& cfg, std::uint64_t seed) {
  nlohmann::json header;
  header["config"] = cfg;
  header["variant"] = variant_name(w.variant);
  header["seed"] = seed;
  auto params = w.named_parameters();
  nlohmann::json dir = nlohmann::json::array();
  for (const auto& [name, t] : params) {
    dir.push_back({{"name", name}, {"shape", t.shape()}});
  }
  header["tensors"] = dir;
  const std::string hs = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write checkpoint to " + path);
  out.write(kCheckpointMagic, 8);
  const std::uint64_t hlen = hs.size();
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  for (const auto& [name, t] : params) {
    out.write(reinterpret_cast<const char*>(t.values().data()),
              static_cast<std::streamsize>(t.numel() * sizeof(double)));
  }
  if (!out) throw io_error("failed writing checkpoint to " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open checkpoint " + path);
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
    throw io_error("checkpoint " + path + ": bad magic");
  }
  std::uint64_t hlen = 0;
  if (!in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen))) {
    throw io_error("checkpoint " + path + ": truncated header length");
  }
  std::string hs(hlen, '\0');
  if (!in.read(hs.data(), static_cast<std::streamsize>(hlen))) {
    throw io_error("checkpoint " + path + ": truncated header");
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(hs);
  } catch (const nlohmann::json::exception& e) {
    throw io_error("checkpoint " + path + ": corrupt header: " + e.what());
  }

  Checkpoint ck;
  try {
    ck.config = header.at("config").get<ModelConfig>();
    ck.seed = header.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw io_error("checkpoint " + path + ": corrupt header: " + e.what());
  }
  ck.config.validate();
  const Variant variant =
      variant_from_name(header.at("variant").get<std::string>());

  Rng scratch(0);
  ck.weights = init_weights(ck.config, variant, scratch);
  auto params = ck.weights.named_parameters();
  const auto& dir = header.at("tensors");
  if (dir.size() != params.size()) {
    throw io_error("checkpoint " + path + ": expected " +
                   std::to_string(params.size()) + " tensors, found " +
                   std::to_string(dir.size()));
  }
  // Read into a staging copy first so a truncated file leaves no partial
  // weights behind.
  std::vector<std::vector<double>> staged(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::string name = dir[i].at("name").get<std::string>();
    const Shape shape = dir[i].at("shape").get<Shape>();
    if (name != params[i].first || shape != params[i].second.shape()) {
      throw io_error("checkpoint " + path + ": tensor " +
                     std::to_string(i) + " is '" + name + "' " +
                     shape_str(shape) + ", expected '" + params[i].first +
                     "' " + shape_str(params[i].second.shape()));
    }
    staged[i].resize(shape_numel(shape));
    if (!in.read(reinterpret_cast<char*>(staged[i].data()),
                 static_cast<std::streamsize>(staged[i].size() *
                                              sizeof(double)))) {
      throw io_error("checkpoint " + path + ": truncated at tensor '" +
                     name + "'");
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    params[i].second.values_mut() = std::move(staged[i]);
  }
  return ck;
}

}  // namespace stgat
