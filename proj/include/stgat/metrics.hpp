#pragma once

#include <nlohmann/json.hpp>

#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "stgat/data.hpp"
#include "stgat/hash.hpp"
#include "stgat/model.hpp"

namespace stgat {

// Average displacement error: mean over fighters and predicted steps of the
// Euclidean distance between truth and prediction. Inputs are [H, n, 3] km.
inline double ade(const Tensor& truth, const Tensor& pred) {
  if (truth.shape() != pred.shape() || truth.rank() != 3 ||
      truth.dim(2) != 3) {
    throw config_error("ade: shapes " + shape_str(truth.shape()) + " and " +
                       shape_str(pred.shape()) +
                       " must match and be [H, n, 3]");
  }
  const std::size_t H = truth.dim(0), n = truth.dim(1);
  const double* pt = truth.values().data();
  const double* pp = pred.values().data();
  double sum = 0.0;
  for (std::size_t t = 0; t < H; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t base = (t * n + i) * 3;
      const double dx = pt[base] - pp[base];
      const double dy = pt[base + 1] - pp[base + 1];
      const double dz = pt[base + 2] - pp[base + 2];
      sum += std::sqrt(dx * dx + dy * dy + dz * dz);
    }
  }
  return sum / static_cast<double>(H * n);
}

// Final displacement error: mean over fighters of the Euclidean distance at
// the last predicted step only. Equals ade when H == 1.
inline double fde(const Tensor& truth, const Tensor& pred) {
  if (truth.shape() != pred.shape() || truth.rank() != 3 ||
      truth.dim(2) != 3) {
    throw config_error("fde: shapes " + shape_str(truth.shape()) + " and " +
                       shape_str(pred.shape()) +
                       " must match and be [H, n, 3]");
  }
  const std::size_t H = truth.dim(0), n = truth.dim(1);
  const double* pt = truth.values().data();
  const double* pp = pred.values().data();
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t base = ((H - 1) * n + i) * 3;
    const double dx = pt[base] - pp[base];
    const double dy = pt[base + 1] - pp[base + 1];
    const double dz = pt[base + 2] - pp[base + 2];
    sum += std::sqrt(dx * dx + dy * dy + dz * dz);
  }
  return sum / static_cast<double>(n);
}

struct GroupMetrics {
  double ade_km = 0.0;
  double fde_km = 0.0;
  std::size_t windows = 0;
};

struct MetricsReport {
  std::size_t horizon = 1;
  std::map<std::string, GroupMetrics> groups;  // keyed by scenario label
  GroupMetrics overall;
  std::string config_fingerprint;
};

// Extracts the [count, n, 3] absolute-position block starting at `start`.
inline Tensor positions_block(const Engagement& e, std::size_t start,
                              std::size_t count) {
  const std::size_t n = e.fighters.size();
  Tensor out = Tensor::zeros({count, n, 3});
  double* po = out.values_mut().data();
  for (std::size_t t = 0; t < count; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      const FighterState& s = e.fighters[i].states[start + t];
      po[(t * n + i) * 3 + 0] = s.x;
      po[(t * n + i) * 3 + 1] = s.y;
      po[(t * n + i) * 3 + 2] = s.z;
    }
  }
  return out;
}

namespace detail {

using RolloutFn =
    std::function<Tensor(const Tensor& history /*[l,n,3] km*/)>;

// Shared evaluation walk: every valid window of every engagement, predictions
// from `predict`, ADE/FDE aggregated per scenario group as the mean over
// windows. Kept predictor-agnostic so tests can inject oracles.
inline MetricsReport evaluate_with_rollout(
    const std::vector<Engagement>& engagements, std::size_t l,
    std::size_t horizon, const RolloutFn& predict) {
  if (horizon < 1) throw config_error("evaluate: horizon must be >= 1");
  MetricsReport report;
  report.horizon = horizon;
  double overall_ade = 0.0, overall_fde = 0.0;
  std::map<std::string, std::pair<double, double>> sums;
  for (const Engagement& e : engagements) {
    if (e.length() < l + horizon) {
      throw config_error("evaluate: engagement " + e.id + " has " +
                         std::to_string(e.length()) +
                         " steps, need at least " +
                         std::to_string(l + horizon));
    }
    for (std::size_t s = 0; s + l + horizon <= e.length(); ++s) {
      Tensor history = positions_block(e, s, l);
      Tensor truth = positions_block(e, s + l, horizon);
      Tensor pred = predict(history);
      const double a = ade(truth, pred);
      const double f = fde(truth, pred);
      auto& [sa, sf] = sums[e.scenario_label()];
      sa += a;
      sf += f;
      report.groups[e.scenario_label()].windows += 1;
      overall_ade += a;
      overall_fde += f;
      report.overall.windows += 1;
    }
  }
  for (auto& [label, g] : report.groups) {
    g.ade_km = sums[label].first / static_cast<double>(g.windows);
    g.fde_km = sums[label].second / static_cast<double>(g.windows);
  }
  if (report.overall.windows > 0) {
    report.overall.ade_km =
        overall_ade / static_cast<double>(report.overall.windows);
    report.overall.fde_km =
        overall_fde / static_cast<double>(report.overall.windows);
  }
  return report;
}

}  // namespace detail

inline std::string config_fingerprint(const ModelWeights& w,
                                      const ModelConfig& cfg) {
  nlohmann::json j;
  j["config"] = cfg;
  j["variant"] = variant_name(w.variant);
  std::uint64_t h = fnv1a64(j.dump());
  for (const auto& [name, t] : w.named_parameters()) {
    h = fnv1a64(name, h);
    h = fnv1a64(t.values().data(), t.numel() * sizeof(double), h);
  }
  return hex64(h);
}

// Autoregressive evaluation of a trained model over every valid window of the
// test engagements. Deterministic (eval mode only).
inline MetricsReport evaluate_model(const ModelWeights& w,
                                    const ModelConfig& cfg,
                                    const std::vector<Engagement>& test,
                                    std::size_t horizon) {
  MetricsReport report = detail::evaluate_with_rollout(
      test, cfg.history_len, horizon,
      [&](const Tensor& history) { return rollout(history, horizon, w, cfg); });
  report.config_fingerprint = config_fingerprint(w, cfg);
  return report;
}

inline void to_json(nlohmann::json& j, const GroupMetrics& g) {
  j = nlohmann::json{
      {"ade_km", g.ade_km}, {"fde_km", g.fde_km}, {"windows", g.windows}};
}

inline void to_json(nlohmann::json& j, const MetricsReport& r) {
  j = nlohmann::json{{"horizon", r.horizon},
                     {"config_fingerprint", r.config_fingerprint},
                     {"groups", r.groups},
                     {"overall", r.overall}};
  if (r.horizon == 1) j["note"] = "single-step horizon: ADE == FDE";
}

inline void write_metrics_report(const std::string& path,
                                 const MetricsReport& r) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write metrics report to " + path);
  nlohmann::json j = r;
  out << j.dump(2) << '\n';
  if (!out) throw io_error("failed writing metrics report to " + path);
}

}  // namespace stgat
