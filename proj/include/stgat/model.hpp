#pragma once

#include <nlohmann/json.hpp>

#include <string>
#include <utility>
#include <vector>

#include "stgat/layers.hpp"
#include "stgat/tensor.hpp"
#include "stgat/window.hpp"

namespace stgat {

// Raw per-step fighter features fed to the network: x, y, z position.
inline constexpr std::size_t kInputWidth = 3;
inline constexpr std::size_t kOutputWidth = 3;

enum class Variant { kFull, kTransformerOnly, kGatOnly };

inline std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kFull: return "full";
    case Variant::kTransformerOnly: return "transformer_only";
    case Variant::kGatOnly: return "gat_only";
  }
  return "full";
}

inline Variant variant_from_name(const std::string& s) {
  if (s == "full") return Variant::kFull;
  if (s == "transformer_only" || s == "transformer")
    return Variant::kTransformerOnly;
  if (s == "gat_only" || s == "gat") return Variant::kGatOnly;
  throw config_error("unknown variant '" + s +
                     "' (expected full, transformer or gat)");
}

struct ModelConfig {
  std::size_t history_len = 8;     // l
  std::size_t d_model = 24;        // width of both branch outputs
  std::size_t heads = 4;           // temporal attention heads
  double dropout = 0.1;            // MHA/FNN output dropout
  std::size_t encoder_blocks = 1;
  std::size_t gat_heads = 4;       // K
  std::size_t d_ff = 96;
  std::size_t decoder_hidden = 64;
  std::size_t n_max = 8;
  double leaky_slope = 0.2;
  double ln_eps = 1e-5;
  double norm_scale_km = 1.0;

  void validate() const {
    if (history_len < 1) throw config_error("config: history_len must be >= 1");
    if (heads == 0 || d_model % heads != 0) {
      throw config_error("config: d_model " + std::to_string(d_model) +
                         " not divisible by heads " + std::to_string(heads));
    }
    if (d_model == 0 || d_ff == 0 || decoder_hidden == 0 || gat_heads == 0 ||
        encoder_blocks == 0 || n_max == 0) {
      throw config_error("config: all widths/counts must be positive");
    }
    if (!(dropout >= 0.0 && dropout < 1.0)) {
      throw config_error("config: dropout must lie in [0,1)");
    }
    if (!(leaky_slope > 0.0 && leaky_slope < 1.0)) {
      throw config_error("config: leaky_slope must lie in (0,1)");
    }
    if (!(norm_scale_km > 0.0)) {
      throw config_error("config: norm_scale_km must be positive");
    }
  }

  // Width of the fused per-step feature entering the decoder.
  std::size_t fused_width(Variant v) const {
    return v == Variant::kFull ? 2 * d_model : d_model;
  }
  std::size_t decoder_input(Variant v) const {
    return history_len * fused_width(v);
  }
};

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"history_len", c.history_len},
                     {"d_model", c.d_model},
                     {"heads", c.heads},
                     {"dropout", c.dropout},
                     {"encoder_blocks", c.encoder_blocks},
                     {"gat_heads", c.gat_heads},
                     {"d_ff", c.d_ff},
                     {"decoder_hidden", c.decoder_hidden},
                     {"n_max", c.n_max},
                     {"leaky_slope", c.leaky_slope},
                     {"ln_eps", c.ln_eps},
                     {"norm_scale_km", c.norm_scale_km}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  ModelConfig defaults;
  c.history_len = j.value("history_len", defaults.history_len);
  c.d_model = j.value("d_model", defaults.d_model);
  c.heads = j.value("heads", defaults.heads);
  c.dropout = j.value("dropout", defaults.dropout);
  c.encoder_blocks = j.value("encoder_blocks", defaults.encoder_blocks);
  c.gat_heads = j.value("gat_heads", defaults.gat_heads);
  c.d_ff = j.value("d_ff", defaults.d_ff);
  c.decoder_hidden = j.value("decoder_hidden", defaults.decoder_hidden);
  c.n_max = j.value("n_max", defaults.n_max);
  c.leaky_slope = j.value("leaky_slope", defaults.leaky_slope);
  c.ln_eps = j.value("ln_eps", defaults.ln_eps);
  c.norm_scale_km = j.value("norm_scale_km", defaults.norm_scale_km);
}

// All learnable parameters. Only the tensors a variant actually uses are
// materialized: the temporal side (FC1 + encoder blocks), the spatial side
// (FC2 + GAT), and always the decoder.
struct ModelWeights {
  Variant variant = Variant::kFull;
  Tensor fc1_w, fc1_b;  // 3 -> d_model, temporal embedding
  Tensor fc2_w, fc2_b;  // 3 -> 3, spatial pre-transform
  std::vector<TransformerBlockWeights> blocks;
  GatLayerWeights gat;
  Tensor dec_w1, dec_b1;  // l*fused -> decoder_hidden
  Tensor dec_w2, dec_b2;  // decoder_hidden -> 3

  bool has_temporal() const { return variant != Variant::kGatOnly; }
  bool has_spatial() const { return variant != Variant::kTransformerOnly; }

  std::vector<std::pair<std::string, Tensor>> named_parameters() const {
    std::vector<std::pair<std::string, Tensor>> out;
    if (has_temporal()) {
      out.emplace_back("fc1_w", fc1_w);
      out.emplace_back("fc1_b", fc1_b);
      for (std::size_t i = 0; i < blocks.size(); ++i) {
        const std::string p = "block" + std::to_string(i) + ".";
        const TransformerBlockWeights& b = blocks[i];
        out.emplace_back(p + "wq", b.wq);
        out.emplace_back(p + "wk", b.wk);
        out.emplace_back(p + "wv", b.wv);
        out.emplace_back(p + "wo", b.wo);
        out.emplace_back(p + "ffn_w1", b.ffn_w1);
        out.emplace_back(p + "ffn_b1", b.ffn_b1);
        out.emplace_back(p + "ffn_w2", b.ffn_w2);
        out.emplace_back(p + "ffn_b2", b.ffn_b2);
        out.emplace_back(p + "ln_gain", b.ln_gain);
        out.emplace_back(p + "ln_bias", b.ln_bias);
      }
    }
    if (has_spatial()) {
      out.emplace_back("fc2_w", fc2_w);
      out.emplace_back("fc2_b", fc2_b);
      for (std::size_t k = 0; k < gat.head_w.size(); ++k) {
        const std::string p = "gat.h" + std::to_string(k) + ".";
        out.emplace_back(p + "w", gat.head_w[k]);
        out.emplace_back(p + "a", gat.head_a[k]);
      }
    }
    out.emplace_back("dec_w1", dec_w1);
    out.emplace_back("dec_b1", dec_b1);
    out.emplace_back("dec_w2", dec_w2);
    out.emplace_back("dec_b2", dec_b2);
    return out;
  }
};

inline std::size_t count_parameters(const ModelWeights& w) {
  std::size_t n = 0;
  for (const auto& [name, t] : w.named_parameters()) n += t.numel();
  return n;
}

namespace detail {

inline Tensor xavier(Shape shape, std::size_t fan_in, std::size_t fan_out,
                     Rng& rng) {
  const double limit =
      std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t = Tensor::uniform(std::move(shape), -limit, limit, rng);
  t.set_requires_grad(true);
  return t;
}

inline Tensor zero_param(Shape shape) {
  Tensor t = Tensor::zeros(std::move(shape));
  t.set_requires_grad(true);
  return t;
}

inline Tensor one_param(Shape shape) {
  Tensor t = Tensor::filled(std::move(shape), 1.0);
  t.set_requires_grad(true);
  return t;
}

}  // namespace detail

// Xavier-uniform initialization, biases zero, layer-norm gain one.
// Deterministic for a given seed: tensors are drawn in a fixed order.
inline ModelWeights init_weights(const ModelConfig& cfg, Variant variant,
                                 Rng& rng) {
  cfg.validate();
  const std::size_t d = cfg.d_model;
  ModelWeights w;
  w.variant = variant;
  if (variant != Variant::kGatOnly) {
    w.fc1_w = detail::xavier({kInputWidth, d}, kInputWidth, d, rng);
    w.fc1_b = detail::zero_param({d});
    w.blocks.resize(cfg.encoder_blocks);
    for (TransformerBlockWeights& b : w.blocks) {
      b.wq = detail::xavier({d, d}, d, d, rng);
      b.wk = detail::xavier({d, d}, d, d, rng);
      b.wv = detail::xavier({d, d}, d, d, rng);
      b.wo = detail::xavier({d, d}, d, d, rng);
      b.ffn_w1 = detail::xavier({d, cfg.d_ff}, d, cfg.d_ff, rng);
      b.ffn_b1 = detail::zero_param({cfg.d_ff});
      b.ffn_w2 = detail::xavier({cfg.d_ff, d}, cfg.d_ff, d, rng);
      b.ffn_b2 = detail::zero_param({d});
      b.ln_gain = detail::one_param({d});
      b.ln_bias = detail::zero_param({d});
    }
  }
  if (variant != Variant::kTransformerOnly) {
    w.fc2_w = detail::xavier({kInputWidth, kInputWidth}, kInputWidth,
                             kInputWidth, rng);
    w.fc2_b = detail::zero_param({kInputWidth});
    for (std::size_t k = 0; k < cfg.gat_heads; ++k) {
      w.gat.head_w.push_back(detail::xavier({kInputWidth, d}, kInputWidth, d, rng));
      w.gat.head_a.push_back(detail::xavier({2 * d}, 2 * d, 1, rng));
    }
  }
  const std::size_t dec_in = cfg.decoder_input(variant);
  w.dec_w1 = detail::xavier({dec_in, cfg.decoder_hidden}, dec_in,
                            cfg.decoder_hidden, rng);
  w.dec_b1 = detail::zero_param({cfg.decoder_hidden});
  w.dec_w2 = detail::xavier({cfg.decoder_hidden, kOutputWidth},
                            cfg.decoder_hidden, kOutputWidth, rng);
  w.dec_b2 = detail::zero_param({kOutputWidth});
  return w;
}

// FC1-embedded history through the encoder blocks. Output [l, n, d_model].
inline Tensor temporal_branch(Tape& tape, const Tensor& history,
                              const ModelWeights& w, const ModelConfig& cfg,
                              bool train, Rng& rng) {
  Tensor h = add(tape, matmul(tape, history, w.fc1_w), w.fc1_b);
  for (const TransformerBlockWeights& b : w.blocks) {
    h = transformer_encoder_block(tape, h, b, cfg.heads, cfg.dropout, train,
                                  rng, cfg.ln_eps);
  }
  return h;
}

// FC2 pre-transform followed by the GAT layer. Output [l, n, d_model].
inline Tensor spatial_branch(Tape& tape, const Tensor& history,
                             const ModelWeights& w, const ModelConfig& cfg,
                             bool train, Rng& rng) {
  Tensor h = add(tape, matmul(tape, history, w.fc2_w), w.fc2_b);
  return gat_layer_forward(tape, h, w.gat, cfg.leaky_slope, cfg.dropout,
                           train, rng);
}

// One-step prediction from a normalized [l, n, 3] history: branch features
// are concatenated per time step, flattened per fighter across time, and
// decoded by a two-layer MLP into an [n, 3] displacement (normalized units).
inline Tensor predict_step(Tape& tape, const Tensor& history,
                           const ModelWeights& w, const ModelConfig& cfg,
                           bool train, Rng& rng) {
  if (history.rank() != 3 || history.dim(2) != kInputWidth) {
    throw config_error("predict_step: expected [l, n, 3], got " +
                       shape_str(history.shape()));
  }
  const std::size_t l = history.dim(0), n = history.dim(1);
  if (l != cfg.history_len) {
    throw config_error("predict_step: history length " + std::to_string(l) +
                       " != configured " + std::to_string(cfg.history_len));
  }
  if (n < 1 || n > cfg.n_max) {
    throw config_error("predict_step: fighter count " + std::to_string(n) +
                       " outside [1, " + std::to_string(cfg.n_max) + "]");
  }

  Tensor fused;
  switch (w.variant) {
    case Variant::kFull: {
      Tensor temporal = temporal_branch(tape, history, w, cfg, train, rng);
      Tensor spatial = spatial_branch(tape, history, w, cfg, train, rng);
      fused = concat_axis(tape, {temporal, spatial}, 2);  // [l, n, 2d]
      break;
    }
    case Variant::kTransformerOnly:
      fused = temporal_branch(tape, history, w, cfg, train, rng);
      break;
    case Variant::kGatOnly:
      fused = spatial_branch(tape, history, w, cfg, train, rng);
      break;
  }

  // [l, n, f] -> [n, l*f]: one flat feature vector per fighter.
  Tensor per_fighter = permute(tape, fused, {1, 0, 2});
  Tensor flat = reshape(tape, per_fighter, {n, l * cfg.fused_width(w.variant)});
  Tensor hidden = relu(tape, add(tape, matmul(tape, flat, w.dec_w1), w.dec_b1));
  return add(tape, matmul(tape, hidden, w.dec_w2), w.dec_b2);
}

// Sliding-window autoregressive rollout (inference only): predict one step,
// de-normalize, append it to the window, drop the oldest step, repeat.
// `history` holds absolute km coordinates; so does the [H, n, 3] result.
inline Tensor rollout(const Tensor& history, std::size_t horizon,
                      const ModelWeights& w, const ModelConfig& cfg) {
  if (horizon < 1) throw config_error("rollout: horizon must be >= 1");
  if (history.rank() != 3 || history.dim(0) != cfg.history_len ||
      history.dim(2) != kInputWidth) {
    throw config_error("rollout: expected [" +
                       std::to_string(cfg.history_len) + ", n, 3], got " +
                       shape_str(history.shape()));
  }
  const std::size_t l = cfg.history_len, n = history.dim(1);
  std::vector<double> window = history.values();
  Tensor out = Tensor::zeros({horizon, n, 3});
  double* po = out.values_mut().data();
  Rng rng(0);  // never drawn from in eval mode
  for (std::size_t step = 0; step < horizon; ++step) {
    Tensor win = Tensor::from({l, n, 3}, window);
    auto [norm_hist, rec] = normalize_window(win, cfg.norm_scale_km);
    Tape tape(false);
    Tensor pred = predict_step(tape, norm_hist, w, cfg, false, rng);
    Tensor abs = denormalize(pred, rec);
    std::copy(abs.values().begin(), abs.values().end(), po + step * n * 3);
    // slide: drop oldest step, append the prediction
    std::copy(window.begin() + n * 3, window.end(), window.begin());
    std::copy(abs.values().begin(), abs.values().end(),
              window.end() - n * 3);
  }
  return out;
}

}  // namespace stgat
