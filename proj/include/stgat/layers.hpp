#pragma once

#include <cmath>
#include <vector>

#include "stgat/tensor.hpp"

namespace stgat {

// Weights of one Transformer encoder block with model width d and H heads.
// The query/key/value/output projections are stored as [d, d] matrices;
// head h owns the contiguous column block [h*d/H, (h+1)*d/H).
struct TransformerBlockWeights {
  Tensor wq, wk, wv, wo;   // [d, d]
  Tensor ffn_w1, ffn_b1;   // [d, d_ff], [d_ff]
  Tensor ffn_w2, ffn_b2;   // [d_ff, d], [d]
  Tensor ln_gain, ln_bias; // [d]
};

// One graph-attention layer with K identical heads. Each head projects node
// features (width `in`) to width d and scores directed pairs with a length-2d
// attention vector: the first d entries weigh the source node, the last d the
// neighbour.
struct GatLayerWeights {
  std::vector<Tensor> head_w;  // K x [in, d]
  std::vector<Tensor> head_a;  // K x [2d]
};

// Sinusoidal position table: PE[t, 2i] = sin(t / 10000^(2i/d)),
// PE[t, 2i+1] = cos(t / 10000^(2i/d)).
inline Tensor positional_encoding(std::size_t seq_len, std::size_t d_model) {
  if (seq_len == 0) throw config_error("positional_encoding: empty sequence");
  if (d_model % 2 != 0) {
    throw config_error("positional_encoding: model width must be even, got " +
                       std::to_string(d_model));
  }
  Tensor pe = Tensor::zeros({seq_len, d_model});
  double* p = pe.values_mut().data();
  for (std::size_t t = 0; t < seq_len; ++t) {
    for (std::size_t i = 0; 2 * i < d_model; ++i) {
      const double freq =
          std::pow(10000.0, (2.0 * static_cast<double>(i)) /
                                static_cast<double>(d_model));
      const double arg = static_cast<double>(t) / freq;
      p[t * d_model + 2 * i] = std::sin(arg);
      p[t * d_model + 2 * i + 1] = std::cos(arg);
    }
  }
  return pe;
}

struct MhaResult {
  Tensor out;   // [l, n, d]
  Tensor attn;  // [n, H, l, l], rows softmax-normalized over the last axis
};

// Self-attention across the l time steps, run independently for each of the
// n agents: scores = QK^T / sqrt(d/H) with softmax over time, heads
// concatenated and output-projected. Deterministic; the encoder block owns
// dropout.
inline MhaResult multi_head_self_attention_with_attn(
    Tape& tape, const Tensor& x, const TransformerBlockWeights& w,
    std::size_t heads) {
  const std::size_t l = x.dim(0), n = x.dim(1), d = x.dim(2);
  if (heads == 0 || d % heads != 0) {
    throw config_error("multi_head_self_attention: width " +
                       std::to_string(d) + " not divisible by " +
                       std::to_string(heads) + " heads");
  }
  const std::size_t hd = d / heads;

  auto split_heads = [&](const Tensor& proj) {
    // [l, n, d] -> [n, H, l, hd]
    Tensor r = reshape(tape, proj, {l, n, heads, hd});
    return permute(tape, r, {1, 2, 0, 3});
  };

  Tensor q = split_heads(matmul(tape, x, w.wq));
  Tensor k = split_heads(matmul(tape, x, w.wk));
  Tensor v = split_heads(matmul(tape, x, w.wv));

  q = scale(tape, q, 1.0 / std::sqrt(static_cast<double>(hd)));
  Tensor scores = matmul(tape, q, k, false, true);  // [n, H, l, l]
  Tensor attn = softmax_axis(tape, scores, 3);
  Tensor ctx = matmul(tape, attn, v);               // [n, H, l, hd]
  ctx = permute(tape, ctx, {2, 0, 1, 3});           // [l, n, H, hd]
  ctx = reshape(tape, ctx, {l, n, d});
  return {matmul(tape, ctx, w.wo), attn};
}

inline Tensor multi_head_self_attention(Tape& tape, const Tensor& x,
                                        const TransformerBlockWeights& w,
                                        std::size_t heads) {
  return multi_head_self_attention_with_attn(tape, x, w, heads).out;
}

// Position-wise feed-forward: Linear(d -> d_ff), ReLU, Linear(d_ff -> d).
inline Tensor feed_forward(Tape& tape, const Tensor& x,
                           const TransformerBlockWeights& w) {
  Tensor h = add(tape, matmul(tape, x, w.ffn_w1), w.ffn_b1);
  h = relu(tape, h);
  return add(tape, matmul(tape, h, w.ffn_w2), w.ffn_b2);
}

// PE -> MHA -> FNN -> LN with residual connections:
//   h1 = x + PE, h2 = h1 + Dropout(MHA(h1)), h3 = h2 + Dropout(FFN(h2)),
//   out = LN(h3).
// Dropout (rate `dropout_rate`) applies once per sub-layer output in train
// mode; the PE add and the LN carry no dropout.
inline Tensor transformer_encoder_block(Tape& tape, const Tensor& x,
                                        const TransformerBlockWeights& w,
                                        std::size_t heads, double dropout_rate,
                                        bool train, Rng& rng,
                                        double ln_eps = 1e-5) {
  const std::size_t l = x.dim(0), d = x.dim(2);
  Tensor pe = reshape(tape, positional_encoding(l, d), {l, 1, d});
  Tensor h1 = add(tape, x, pe);
  Tensor attn = multi_head_self_attention(tape, h1, w, heads);
  Tensor h2 = add(tape, h1, dropout(tape, attn, dropout_rate, train, rng));
  Tensor ff = feed_forward(tape, h2, w);
  Tensor h3 = add(tape, h2, dropout(tape, ff, dropout_rate, train, rng));
  return layer_norm(tape, h3, w.ln_gain, w.ln_bias, ln_eps);
}

namespace detail {

struct GatHead {
  Tensor z;      // [l, n, d] projected node features
  Tensor alpha;  // [l, n, n] row-normalized attention coefficients
};

inline GatHead gat_head(Tape& tape, const Tensor& h, const Tensor& head_w,
                        const Tensor& head_a, double leaky_slope) {
  const std::size_t l = h.dim(0), n = h.dim(1);
  if (n == 0) throw config_error("gat: no nodes");
  const std::size_t d = head_w.shape()[1];
  if (head_a.numel() != 2 * d) {
    throw config_error("gat: attention vector length " +
                       std::to_string(head_a.numel()) + " != 2*" +
                       std::to_string(d));
  }
  Tensor z = matmul(tape, h, head_w);
  // a^T [z_i || z_j] = <a_src, z_i> + <a_dst, z_j>
  Tensor a_src = reshape(tape, slice_axis(tape, head_a, 0, 0, d), {d, 1});
  Tensor a_dst = reshape(tape, slice_axis(tape, head_a, 0, d, d), {d, 1});
  Tensor s_src = reshape(tape, matmul(tape, z, a_src), {l, n, 1});
  Tensor s_dst = reshape(tape, matmul(tape, z, a_dst), {l, 1, n});
  Tensor e = leaky_relu(tape, add(tape, s_src, s_dst), leaky_slope);
  return {z, softmax_axis(tape, e, 2)};
}

}  // namespace detail

// Attention coefficients of a single GAT head over the complete graph with
// self-loops, computed independently at every time step:
//   z_i = W h_i,  e_ij = LeakyReLU(a^T [z_i || z_j]),
//   alpha_ij = softmax_j(e_ij).
// Returns [l, n, n]; each [n, n] slice is row-normalized.
inline Tensor gat_attention_coefficients(Tape& tape, const Tensor& h,
                                         const Tensor& head_w,
                                         const Tensor& head_a,
                                         double leaky_slope = 0.2) {
  return detail::gat_head(tape, h, head_w, head_a, leaky_slope).alpha;
}

// Full GAT layer: per head h'_i = sum_j alpha_ij W h_j, heads fused by
// arithmetic mean over K, then Sigmoid. Output lies strictly in (0, 1).
// Train mode drops attention coefficients at `attn_dropout` before use.
inline Tensor gat_layer_forward(Tape& tape, const Tensor& h,
                                const GatLayerWeights& w, double leaky_slope,
                                double attn_dropout, bool train, Rng& rng) {
  if (w.head_w.empty()) throw config_error("gat_layer_forward: no heads");
  Tensor acc;
  for (std::size_t k = 0; k < w.head_w.size(); ++k) {
    auto head =
        detail::gat_head(tape, h, w.head_w[k], w.head_a[k], leaky_slope);
    Tensor alpha = dropout(tape, head.alpha, attn_dropout, train, rng);
    Tensor agg = matmul(tape, alpha, head.z);  // [l, n, d]
    acc = k == 0 ? agg : add(tape, acc, agg);
  }
  acc = scale(tape, acc, 1.0 / static_cast<double>(w.head_w.size()));
  return sigmoid(tape, acc);
}

}  // namespace stgat
