#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "stgat/gradcheck.hpp"
#include "stgat/layers.hpp"

using namespace stgat;

namespace {

TransformerBlockWeights make_block(std::size_t d, std::size_t d_ff, Rng& rng) {
  TransformerBlockWeights w;
  const double lim = 0.4;
  w.wq = Tensor::uniform({d, d}, -lim, lim, rng).set_requires_grad(true);
  w.wk = Tensor::uniform({d, d}, -lim, lim, rng).set_requires_grad(true);
  w.wv = Tensor::uniform({d, d}, -lim, lim, rng).set_requires_grad(true);
  w.wo = Tensor::uniform({d, d}, -lim, lim, rng).set_requires_grad(true);
  w.ffn_w1 = Tensor::uniform({d, d_ff}, -lim, lim, rng).set_requires_grad(true);
  w.ffn_b1 = Tensor::zeros({d_ff}).set_requires_grad(true);
  w.ffn_w2 = Tensor::uniform({d_ff, d}, -lim, lim, rng).set_requires_grad(true);
  w.ffn_b2 = Tensor::zeros({d}).set_requires_grad(true);
  w.ln_gain = Tensor::filled({d}, 1.0).set_requires_grad(true);
  w.ln_bias = Tensor::zeros({d}).set_requires_grad(true);
  return w;
}

GatLayerWeights make_gat(std::size_t heads, std::size_t in, std::size_t d,
                         Rng& rng) {
  GatLayerWeights w;
  for (std::size_t k = 0; k < heads; ++k) {
    w.head_w.push_back(
        Tensor::uniform({in, d}, -0.5, 0.5, rng).set_requires_grad(true));
    w.head_a.push_back(
        Tensor::uniform({2 * d}, -0.5, 0.5, rng).set_requires_grad(true));
  }
  return w;
}

// Reorders the fighter axis (axis 1) of an [l, n, c] tensor.
Tensor permute_fighters(const Tensor& x, const std::vector<std::size_t>& perm) {
  const std::size_t l = x.dim(0), n = x.dim(1), c = x.dim(2);
  Tensor out = Tensor::zeros(x.shape());
  double* po = out.values_mut().data();
  const double* px = x.values().data();
  for (std::size_t t = 0; t < l; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < c; ++k) {
        po[(t * n + i) * c + k] = px[(t * n + perm[i]) * c + k];
      }
    }
  }
  return out;
}

}  // namespace

TEST_CASE("positional encoding reference values") {
  Tensor pe = positional_encoding(4, 24);
  REQUIRE(pe.shape() == Shape{4, 24});
  REQUIRE(pe.values()[0] == 0.0);                      // sin(0)
  REQUIRE(pe.values()[1] == 1.0);                      // cos(0)
  REQUIRE(pe.values()[24] == Catch::Approx(0.8414709848).epsilon(1e-9));
  REQUIRE_THROWS_AS(positional_encoding(4, 7), config_error);
  REQUIRE_THROWS_AS(positional_encoding(0, 8), config_error);
}

TEST_CASE("single-step attention collapses to output projection of V") {
  Rng rng(2);
  const std::size_t d = 8, n = 3;
  auto w = make_block(d, 16, rng);
  Tape tape(false);
  Tensor x = Tensor::uniform({1, n, d}, -1, 1, rng);
  auto res = multi_head_self_attention_with_attn(tape, x, w, 4);
  REQUIRE(res.attn.shape() == Shape{n, 4, 1, 1});
  for (double a : res.attn.values()) REQUIRE(a == Catch::Approx(1.0));

  Tensor v = matmul(tape, x, w.wv);
  Tensor want = matmul(tape, v, w.wo);
  for (std::size_t i = 0; i < want.numel(); ++i) {
    REQUIRE(res.out.values()[i] == Catch::Approx(want.values()[i]).margin(1e-12));
  }
}

TEST_CASE("identical features across time give uniform attention rows") {
  Rng rng(4);
  const std::size_t l = 6, n = 2, d = 8;
  auto w = make_block(d, 16, rng);
  Tensor step = Tensor::uniform({1, n, d}, -1, 1, rng);
  Tensor x = Tensor::zeros({l, n, d});
  for (std::size_t t = 0; t < l; ++t) {
    std::copy(step.values().begin(), step.values().end(),
              x.values_mut().begin() + t * n * d);
  }
  Tape tape(false);
  auto res = multi_head_self_attention_with_attn(tape, x, w, 2);
  for (double a : res.attn.values()) {
    REQUIRE(a == Catch::Approx(1.0 / l).margin(1e-12));
  }
}

TEST_CASE("attention rows sum to one for random input") {
  Rng rng(8);
  const std::size_t l = 8, n = 4, d = 24;
  auto w = make_block(d, 96, rng);
  Tape tape(false);
  Tensor x = Tensor::uniform({l, n, d}, -2, 2, rng);
  auto res = multi_head_self_attention_with_attn(tape, x, w, 4);
  REQUIRE(res.attn.shape() == Shape{n, 4, l, l});
  const double* pa = res.attn.values().data();
  for (std::size_t row = 0; row < n * 4 * l; ++row) {
    double sum = 0.0;
    for (std::size_t k = 0; k < l; ++k) sum += pa[row * l + k];
    REQUIRE(std::abs(sum - 1.0) < 1e-9);
  }

  REQUIRE_THROWS_AS(multi_head_self_attention(tape, x, w, 5), config_error);
}

TEST_CASE("temporal attention keeps fighters separated") {
  Rng rng(16);
  const std::size_t l = 8, n = 4, d = 24;
  auto w = make_block(d, 96, rng);
  Tape tape(false);
  Tensor x = Tensor::uniform({l, n, d}, -1, 1, rng);
  Tensor y = multi_head_self_attention(tape, x, w, 4);

  Tensor x2 = x.clone();
  for (std::size_t t = 0; t < l; ++t) {
    for (std::size_t k = 0; k < d; ++k) {
      x2.values_mut()[(t * n + 2) * d + k] += 3.7;  // perturb fighter 2 only
    }
  }
  Tensor y2 = multi_head_self_attention(tape, x2, w, 4);
  for (std::size_t t = 0; t < l; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      if (i == 2) continue;
      for (std::size_t k = 0; k < d; ++k) {
        REQUIRE(y.values()[(t * n + i) * d + k] ==
                y2.values()[(t * n + i) * d + k]);
      }
    }
  }
}

TEST_CASE("feed-forward degenerate weights") {
  Rng rng(5);
  const std::size_t d = 4;
  TransformerBlockWeights w;
  w.ffn_w1 = Tensor::zeros({d, d});
  w.ffn_b1 = Tensor::zeros({d});
  w.ffn_w2 = Tensor::zeros({d, d});
  w.ffn_b2 = Tensor::from({d}, {1.5, -2.0, 0.0, 3.25});
  Tape tape(false);
  Tensor x = Tensor::uniform({3, 2, d}, -1, 1, rng);
  Tensor y = feed_forward(tape, x, w);
  for (std::size_t row = 0; row < 6; ++row) {
    for (std::size_t k = 0; k < d; ++k) {
      REQUIRE(y.values()[row * d + k] == w.ffn_b2.values()[k]);
    }
  }

  // identity weights with d_ff == d pass positive inputs through untouched
  Tensor eye = Tensor::zeros({d, d});
  for (std::size_t i = 0; i < d; ++i) eye.values_mut()[i * d + i] = 1.0;
  w.ffn_w1 = eye;
  w.ffn_w2 = eye;
  w.ffn_b2 = Tensor::zeros({d});
  Tensor pos = Tensor::uniform({3, 2, d}, 0.1, 2.0, rng);
  Tensor idy = feed_forward(tape, pos, w);
  for (std::size_t i = 0; i < pos.numel(); ++i) {
    REQUIRE(idy.values()[i] == Catch::Approx(pos.values()[i]).margin(1e-12));
  }
}

TEST_CASE("feed-forward gradient vs finite differences") {
  Rng rng(6);
  const std::size_t d = 6;
  auto w = make_block(d, 12, rng);
  Tensor x = Tensor::uniform({2, 2, d}, 0.2, 1.2, rng);
  const double err = finite_diff_check(
      [&](Tape& t, const Tensor& in) {
        Tensor y = feed_forward(t, in, w);
        return mean_all(t, mul(t, y, y));
      },
      x);
  REQUIRE(err < 1e-4);
}

TEST_CASE("encoder block shape contract and eval determinism") {
  Rng rng(9);
  auto w = make_block(24, 96, rng);
  Rng drop_rng(0);
  {
    Tape tape(false);
    Tensor x = Tensor::uniform({8, 4, 24}, -1, 1, rng);
    Tensor y = transformer_encoder_block(tape, x, w, 4, 0.1, false, drop_rng);
    REQUIRE(y.shape() == Shape{8, 4, 24});

    Tensor y2 = transformer_encoder_block(tape, x, w, 4, 0.1, false, drop_rng);
    REQUIRE(y.values() == y2.values());  // bitwise
  }
  {
    Tape tape(false);
    Tensor x = Tensor::uniform({200, 2, 24}, -1, 1, rng);
    Tensor y = transformer_encoder_block(tape, x, w, 4, 0.1, false, drop_rng);
    REQUIRE(y.shape() == Shape{200, 2, 24});
  }
}

TEST_CASE("encoder block gradient flows through all weights") {
  Rng rng(10);
  const std::size_t d = 8;
  auto w = make_block(d, 16, rng);
  Tensor x = Tensor::uniform({3, 2, d}, -1, 1, rng);
  Rng drop_rng(0);
  const double err = finite_diff_check(
      [&](Tape& t, const Tensor& in) {
        Tensor y = transformer_encoder_block(t, in, w, 2, 0.0, false, drop_rng);
        return mean_all(t, mul(t, y, y));
      },
      x);
  REQUIRE(err < 1e-4);
}

TEST_CASE("gat coefficients: symmetry, single node, row sums") {
  Rng rng(12);
  Tape tape(false);
  Tensor w = Tensor::uniform({3, 24}, -0.5, 0.5, rng);
  Tensor a = Tensor::uniform({48}, -0.5, 0.5, rng);

  // identical node features -> uniform 1/n everywhere
  const std::size_t l = 5, n = 4;
  Tensor h = Tensor::zeros({l, n, 3});
  for (std::size_t t = 0; t < l; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      h.values_mut()[(t * n + i) * 3 + 0] = 0.3 * t;
      h.values_mut()[(t * n + i) * 3 + 1] = -0.1;
      h.values_mut()[(t * n + i) * 3 + 2] = 0.7;
    }
  }
  Tensor alpha = gat_attention_coefficients(tape, h, w, a);
  REQUIRE(alpha.shape() == Shape{l, n, n});
  for (double v : alpha.values()) {
    REQUIRE(v == Catch::Approx(1.0 / n).margin(1e-12));
  }

  Tensor h1 = Tensor::uniform({l, 1, 3}, -1, 1, rng);
  Tensor alpha1 = gat_attention_coefficients(tape, h1, w, a);
  for (double v : alpha1.values()) REQUIRE(v == 1.0);

  Tensor hr = Tensor::uniform({l, n, 3}, -2, 2, rng);
  Tensor ar = gat_attention_coefficients(tape, hr, w, a);
  const double* pa = ar.values().data();
  for (std::size_t row = 0; row < l * n; ++row) {
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) sum += pa[row * n + j];
    REQUIRE(std::abs(sum - 1.0) < 1e-9);
  }
}

TEST_CASE("gat coefficients are computed per time step") {
  Rng rng(14);
  Tape tape(false);
  Tensor w = Tensor::uniform({3, 24}, -0.5, 0.5, rng);
  Tensor a = Tensor::uniform({48}, -0.5, 0.5, rng);
  const std::size_t l = 6, n = 3;
  Tensor h = Tensor::uniform({l, n, 3}, -1, 1, rng);
  Tensor alpha = gat_attention_coefficients(tape, h, w, a);

  Tensor h2 = h.clone();
  for (std::size_t i = 0; i < n * 3; ++i) {
    h2.values_mut()[4 * n * 3 + i] = 9.0;  // rewrite time step 4
  }
  Tensor alpha2 = gat_attention_coefficients(tape, h2, w, a);
  for (std::size_t t = 0; t < l; ++t) {
    if (t == 4) continue;
    for (std::size_t i = 0; i < n * n; ++i) {
      REQUIRE(alpha.values()[t * n * n + i] == alpha2.values()[t * n * n + i]);
    }
  }
}

TEST_CASE("gat layer output shape, range and permutation equivariance") {
  Rng rng(18);
  const std::size_t l = 8, n = 4;
  auto w = make_gat(4, 3, 24, rng);
  Rng drop_rng(0);
  Tape tape(false);
  Tensor h = Tensor::uniform({l, n, 3}, -2, 2, rng);
  Tensor y = gat_layer_forward(tape, h, w, 0.2, 0.1, false, drop_rng);
  REQUIRE(y.shape() == Shape{l, n, 24});
  for (double v : y.values()) {
    REQUIRE(v > 0.0);
    REQUIRE(v < 1.0);
  }

  for (int rep = 0; rep < 5; ++rep) {
    std::vector<std::size_t> perm = {0, 1, 2, 3};
    rng.shuffle(perm);
    Tensor hp = permute_fighters(h, perm);
    Tensor yp = gat_layer_forward(tape, hp, w, 0.2, 0.1, false, drop_rng);
    Tensor want = permute_fighters(y, perm);
    for (std::size_t i = 0; i < want.numel(); ++i) {
      REQUIRE(std::abs(yp.values()[i] - want.values()[i]) < 1e-9);
    }
  }
}

TEST_CASE("gat layer gradient vs finite differences") {
  Rng rng(20);
  auto w = make_gat(2, 3, 6, rng);
  Rng drop_rng(0);
  Tensor h = Tensor::uniform({3, 3, 3}, -1, 1, rng);
  const double err = finite_diff_check(
      [&](Tape& t, const Tensor& in) {
        Tensor y = gat_layer_forward(t, in, w, 0.2, 0.0, false, drop_rng);
        return mean_all(t, mul(t, y, y));
      },
      h);
  REQUIRE(err < 1e-4);
}
