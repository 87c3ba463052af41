#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "stgat/gradcheck.hpp"
#include "stgat/model.hpp"
#include "stgat/training.hpp"

using namespace stgat;

namespace {

Tensor permute_fighters(const Tensor& x, const std::vector<std::size_t>& perm) {
  const std::size_t rows = x.dim(0) == perm.size() && x.rank() == 2
                               ? 1
                               : x.dim(0);  // [l,n,c] or [n,c]
  const std::size_t n = perm.size();
  const std::size_t c = x.shape().back();
  Tensor out = Tensor::zeros(x.shape());
  double* po = out.values_mut().data();
  const double* px = x.values().data();
  for (std::size_t t = 0; t < rows; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < c; ++k) {
        po[(t * n + i) * c + k] = px[(t * n + perm[i]) * c + k];
      }
    }
  }
  return out;
}

Tensor random_history(std::size_t l, std::size_t n, Rng& rng) {
  return Tensor::uniform({l, n, 3}, -1.0, 1.0, rng);
}

}  // namespace

TEST_CASE("predict_step output contract") {
  ModelConfig cfg;
  Rng rng(1);
  ModelWeights w = init_weights(cfg, Variant::kFull, rng);
  Tape tape(false);
  Rng drop(0);
  Tensor h = random_history(8, 4, rng);
  Tensor out = predict_step(tape, h, w, cfg, false, drop);
  REQUIRE(out.shape() == Shape{4, 3});

  REQUIRE_THROWS_AS(
      predict_step(tape, Tensor::zeros({7, 4, 3}), w, cfg, false, drop),
      config_error);
  REQUIRE_THROWS_AS(
      predict_step(tape, Tensor::zeros({8, 9, 3}), w, cfg, false, drop),
      config_error);
}

TEST_CASE("transformer-only variant isolates fighters") {
  ModelConfig cfg;
  Rng rng(2);
  ModelWeights w = init_weights(cfg, Variant::kTransformerOnly, rng);
  Tape tape(false);
  Rng drop(0);
  Tensor h = random_history(8, 4, rng);
  Tensor out = predict_step(tape, h, w, cfg, false, drop);

  Tensor h2 = h.clone();
  for (std::size_t t = 0; t < 8; ++t) {
    for (std::size_t k = 0; k < 3; ++k) {
      h2.values_mut()[(t * 4 + 3) * 3 + k] += 1.25;  // move fighter 3
    }
  }
  Tensor out2 = predict_step(tape, h2, w, cfg, false, drop);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t k = 0; k < 3; ++k) {
      REQUIRE(out.values()[i * 3 + k] == out2.values()[i * 3 + k]);
    }
  }
}

TEST_CASE("eval-mode prediction is bitwise repeatable") {
  ModelConfig cfg;
  Rng rng(3);
  ModelWeights w = init_weights(cfg, Variant::kFull, rng);
  Tensor h = random_history(8, 2, rng);
  Rng d1(7), d2(991);
  Tape t1(false), t2(false);
  Tensor a = predict_step(t1, h, w, cfg, false, d1);
  Tensor b = predict_step(t2, h, w, cfg, false, d2);
  REQUIRE(a.values() == b.values());
}

TEST_CASE("full model is fighter-permutation equivariant") {
  ModelConfig cfg;
  Rng rng(4);
  ModelWeights w = init_weights(cfg, Variant::kFull, rng);
  Tape tape(false);
  Rng drop(0);
  const std::size_t n = 4;
  Tensor h = random_history(8, n, rng);
  Tensor out = predict_step(tape, h, w, cfg, false, drop);
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    rng.shuffle(perm);
    Tensor hp = permute_fighters(h, perm);
    Tensor op = predict_step(tape, hp, w, cfg, false, drop);
    Tensor want = permute_fighters(out, perm);
    for (std::size_t i = 0; i < want.numel(); ++i) {
      REQUIRE(std::abs(op.values()[i] - want.values()[i]) < 1e-9);
    }
  }
}

TEST_CASE("full variant with block-diagonal decoder reproduces each branch") {
  ModelConfig cfg;
  Rng rng(5);
  const std::size_t l = cfg.history_len, d = cfg.d_model;
  Rng drop(0);
  Tape tape(false);
  Tensor h = random_history(l, 3, rng);

  // Temporal direction: zero the spatial half of the fused feature by
  // zeroing the corresponding decoder rows.
  {
    ModelWeights branch = init_weights(cfg, Variant::kTransformerOnly, rng);
    Rng rng2(99);
    ModelWeights full = init_weights(cfg, Variant::kFull, rng2);
    full.fc1_w = branch.fc1_w;
    full.fc1_b = branch.fc1_b;
    full.blocks = branch.blocks;
    full.dec_w1 = Tensor::zeros({l * 2 * d, cfg.decoder_hidden});
    for (std::size_t t = 0; t < l; ++t) {
      for (std::size_t c = 0; c < d; ++c) {
        for (std::size_t hcol = 0; hcol < cfg.decoder_hidden; ++hcol) {
          full.dec_w1.values_mut()[((t * 2 * d) + c) * cfg.decoder_hidden +
                                   hcol] =
              branch.dec_w1.values()[(t * d + c) * cfg.decoder_hidden + hcol];
        }
      }
    }
    full.dec_b1 = branch.dec_b1;
    full.dec_w2 = branch.dec_w2;
    full.dec_b2 = branch.dec_b2;

    Tensor want = predict_step(tape, h, branch, cfg, false, drop);
    Tensor got = predict_step(tape, h, full, cfg, false, drop);
    for (std::size_t i = 0; i < want.numel(); ++i) {
      REQUIRE(std::abs(got.values()[i] - want.values()[i]) < 1e-9);
    }
  }

  // Spatial direction: same construction with the halves swapped.
  {
    ModelWeights branch = init_weights(cfg, Variant::kGatOnly, rng);
    Rng rng2(77);
    ModelWeights full = init_weights(cfg, Variant::kFull, rng2);
    full.fc2_w = branch.fc2_w;
    full.fc2_b = branch.fc2_b;
    full.gat = branch.gat;
    full.dec_w1 = Tensor::zeros({l * 2 * d, cfg.decoder_hidden});
    for (std::size_t t = 0; t < l; ++t) {
      for (std::size_t c = 0; c < d; ++c) {
        for (std::size_t hcol = 0; hcol < cfg.decoder_hidden; ++hcol) {
          full.dec_w1.values_mut()[((t * 2 * d) + d + c) * cfg.decoder_hidden +
                                   hcol] =
              branch.dec_w1.values()[(t * d + c) * cfg.decoder_hidden + hcol];
        }
      }
    }
    full.dec_b1 = branch.dec_b1;
    full.dec_w2 = branch.dec_w2;
    full.dec_b2 = branch.dec_b2;

    Tensor want = predict_step(tape, h, branch, cfg, false, drop);
    Tensor got = predict_step(tape, h, full, cfg, false, drop);
    for (std::size_t i = 0; i < want.numel(); ++i) {
      REQUIRE(std::abs(got.values()[i] - want.values()[i]) < 1e-9);
    }
  }
}

TEST_CASE("rollout base case equals one de-normalized predict_step") {
  ModelConfig cfg;
  Rng rng(6);
  ModelWeights w = init_weights(cfg, Variant::kFull, rng);
  Tensor raw = Tensor::uniform({8, 2, 3}, 10.0, 14.0, rng);

  Tensor roll = rollout(raw, 1, w, cfg);
  auto [norm, rec] = normalize_window(raw, cfg.norm_scale_km);
  Tape tape(false);
  Rng drop(0);
  Tensor pred = predict_step(tape, norm, w, cfg, false, drop);
  Tensor want = denormalize(pred, rec);
  REQUIRE(roll.shape() == Shape{1, 2, 3});
  REQUIRE(std::vector<double>(roll.values().begin(), roll.values().end()) ==
          want.values());
}

TEST_CASE("rollout composes and rejects empty horizons") {
  ModelConfig cfg;
  Rng rng(7);
  ModelWeights w = init_weights(cfg, Variant::kFull, rng);
  Tensor raw = Tensor::uniform({8, 3, 3}, -5.0, 5.0, rng);
  REQUIRE_THROWS_AS(rollout(raw, 0, w, cfg), config_error);

  const std::size_t h1 = 3, h2 = 5;
  Tensor whole = rollout(raw, h1 + h2, w, cfg);

  Tensor first = rollout(raw, h1, w, cfg);
  // Window after h1 steps: last (l - h1) raw rows then the h1 predictions.
  Tensor mid = Tensor::zeros({8, 3, 3});
  const std::size_t n3 = 3 * 3;
  for (std::size_t t = 0; t < 8 - h1; ++t) {
    for (std::size_t i = 0; i < n3; ++i) {
      mid.values_mut()[t * n3 + i] = raw.values()[(t + h1) * n3 + i];
    }
  }
  for (std::size_t t = 0; t < h1; ++t) {
    for (std::size_t i = 0; i < n3; ++i) {
      mid.values_mut()[(8 - h1 + t) * n3 + i] = first.values()[t * n3 + i];
    }
  }
  Tensor second = rollout(mid, h2, w, cfg);

  for (std::size_t t = 0; t < h1; ++t) {
    for (std::size_t i = 0; i < n3; ++i) {
      REQUIRE(std::abs(whole.values()[t * n3 + i] -
                       first.values()[t * n3 + i]) < 1e-9);
    }
  }
  for (std::size_t t = 0; t < h2; ++t) {
    for (std::size_t i = 0; i < n3; ++i) {
      REQUIRE(std::abs(whole.values()[(h1 + t) * n3 + i] -
                       second.values()[t * n3 + i]) < 1e-9);
    }
  }
}

TEST_CASE("init_weights is seeded and bounded") {
  ModelConfig cfg;
  Rng r1(123), r2(123), r3(124);
  ModelWeights a = init_weights(cfg, Variant::kFull, r1);
  ModelWeights b = init_weights(cfg, Variant::kFull, r2);
  ModelWeights c = init_weights(cfg, Variant::kFull, r3);

  auto pa = a.named_parameters(), pb = b.named_parameters(),
       pc = c.named_parameters();
  bool any_diff = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    REQUIRE(pa[i].second.values() == pb[i].second.values());
    if (pa[i].second.values() != pc[i].second.values()) any_diff = true;
    const bool ln_affine = pa[i].first.find("ln_") != std::string::npos;
    for (double v : pa[i].second.values()) {
      REQUIRE(std::isfinite(v));
      // layer-norm gain starts at exactly 1; everything else is Xavier
      // uniform strictly inside (-1, 1)
      if (ln_affine) {
        REQUIRE(std::abs(v) <= 1.0);
      } else {
        REQUIRE(std::abs(v) < 1.0);
      }
    }
  }
  REQUIRE(any_diff);
}

TEST_CASE("parameter counts") {
  ModelConfig cfg;
  Rng rng(9);
  ModelWeights w = init_weights(cfg, Variant::kFull, rng);
  std::size_t fc1 = 0, gat_head_w = 0, total = 0;
  for (const auto& [name, t] : w.named_parameters()) {
    if (name == "fc1_w" || name == "fc1_b") fc1 += t.numel();
    if (name == "gat.h0.w") gat_head_w = t.numel();
    total += t.numel();
  }
  REQUIRE(fc1 == 96);         // 3*24 + 24
  REQUIRE(gat_head_w == 72);  // 3*24, no bias
  REQUIRE(count_parameters(w) == total);

  Rng rng2(9);
  ModelWeights wt = init_weights(cfg, Variant::kTransformerOnly, rng2);
  REQUIRE(count_parameters(wt) < count_parameters(w));
}

TEST_CASE("end-to-end loss gradient matches finite differences") {
  ModelConfig cfg;
  cfg.dropout = 0.0;
  Rng rng(10);
  ModelWeights w = init_weights(cfg, Variant::kFull, rng);
  Tensor h = random_history(8, 2, rng);
  Tensor target = Tensor::uniform({2, 3}, -0.5, 0.5, rng);
  Rng drop(0);
  const double err = finite_diff_check(
      [&](Tape& t, const Tensor& in) {
        Tensor pred = predict_step(t, in, w, cfg, false, drop);
        return mse_loss(t, pred, target);
      },
      h);
  REQUIRE(err < 1e-4);
}
