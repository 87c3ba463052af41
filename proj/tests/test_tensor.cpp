#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "stgat/gradcheck.hpp"
#include "stgat/tensor.hpp"

using namespace stgat;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  return Tensor::uniform(std::move(shape), lo, hi, rng);
}

}  // namespace

TEST_CASE("matmul identity and hand-computed products") {
  Tape tape(false);
  Tensor eye = Tensor::from({2, 2}, {1, 0, 0, 1});
  Tensor a = Tensor::from({2, 2}, {1, 2, 3, 4});
  Tensor prod = matmul(tape, eye, a);
  REQUIRE(prod.values() == a.values());

  Tensor row = Tensor::from({1, 2}, {1, 2});
  Tensor col = Tensor::from({2, 1}, {3, 4});
  Tensor dot = matmul(tape, row, col);
  REQUIRE(dot.shape() == Shape{1, 1});
  REQUIRE(dot.item() == 11.0);
}

TEST_CASE("matmul rejects mismatched shapes, naming both") {
  Tape tape(false);
  Tensor a = Tensor::zeros({2, 3});
  Tensor b = Tensor::zeros({4, 5});
  REQUIRE_THROWS_MATCHES(
      matmul(tape, a, b), config_error,
      Catch::Matchers::MessageMatches(
          Catch::Matchers::ContainsSubstring("[2,3]") &&
          Catch::Matchers::ContainsSubstring("[4,5]")));
}

TEST_CASE("matmul batch broadcast against per-slice products") {
  Rng rng(11);
  Tape tape(false);
  Tensor a = random_tensor({3, 2, 4}, rng);
  Tensor b = random_tensor({4, 5}, rng);
  Tensor c = matmul(tape, a, b);
  REQUIRE(c.shape() == Shape{3, 2, 5});
  for (std::size_t s = 0; s < 3; ++s) {
    Tensor slice = Tensor::from(
        {2, 4}, std::vector<double>(a.values().begin() + s * 8,
                                    a.values().begin() + (s + 1) * 8));
    Tensor want = matmul(tape, slice, b);
    for (std::size_t i = 0; i < 10; ++i) {
      REQUIRE(c.values()[s * 10 + i] == Catch::Approx(want.values()[i]));
    }
  }
}

TEST_CASE("gradient of sum(A*B) matches finite differences") {
  Rng rng(7);
  Tensor a0 = random_tensor({2, 3}, rng);
  Tensor b = random_tensor({3, 4}, rng);
  const double err = finite_diff_check(
      [&](Tape& t, const Tensor& a) {
        return sum_all(t, matmul(t, a, b));
      },
      a0, 1e-6);
  REQUIRE(err < 1e-7);

  // d(sum(A*B))/dA is B's row sums broadcast over A's rows.
  Tensor leaf = a0.clone().set_requires_grad(true);
  Tape tape;
  tape.backward(sum_all(tape, matmul(tape, leaf, b)));
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t k = 0; k < 3; ++k) {
      double want = 0.0;
      for (std::size_t c = 0; c < 4; ++c) want += b.values()[k * 4 + c];
      REQUIRE(leaf.grad()[r * 3 + k] == Catch::Approx(want).margin(1e-12));
    }
  }
}

TEST_CASE("matmul transpose flags gradients") {
  Rng rng(23);
  Tensor a0 = random_tensor({4, 2}, rng);
  Tensor b = random_tensor({4, 3}, rng);
  const double err = finite_diff_check(
      [&](Tape& t, const Tensor& a) {
        return sum_all(t, matmul(t, a, b, /*trans_a=*/true));
      },
      a0);
  REQUIRE(err < 1e-8);

  Tensor c = random_tensor({3, 4}, rng);
  const double err2 = finite_diff_check(
      [&](Tape& t, const Tensor& x) {
        return sum_all(t, matmul(t, x, c, false, /*trans_b=*/true));
      },
      random_tensor({2, 4}, rng));
  REQUIRE(err2 < 1e-8);
}

TEST_CASE("softmax constants, closed forms, stability") {
  Tape tape(false);
  Tensor c = Tensor::from({3}, {4.2, 4.2, 4.2});
  Tensor s = softmax_axis(tape, c, 0);
  for (double v : s.values()) REQUIRE(v == Catch::Approx(1.0 / 3.0));

  Tensor x = Tensor::from({2}, {0.0, std::log(2.0)});
  Tensor sx = softmax_axis(tape, x, 0);
  REQUIRE(sx.values()[0] == Catch::Approx(1.0 / 3.0).epsilon(1e-12));
  REQUIRE(sx.values()[1] == Catch::Approx(2.0 / 3.0).epsilon(1e-12));

  Tensor big = Tensor::from({2}, {1000.0, 1000.0});
  Tensor sb = softmax_axis(tape, big, 0);
  REQUIRE(sb.values()[0] == 0.5);
  REQUIRE(sb.values()[1] == 0.5);

  REQUIRE_THROWS_AS(softmax_axis(tape, x, 5), config_error);
}

TEST_CASE("softmax rows sum to one and are shift invariant") {
  Rng rng(3);
  Tape tape(false);
  for (int rep = 0; rep < 20; ++rep) {
    Tensor x = random_tensor({4, 6}, rng, -8.0, 8.0);
    Tensor s = softmax_axis(tape, x, 1);
    for (std::size_t r = 0; r < 4; ++r) {
      double total = 0.0;
      for (std::size_t k = 0; k < 6; ++k) total += s.values()[r * 6 + k];
      REQUIRE(std::abs(total - 1.0) < 1e-9);
    }
    Tensor shifted = x.clone();
    const double shift = rng.uniform(-50.0, 50.0);
    for (double& v : shifted.values_mut()) v += shift;
    Tensor s2 = softmax_axis(tape, shifted, 1);
    for (std::size_t i = 0; i < s.numel(); ++i) {
      REQUIRE(std::abs(s.values()[i] - s2.values()[i]) < 1e-12);
    }
  }
}

TEST_CASE("activations at reference points") {
  Tape tape(false);
  Tensor x = Tensor::from({4}, {-1.0, 0.0, -3.0, 3.0});
  Tensor lr = leaky_relu(tape, x, 0.2);
  REQUIRE(lr.values()[0] == Catch::Approx(-0.2));
  Tensor sg = sigmoid(tape, Tensor::scalar(0.0));
  REQUIRE(sg.item() == 0.5);
  Tensor r = relu(tape, x);
  REQUIRE(r.values()[2] == 0.0);
  REQUIRE(r.values()[3] == 3.0);

  REQUIRE_THROWS_AS(leaky_relu(tape, x, 0.0), config_error);
  REQUIRE_THROWS_AS(leaky_relu(tape, x, 1.5), config_error);
}

TEST_CASE("layer_norm reference cases") {
  Tape tape(false);
  Tensor gain = Tensor::filled({3}, 1.0);
  Tensor bias = Tensor::zeros({3});

  Tensor constant = Tensor::from({3}, {5.0, 5.0, 5.0});
  Tensor out = layer_norm(tape, constant, gain, bias);
  for (double v : out.values()) REQUIRE(std::abs(v) < 1e-12);

  Tensor pm = Tensor::from({2}, {1.0, -1.0});
  Tensor g2 = Tensor::filled({2}, 1.0);
  Tensor b2 = Tensor::zeros({2});
  Tensor out2 = layer_norm(tape, pm, g2, b2);
  REQUIRE(out2.values()[0] == Catch::Approx(1.0).epsilon(1e-5));
  REQUIRE(out2.values()[1] == Catch::Approx(-1.0).epsilon(1e-5));

  Tensor zero_gain = Tensor::zeros({3});
  Tensor b = Tensor::from({3}, {7.0, -2.0, 0.5});
  Tensor out3 = layer_norm(tape, Tensor::from({3}, {1.0, 9.0, -4.0}), zero_gain, b);
  REQUIRE(out3.values() == b.values());

  REQUIRE_THROWS_AS(layer_norm(tape, constant, Tensor::zeros({2}), bias),
                    config_error);
}

TEST_CASE("layer_norm normalization statistics") {
  Rng rng(17);
  Tape tape(false);
  Tensor gain = Tensor::filled({16}, 1.0);
  Tensor bias = Tensor::zeros({16});
  for (int rep = 0; rep < 10; ++rep) {
    Tensor x = random_tensor({5, 16}, rng, -3.0, 3.0);
    Tensor out = layer_norm(tape, x, gain, bias);
    for (std::size_t s = 0; s < 5; ++s) {
      double mean = 0.0, var = 0.0;
      for (std::size_t k = 0; k < 16; ++k) mean += out.values()[s * 16 + k];
      mean /= 16.0;
      for (std::size_t k = 0; k < 16; ++k) {
        const double d = out.values()[s * 16 + k] - mean;
        var += d * d;
      }
      var /= 16.0;
      REQUIRE(std::abs(mean) < 1e-9);
      REQUIRE(std::abs(var - 1.0) < 1e-4);  // eps shifts variance slightly
    }
  }
}

TEST_CASE("dropout semantics") {
  Rng rng(5);
  Tape tape(false);
  Tensor x = random_tensor({50}, rng);

  Rng r0(1);
  Tensor id_train = dropout(tape, x, 0.0, true, r0);
  REQUIRE(id_train.same_node(x));
  Tensor id_eval = dropout(tape, x, 0.1, false, r0);
  REQUIRE(id_eval.same_node(x));

  Tensor big = Tensor::filled({100000}, 1.0);
  Rng r1(99);
  Tensor dropped = dropout(tape, big, 0.5, true, r1);
  std::size_t survivors = 0;
  for (double v : dropped.values()) {
    if (v != 0.0) {
      REQUIRE(v == Catch::Approx(2.0));
      ++survivors;
    }
  }
  const double frac = static_cast<double>(survivors) / 100000.0;
  REQUIRE(frac > 0.49);
  REQUIRE(frac < 0.51);

  Rng r2(99);
  Tensor again = dropout(tape, big, 0.5, true, r2);
  REQUIRE(again.values() == dropped.values());

  REQUIRE_THROWS_AS(dropout(tape, x, 1.0, true, r1), config_error);
}

TEST_CASE("concat basics and round trip through slices") {
  Tape tape(false);
  Tensor a = Tensor::from({2}, {1, 2});
  Tensor b = Tensor::from({1}, {3});
  Tensor joined = concat_axis(tape, {a, b}, 0);
  REQUIRE(joined.values() == std::vector<double>{1, 2, 3});

  Tensor single = concat_axis(tape, {a}, 0);
  REQUIRE(single.same_node(a));

  Rng rng(31);
  Tensor t1 = random_tensor({8, 4, 24}, rng);
  Tensor t2 = random_tensor({8, 4, 24}, rng);
  Tensor fused = concat_axis(tape, {t1, t2}, 2);
  REQUIRE(fused.shape() == Shape{8, 4, 48});
  Tensor back1 = slice_axis(tape, fused, 2, 0, 24);
  Tensor back2 = slice_axis(tape, fused, 2, 24, 24);
  REQUIRE(back1.values() == t1.values());
  REQUIRE(back2.values() == t2.values());

  Tensor bad = Tensor::zeros({8, 5, 24});
  REQUIRE_THROWS_AS(concat_axis(tape, {t1, bad}, 2), config_error);
}

TEST_CASE("concat gradient splits back to inputs") {
  Rng rng(13);
  Tensor a = random_tensor({2, 3}, rng);
  Tensor b = random_tensor({2, 2}, rng);
  const double err = finite_diff_check(
      [&](Tape& t, const Tensor& x) {
        Tensor j = concat_axis(t, {x, b}, 1);
        return sum_all(t, mul(t, j, j));
      },
      a);
  REQUIRE(err < 1e-8);
}

TEST_CASE("backward: linear and quadratic reference gradients") {
  Tensor x = Tensor::from({2, 2}, {1, 2, 3, 4}).set_requires_grad(true);
  Tape tape;
  tape.backward(sum_all(tape, x));
  for (double g : x.grad()) REQUIRE(g == 1.0);

  Tensor y = Tensor::from({2}, {1, 2}).set_requires_grad(true);
  Tape tape2;
  tape2.backward(sum_all(tape2, mul(tape2, y, y)));
  REQUIRE(y.grad()[0] == Catch::Approx(2.0));
  REQUIRE(y.grad()[1] == Catch::Approx(4.0));
}

TEST_CASE("backward rejects non-scalar loss and accumulates across calls") {
  Tensor x = Tensor::from({3}, {1, 2, 3}).set_requires_grad(true);
  Tape tape;
  Tensor vec = scale(tape, x, 2.0);
  REQUIRE_THROWS_AS(tape.backward(vec), config_error);

  Tensor s = sum_all(tape, vec);
  tape.backward(s);
  tape.backward(s);
  for (double g : x.grad()) REQUIRE(g == Catch::Approx(4.0));
  x.zero_grad();
  for (double g : x.grad()) REQUIRE(g == 0.0);
}

TEST_CASE("broadcast add/sub/mul values and gradients") {
  Rng rng(41);
  Tape tape(false);
  Tensor m = random_tensor({2, 3}, rng);
  Tensor row = random_tensor({3}, rng);
  Tensor s = add(tape, m, row);
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t c = 0; c < 3; ++c) {
      REQUIRE(s.values()[r * 3 + c] ==
              Catch::Approx(m.values()[r * 3 + c] + row.values()[c]));
    }
  }
  REQUIRE_THROWS_AS(add(tape, m, Tensor::zeros({4})), config_error);

  const double err = finite_diff_check(
      [&](Tape& t, const Tensor& r) {
        Tensor a = add(t, m, r);                   // broadcast over rows
        Tensor b = mul(t, a, Tensor::scalar(0.5)); // broadcast scalar
        return sum_all(t, mul(t, b, b));
      },
      row);
  REQUIRE(err < 1e-8);
}

TEST_CASE("reshape and permute preserve data and gradients") {
  Rng rng(53);
  Tape tape(false);
  Tensor x = random_tensor({2, 3, 4}, rng);
  Tensor r = reshape(tape, x, {6, 4});
  REQUIRE(r.values() == x.values());
  REQUIRE_THROWS_AS(reshape(tape, x, {5, 5}), config_error);

  Tensor p = permute(tape, x, {2, 0, 1});
  REQUIRE(p.shape() == Shape{4, 2, 3});
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      for (std::size_t k = 0; k < 4; ++k) {
        REQUIRE(p.values()[(k * 2 + i) * 3 + j] ==
                x.values()[(i * 3 + j) * 4 + k]);
      }
    }
  }
  REQUIRE_THROWS_AS(permute(tape, x, {0, 0, 1}), config_error);

  const double err = finite_diff_check(
      [&](Tape& t, const Tensor& in) {
        Tensor perm = permute(t, in, {1, 2, 0});
        Tensor flat = reshape(t, perm, {12, 2});
        return sum_all(t, mul(t, flat, flat));
      },
      x);
  REQUIRE(err < 1e-8);
}

TEST_CASE("finite_diff_check on exactly linear map is noise level") {
  Rng rng(61);
  Tensor x = random_tensor({4, 4}, rng);
  const double err = finite_diff_check(
      [](Tape& t, const Tensor& in) { return sum_all(t, in); }, x);
  REQUIRE(err < 1e-10);
}

TEST_CASE("finite_diff_check on softmax composite") {
  Rng rng(67);
  Tensor x = random_tensor({3, 5}, rng, -2.0, 2.0);
  const double err = finite_diff_check(
      [](Tape& t, const Tensor& in) {
        Tensor s = softmax_axis(t, in, 1);
        return sum_all(t, mul(t, s, s));
      },
      x);
  REQUIRE(err < 1e-6);
}

TEST_CASE("finite_diff_check on mixed composites at 20 random points") {
  Rng rng(71);
  for (int rep = 0; rep < 20; ++rep) {
    Tensor x = random_tensor({3, 4}, rng, 0.1, 1.5);  // clear of relu kinks
    Tensor w = random_tensor({4, 4}, rng);
    Tensor gain = Tensor::filled({4}, 1.0);
    Tensor bias = Tensor::zeros({4});
    const double err = finite_diff_check(
        [&](Tape& t, const Tensor& in) {
          Tensor h = matmul(t, in, w);
          h = layer_norm(t, h, gain, bias);
          h = sigmoid(t, h);
          Tensor s = softmax_axis(t, h, 1);
          return mean_all(t, mul(t, s, h));
        },
        x);
    REQUIRE(err < 1e-4);
  }
}
