#pragma once

#include <functional>

#include "stgat/tensor.hpp"

namespace stgat {

// Scalar-valued function of one tensor, rebuilt on the tape it is handed.
// Any other tensors (weights, constants) live in the closure.
using ScalarFn = std::function<Tensor(Tape&, const Tensor&)>;

// Compares the analytic gradient of f at x against central finite differences,
// coordinate by coordinate. The differences use forward evaluations only, so
// the check is independent of the backward rules it verifies. Returns the max
// over coordinates of |analytic - numeric| / max(1, |analytic|).
//
// Callers are responsible for keeping f smooth at x (eval mode, inputs away
// from ReLU/LeakyReLU kinks); `coords` optionally restricts the check to a
// subset of coordinates (empty = all).
inline double finite_diff_check(const ScalarFn& f, const Tensor& x,
                                double step = 1e-5,
                                const std::vector<std::size_t>& coords = {}) {
  Tensor leaf = x.clone().set_requires_grad(true);
  Tape tape;
  Tensor loss = f(tape, leaf);
  tape.backward(loss);
  const std::vector<double> analytic = leaf.grad();

  std::vector<std::size_t> idx = coords;
  if (idx.empty()) {
    idx.resize(x.numel());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  }

  double max_err = 0.0;
  for (std::size_t i : idx) {
    Tensor plus = x.clone();
    plus.values_mut()[i] += step;
    Tensor minus = x.clone();
    minus.values_mut()[i] -= step;
    Tape off(false);
    const double fp = f(off, plus).item();
    const double fm = f(off, minus).item();
    const double numeric = (fp - fm) / (2.0 * step);
    const double err = std::abs(analytic[i] - numeric) /
                       std::max(1.0, std::abs(analytic[i]));
    max_err = std::max(max_err, err);
  }
  return max_err;
}

}  // namespace stgat
