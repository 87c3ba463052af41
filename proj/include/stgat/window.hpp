#pragma once

#include <string>
#include <utility>

#include "stgat/tensor.hpp"

namespace stgat {

// Per-window normalization record: each fighter's last observed absolute
// position (km) and the shared length scale. Windows are expressed relative
// to that anchor, so targets are displacements.
struct NormRecord {
  Tensor offsets;     // [n, 3] km
  double scale = 1.0; // km
};

// One training example: l history steps for n fighters plus the next-step
// target, both normalized. `start` is the window's first index inside its
// source engagement.
struct WindowSample {
  Tensor history;  // [l, n, 3]
  Tensor target;   // [n, 3] displacement
  NormRecord norm;
  std::string engagement_id;
  std::string scenario;  // "2v2" etc.
  std::size_t start = 0;
};

// Subtracts each fighter's last observed position and divides by `scale`.
// The last history row therefore normalizes to exactly zero.
inline std::pair<Tensor, NormRecord> normalize_window(const Tensor& raw,
                                                      double scale = 1.0) {
  if (raw.rank() != 3 || raw.dim(2) != 3) {
    throw config_error("normalize_window: expected [l, n, 3], got " +
                       shape_str(raw.shape()));
  }
  if (!(scale > 0.0)) {
    throw config_error("normalize_window: scale must be positive");
  }
  const std::size_t l = raw.dim(0), n = raw.dim(1);
  NormRecord rec;
  rec.scale = scale;
  rec.offsets = Tensor::zeros({n, 3});
  const double* pr = raw.values().data();
  double* po = rec.offsets.values_mut().data();
  std::copy(pr + (l - 1) * n * 3, pr + l * n * 3, po);

  Tensor norm = Tensor::zeros(raw.shape());
  double* pn = norm.values_mut().data();
  const double inv = 1.0 / scale;
  for (std::size_t t = 0; t < l; ++t) {
    for (std::size_t i = 0; i < n * 3; ++i) {
      pn[t * n * 3 + i] = (pr[t * n * 3 + i] - po[i]) * inv;
    }
  }
  return {std::move(norm), std::move(rec)};
}

// Exact inverse of normalize_window for a predicted [n, 3] block.
inline Tensor denormalize(const Tensor& pred, const NormRecord& rec) {
  if (pred.shape() != rec.offsets.shape()) {
    throw config_error("denormalize: prediction " + shape_str(pred.shape()) +
                       " does not match offsets " +
                       shape_str(rec.offsets.shape()));
  }
  Tensor abs = Tensor::zeros(pred.shape());
  const double* pp = pred.values().data();
  const double* po = rec.offsets.values().data();
  double* pa = abs.values_mut().data();
  for (std::size_t i = 0; i < pred.numel(); ++i) {
    pa[i] = po[i] + pp[i] * rec.scale;
  }
  return abs;
}

}  // namespace stgat
