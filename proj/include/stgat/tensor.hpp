#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "stgat/errors.hpp"
#include "stgat/rng.hpp"

namespace stgat {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << ',';
    os << s[i];
  }
  os << ']';
  return os.str();
}

namespace detail {
struct TensorNode {
  Shape shape;
  std::shared_ptr<std::vector<double>> values;  // shared so views can alias
  std::vector<double> grad;                     // empty until first accumulation
  bool requires_grad = false;
};
}  // namespace detail

// Dense row-major float64 tensor. Copying a Tensor copies a handle; two
// handles to the same node share values and gradient. Forward ops never
// mutate their inputs; only the optimizer writes through values_mut().
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape) { return filled(std::move(shape), 0.0); }

  static Tensor filled(Shape shape, double value) {
    Tensor t;
    t.node_ = std::make_shared<detail::TensorNode>();
    t.node_->shape = std::move(shape);
    t.node_->values = std::make_shared<std::vector<double>>(
        shape_numel(t.node_->shape), value);
    return t;
  }

  static Tensor from(Shape shape, std::vector<double> values) {
    if (shape_numel(shape) != values.size()) {
      throw config_error("tensor: " + std::to_string(values.size()) +
                         " values do not fill shape " + shape_str(shape));
    }
    Tensor t;
    t.node_ = std::make_shared<detail::TensorNode>();
    t.node_->shape = std::move(shape);
    t.node_->values = std::make_shared<std::vector<double>>(std::move(values));
    return t;
  }

  static Tensor scalar(double v) { return from({1}, {v}); }

  static Tensor uniform(Shape shape, double lo, double hi, Rng& rng) {
    Tensor t = zeros(std::move(shape));
    for (double& v : t.values_mut()) v = rng.uniform(lo, hi);
    return t;
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t numel() const { return node_->values->size(); }
  std::size_t dim(std::size_t axis) const { return node_->shape[axis]; }

  const std::vector<double>& values() const { return *node_->values; }
  std::vector<double>& values_mut() { return *node_->values; }
  double value_at(std::size_t flat) const { return (*node_->values)[flat]; }
  double item() const {
    if (numel() != 1) {
      throw config_error("tensor: item() on non-scalar " + shape_str(shape()));
    }
    return (*node_->values)[0];
  }

  bool requires_grad() const { return node_->requires_grad; }
  Tensor& set_requires_grad(bool on) {
    node_->requires_grad = on;
    return *this;
  }

  bool has_grad() const { return !node_->grad.empty(); }
  const std::vector<double>& grad() const { return node_->grad; }
  std::vector<double>& grad_mut() { return ensure_grad(); }
  void zero_grad() { std::fill(node_->grad.begin(), node_->grad.end(), 0.0); }

  std::vector<double>& ensure_grad() {
    if (node_->grad.empty()) node_->grad.assign(numel(), 0.0);
    return node_->grad;
  }

  // Deep copy of values only (fresh node, no grad, no requires_grad).
  Tensor clone() const { return from(shape(), values()); }

  bool same_node(const Tensor& other) const { return node_ == other.node_; }

  // Internal: fresh node sharing this node's value buffer (used by reshape).
  Tensor alias_with_shape(Shape shape) const {
    Tensor t;
    t.node_ = std::make_shared<detail::TensorNode>();
    t.node_->shape = std::move(shape);
    t.node_->values = node_->values;
    return t;
  }

 private:
  std::shared_ptr<detail::TensorNode> node_;
};

// Reverse-mode tape. Ops append their backward rules in execution order,
// which is a topological order by construction; backward() replays them once
// in reverse. A disabled tape records nothing (inference mode).
class Tape {
 public:
  explicit Tape(bool enabled = true) : enabled_(enabled) {}

  bool enabled() const { return enabled_; }
  std::size_t size() const { return ops_.size(); }

  void record(const Tensor& output, std::function<void()> backward_rule) {
    ops_.push_back({output, std::move(backward_rule)});
  }

  // Seeds d(loss)/d(loss) = 1 and accumulates into every reachable leaf
  // gradient. Intermediate (op-output) gradients are reset first, so calling
  // backward again adds another full d(loss)/d(leaf) into each leaf.
  void backward(Tensor loss) {
    if (loss.numel() != 1) {
      throw config_error("backward: loss must be scalar, got " +
                         shape_str(loss.shape()));
    }
    for (Op& op : ops_) {
      if (op.output.has_grad()) op.output.zero_grad();
    }
    loss.ensure_grad()[0] += 1.0;
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) it->backward();
  }

 private:
  struct Op {
    Tensor output;
    std::function<void()> backward;
  };
  bool enabled_;
  std::vector<Op> ops_;
};

namespace detail {

inline bool track(const Tape& tape, std::initializer_list<const Tensor*> ins) {
  if (!tape.enabled()) return false;
  for (const Tensor* t : ins) {
    if (t->requires_grad()) return true;
  }
  return false;
}

using MatRM =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatRM>;
using CMapRM = Eigen::Map<const MatRM>;

// Right-aligned broadcast result shape: each pair of dims must match or one
// of them must be 1 (missing dims count as 1).
inline Shape broadcast_shape(const Shape& a, const Shape& b, const char* op) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    const std::size_t da = i < a.size() ? a[a.size() - 1 - i] : 1;
    const std::size_t db = i < b.size() ? b[b.size() - 1 - i] : 1;
    if (da != db && da != 1 && db != 1) {
      throw config_error(std::string(op) + ": shapes " + shape_str(a) +
                         " and " + shape_str(b) + " do not broadcast");
    }
    out[rank - 1 - i] = std::max(da, db);
  }
  return out;
}

// Row-major strides with 0 on broadcast dims, right-aligned against `out`.
inline std::vector<std::size_t> broadcast_strides(const Shape& s,
                                                  const Shape& out) {
  std::vector<std::size_t> strides(out.size(), 0);
  std::size_t stride = 1;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const std::size_t axis = s.size() - 1 - i;
    const std::size_t out_axis = out.size() - 1 - i;
    if (s[axis] != 1) strides[out_axis] = stride;
    stride *= s[axis];
  }
  return strides;
}

// Walks all coordinates of `out`, handing the elementwise kernel the flat
// indices into both (possibly broadcast) operands.
template <typename Fn>
inline void for_each_broadcast(const Shape& out, const Shape& a,
                               const Shape& b, Fn&& fn) {
  const std::size_t n = shape_numel(out);
  const auto sa = broadcast_strides(a, out);
  const auto sb = broadcast_strides(b, out);
  std::vector<std::size_t> coord(out.size(), 0);
  std::size_t ia = 0, ib = 0;
  for (std::size_t i = 0; i < n; ++i) {
    fn(i, ia, ib);
    for (std::size_t k = out.size(); k-- > 0;) {
      if (++coord[k] < out[k]) {
        ia += sa[k];
        ib += sb[k];
        break;
      }
      coord[k] = 0;
      ia -= sa[k] * (out[k] - 1);
      ib -= sb[k] * (out[k] - 1);
    }
  }
}

enum class BinOp { kAdd, kSub, kMul };

inline Tensor binary_op(Tape& tape, const Tensor& a, const Tensor& b,
                        BinOp op, const char* name) {
  const Shape out_shape = broadcast_shape(a.shape(), b.shape(), name);
  Tensor out = Tensor::zeros(out_shape);
  const double* pa = a.values().data();
  const double* pb = b.values().data();
  double* po = out.values_mut().data();

  if (a.shape() == out_shape && b.shape() == out_shape) {
    const std::size_t n = out.numel();
    switch (op) {
      case BinOp::kAdd:
        for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] + pb[i];
        break;
      case BinOp::kSub:
        for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] - pb[i];
        break;
      case BinOp::kMul:
        for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] * pb[i];
        break;
    }
  } else {
    for_each_broadcast(out_shape, a.shape(), b.shape(),
                       [&](std::size_t i, std::size_t ia, std::size_t ib) {
                         switch (op) {
                           case BinOp::kAdd: po[i] = pa[ia] + pb[ib]; break;
                           case BinOp::kSub: po[i] = pa[ia] - pb[ib]; break;
                           case BinOp::kMul: po[i] = pa[ia] * pb[ib]; break;
                         }
                       });
  }

  if (track(tape, {&a, &b})) {
    out.set_requires_grad(true);
    Tensor ac = a, bc = b, oc = out;
    tape.record(out, [ac, bc, oc, op]() mutable {
      const auto& g = oc.grad();
      const Shape& os = oc.shape();
      double* ga = ac.requires_grad() ? ac.ensure_grad().data() : nullptr;
      double* gb = bc.requires_grad() ? bc.ensure_grad().data() : nullptr;
      const double* pa = ac.values().data();
      const double* pb = bc.values().data();
      for_each_broadcast(os, ac.shape(), bc.shape(),
                         [&](std::size_t i, std::size_t ia, std::size_t ib) {
                           switch (op) {
                             case BinOp::kAdd:
                               if (ga) ga[ia] += g[i];
                               if (gb) gb[ib] += g[i];
                               break;
                             case BinOp::kSub:
                               if (ga) ga[ia] += g[i];
                               if (gb) gb[ib] -= g[i];
                               break;
                             case BinOp::kMul:
                               if (ga) ga[ia] += g[i] * pb[ib];
                               if (gb) gb[ib] += g[i] * pa[ia];
                               break;
                           }
                         });
    });
  }
  return out;
}

}  // namespace detail

inline Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  return detail::binary_op(tape, a, b, detail::BinOp::kAdd, "add");
}
inline Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) {
  return detail::binary_op(tape, a, b, detail::BinOp::kSub, "sub");
}
inline Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  return detail::binary_op(tape, a, b, detail::BinOp::kMul, "mul");
}

inline Tensor scale(Tape& tape, const Tensor& a, double c) {
  Tensor out = Tensor::zeros(a.shape());
  const double* pa = a.values().data();
  double* po = out.values_mut().data();
  for (std::size_t i = 0; i < a.numel(); ++i) po[i] = pa[i] * c;
  if (detail::track(tape, {&a})) {
    out.set_requires_grad(true);
    Tensor ac = a, oc = out;
    tape.record(out, [ac, oc, c]() mutable {
      const auto& g = oc.grad();
      double* ga = ac.ensure_grad().data();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * c;
    });
  }
  return out;
}

inline Tensor sum_all(Tape& tape, const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  Tensor out = Tensor::scalar(s);
  if (detail::track(tape, {&a})) {
    out.set_requires_grad(true);
    Tensor ac = a, oc = out;
    tape.record(out, [ac, oc]() mutable {
      const double g = oc.grad()[0];
      double* ga = ac.ensure_grad().data();
      for (std::size_t i = 0; i < ac.numel(); ++i) ga[i] += g;
    });
  }
  return out;
}

inline Tensor mean_all(Tape& tape, const Tensor& a) {
  return scale(tape, sum_all(tape, a), 1.0 / static_cast<double>(a.numel()));
}

// Matrix product over the trailing two axes. Leading (batch) axes must be
// identical, or one operand may be a plain rank-2 matrix shared across the
// other's batch. trans_a/trans_b transpose the trailing two axes logically
// without materializing a copy.
inline Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b,
                     bool trans_a = false, bool trans_b = false) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() < 2 || sb.size() < 2) {
    throw config_error("matmul: operands must have rank >= 2, got " +
                       shape_str(sa) + " x " + shape_str(sb));
  }
  const std::size_t a_rows = sa[sa.size() - 2], a_cols = sa[sa.size() - 1];
  const std::size_t b_rows = sb[sb.size() - 2], b_cols = sb[sb.size() - 1];
  const std::size_t p = trans_a ? a_cols : a_rows;
  const std::size_t q = trans_a ? a_rows : a_cols;
  const std::size_t qb = trans_b ? b_cols : b_rows;
  const std::size_t r = trans_b ? b_rows : b_cols;

  const Shape batch_a(sa.begin(), sa.end() - 2);
  const Shape batch_b(sb.begin(), sb.end() - 2);
  Shape batch;
  if (batch_a == batch_b) {
    batch = batch_a;
  } else if (batch_b.empty()) {
    batch = batch_a;
  } else if (batch_a.empty()) {
    batch = batch_b;
  } else {
    throw config_error("matmul: incompatible batch dims " + shape_str(sa) +
                       " x " + shape_str(sb));
  }
  if (q != qb) {
    throw config_error("matmul: inner dimensions mismatch " + shape_str(sa) +
                       (trans_a ? "^T" : "") + " x " + shape_str(sb) +
                       (trans_b ? "^T" : ""));
  }

  Shape out_shape = batch;
  out_shape.push_back(p);
  out_shape.push_back(r);
  Tensor out = Tensor::zeros(out_shape);

  const std::size_t batches = shape_numel(batch);
  const std::size_t step_a = batch_a.empty() ? 0 : a_rows * a_cols;
  const std::size_t step_b = batch_b.empty() ? 0 : b_rows * b_cols;
  const std::size_t step_o = p * r;

  {
    const double* pa = a.values().data();
    const double* pb = b.values().data();
    double* po = out.values_mut().data();
    for (std::size_t s = 0; s < batches; ++s) {
      detail::CMapRM ma(pa + s * step_a, a_rows, a_cols);
      detail::CMapRM mb(pb + s * step_b, b_rows, b_cols);
      detail::MapRM mo(po + s * step_o, p, r);
      if (!trans_a && !trans_b)
        mo.noalias() = ma * mb;
      else if (trans_a && !trans_b)
        mo.noalias() = ma.transpose() * mb;
      else if (!trans_a && trans_b)
        mo.noalias() = ma * mb.transpose();
      else
        mo.noalias() = ma.transpose() * mb.transpose();
    }
  }

  if (detail::track(tape, {&a, &b})) {
    out.set_requires_grad(true);
    Tensor ac = a, bc = b, oc = out;
    tape.record(out, [ac, bc, oc, trans_a, trans_b, batches, step_a, step_b, step_o,
                 a_rows, a_cols, b_rows, b_cols, p, r]() mutable {
      const double* pa = ac.values().data();
      const double* pb = bc.values().data();
      const double* pg = oc.grad().data();
      double* ga = ac.requires_grad() ? ac.ensure_grad().data() : nullptr;
      double* gb = bc.requires_grad() ? bc.ensure_grad().data() : nullptr;
      for (std::size_t s = 0; s < batches; ++s) {
        detail::CMapRM ma(pa + s * step_a, a_rows, a_cols);
        detail::CMapRM mb(pb + s * step_b, b_rows, b_cols);
        detail::CMapRM mg(pg + s * step_o, p, r);
        if (ga) {
          detail::MapRM mga(ga + s * step_a, a_rows, a_cols);
          if (!trans_a && !trans_b)
            mga.noalias() += mg * mb.transpose();
          else if (trans_a && !trans_b)
            mga.noalias() += mb * mg.transpose();
          else if (!trans_a && trans_b)
            mga.noalias() += mg * mb;
          else
            mga.noalias() += mb.transpose() * mg.transpose();
        }
        if (gb) {
          detail::MapRM mgb(gb + s * step_b, b_rows, b_cols);
          if (!trans_a && !trans_b)
            mgb.noalias() += ma.transpose() * mg;
          else if (trans_a && !trans_b)
            mgb.noalias() += ma * mg;
          else if (!trans_a && trans_b)
            mgb.noalias() += mg.transpose() * ma;
          else
            mgb.noalias() += mg.transpose() * ma.transpose();
        }
      }
    });
  }
  return out;
}

// Numerically stable softmax along `axis` (max subtraction before exp).
inline Tensor softmax_axis(Tape& tape, const Tensor& x, std::size_t axis) {
  if (axis >= x.rank()) {
    throw config_error("softmax_axis: axis " + std::to_string(axis) +
                       " out of range for " + shape_str(x.shape()));
  }
  const Shape& s = x.shape();
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t m = s[axis];

  Tensor out = Tensor::zeros(s);
  const double* px = x.values().data();
  double* po = out.values_mut().data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * m * inner + in;
      double mx = px[base];
      for (std::size_t k = 1; k < m; ++k)
        mx = std::max(mx, px[base + k * inner]);
      double z = 0.0;
      for (std::size_t k = 0; k < m; ++k) {
        const double e = std::exp(px[base + k * inner] - mx);
        po[base + k * inner] = e;
        z += e;
      }
      const double inv = 1.0 / z;
      for (std::size_t k = 0; k < m; ++k) po[base + k * inner] *= inv;
    }
  }

  if (detail::track(tape, {&x})) {
    out.set_requires_grad(true);
    Tensor xc = x, oc = out;
    tape.record(out, [xc, oc, outer, inner, m]() mutable {
      const double* py = oc.values().data();
      const double* pg = oc.grad().data();
      double* gx = xc.ensure_grad().data();
      for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t in = 0; in < inner; ++in) {
          const std::size_t base = o * m * inner + in;
          double dot = 0.0;
          for (std::size_t k = 0; k < m; ++k) {
            const std::size_t idx = base + k * inner;
            dot += pg[idx] * py[idx];
          }
          for (std::size_t k = 0; k < m; ++k) {
            const std::size_t idx = base + k * inner;
            gx[idx] += py[idx] * (pg[idx] - dot);
          }
        }
      }
    });
  }
  return out;
}

enum class Activation { kLeakyRelu, kSigmoid, kRelu };

inline Tensor apply_activation(Tape& tape, const Tensor& x, Activation kind,
                               double slope = 0.2) {
  if (kind == Activation::kLeakyRelu && !(slope > 0.0 && slope < 1.0)) {
    throw config_error("leaky_relu: slope must lie in (0,1), got " +
                       std::to_string(slope));
  }
  Tensor out = Tensor::zeros(x.shape());
  const double* px = x.values().data();
  double* po = out.values_mut().data();
  const std::size_t n = x.numel();
  switch (kind) {
    case Activation::kLeakyRelu:
      for (std::size_t i = 0; i < n; ++i)
        po[i] = px[i] >= 0.0 ? px[i] : slope * px[i];
      break;
    case Activation::kSigmoid:
      for (std::size_t i = 0; i < n; ++i) po[i] = 1.0 / (1.0 + std::exp(-px[i]));
      break;
    case Activation::kRelu:
      for (std::size_t i = 0; i < n; ++i) po[i] = px[i] > 0.0 ? px[i] : 0.0;
      break;
  }
  if (detail::track(tape, {&x})) {
    out.set_requires_grad(true);
    Tensor xc = x, oc = out;
    tape.record(out, [xc, oc, kind, slope]() mutable {
      const double* px = xc.values().data();
      const double* py = oc.values().data();
      const double* pg = oc.grad().data();
      double* gx = xc.ensure_grad().data();
      const std::size_t n = xc.numel();
      switch (kind) {
        case Activation::kLeakyRelu:
          for (std::size_t i = 0; i < n; ++i)
            gx[i] += pg[i] * (px[i] >= 0.0 ? 1.0 : slope);
          break;
        case Activation::kSigmoid:
          for (std::size_t i = 0; i < n; ++i)
            gx[i] += pg[i] * py[i] * (1.0 - py[i]);
          break;
        case Activation::kRelu:
          for (std::size_t i = 0; i < n; ++i)
            gx[i] += pg[i] * (px[i] > 0.0 ? 1.0 : 0.0);
          break;
      }
    });
  }
  return out;
}

inline Tensor leaky_relu(Tape& tape, const Tensor& x, double slope = 0.2) {
  return apply_activation(tape, x, Activation::kLeakyRelu, slope);
}
inline Tensor sigmoid(Tape& tape, const Tensor& x) {
  return apply_activation(tape, x, Activation::kSigmoid);
}
inline Tensor relu(Tape& tape, const Tensor& x) {
  return apply_activation(tape, x, Activation::kRelu);
}

// Normalizes the last axis to zero mean / unit variance (population variance,
// eps inside the sqrt), then applies gain and bias. Constant slices come out
// as plain bias.
inline Tensor layer_norm(Tape& tape, const Tensor& x, const Tensor& gain,
                         const Tensor& bias, double eps = 1e-5) {
  const std::size_t m = x.shape().back();
  if (gain.numel() != m || bias.numel() != m) {
    throw config_error("layer_norm: gain/bias length " +
                       std::to_string(gain.numel()) + "/" +
                       std::to_string(bias.numel()) +
                       " must equal last-axis size " + std::to_string(m));
  }
  const std::size_t slices = x.numel() / m;
  Tensor out = Tensor::zeros(x.shape());
  // Cache per-slice inverse stddev and normalized values for backward.
  auto xhat = std::make_shared<std::vector<double>>(x.numel());
  auto inv_std = std::make_shared<std::vector<double>>(slices);
  {
    const double* px = x.values().data();
    const double* pgain = gain.values().data();
    const double* pbias = bias.values().data();
    double* po = out.values_mut().data();
    for (std::size_t s = 0; s < slices; ++s) {
      const double* row = px + s * m;
      double mean = 0.0;
      for (std::size_t k = 0; k < m; ++k) mean += row[k];
      mean /= static_cast<double>(m);
      double var = 0.0;
      for (std::size_t k = 0; k < m; ++k) {
        const double d = row[k] - mean;
        var += d * d;
      }
      var /= static_cast<double>(m);
      const double is = 1.0 / std::sqrt(var + eps);
      (*inv_std)[s] = is;
      for (std::size_t k = 0; k < m; ++k) {
        const double xh = (row[k] - mean) * is;
        (*xhat)[s * m + k] = xh;
        po[s * m + k] = pgain[k] * xh + pbias[k];
      }
    }
  }

  if (detail::track(tape, {&x, &gain, &bias})) {
    out.set_requires_grad(true);
    Tensor xc = x, gc = gain, bc = bias, oc = out;
    tape.record(out, [xc, gc, bc, oc, xhat, inv_std, m, slices]() mutable {
      const double* pg = oc.grad().data();
      const double* pgain = gc.values().data();
      double* gx = xc.requires_grad() ? xc.ensure_grad().data() : nullptr;
      double* gg = gc.requires_grad() ? gc.ensure_grad().data() : nullptr;
      double* gb = bc.requires_grad() ? bc.ensure_grad().data() : nullptr;
      for (std::size_t s = 0; s < slices; ++s) {
        const double* xh = xhat->data() + s * m;
        const double* grow = pg + s * m;
        if (gg || gb) {
          for (std::size_t k = 0; k < m; ++k) {
            if (gg) gg[k] += grow[k] * xh[k];
            if (gb) gb[k] += grow[k];
          }
        }
        if (gx) {
          double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
          for (std::size_t k = 0; k < m; ++k) {
            const double dxhat = grow[k] * pgain[k];
            mean_dxhat += dxhat;
            mean_dxhat_xhat += dxhat * xh[k];
          }
          mean_dxhat /= static_cast<double>(m);
          mean_dxhat_xhat /= static_cast<double>(m);
          const double is = (*inv_std)[s];
          for (std::size_t k = 0; k < m; ++k) {
            const double dxhat = grow[k] * pgain[k];
            gx[s * m + k] +=
                is * (dxhat - mean_dxhat - xh[k] * mean_dxhat_xhat);
          }
        }
      }
    });
  }
  return out;
}

// Inverted dropout: train mode zeroes with probability `rate` and scales
// survivors by 1/(1-rate); eval mode (and rate 0) returns the input tensor
// itself, which makes eval a bitwise identity for free.
inline Tensor dropout(Tape& tape, const Tensor& x, double rate, bool train,
                      Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw config_error("dropout: rate must lie in [0,1), got " +
                       std::to_string(rate));
  }
  if (!train || rate == 0.0) return x;

  const double keep_scale = 1.0 / (1.0 - rate);
  auto factor = std::make_shared<std::vector<double>>(x.numel());
  for (double& f : *factor) f = rng.uniform() < rate ? 0.0 : keep_scale;

  Tensor out = Tensor::zeros(x.shape());
  const double* px = x.values().data();
  double* po = out.values_mut().data();
  for (std::size_t i = 0; i < x.numel(); ++i) po[i] = px[i] * (*factor)[i];

  if (detail::track(tape, {&x})) {
    out.set_requires_grad(true);
    Tensor xc = x, oc = out;
    tape.record(out, [xc, oc, factor]() mutable {
      const double* pg = oc.grad().data();
      double* gx = xc.ensure_grad().data();
      for (std::size_t i = 0; i < xc.numel(); ++i)
        gx[i] += pg[i] * (*factor)[i];
    });
  }
  return out;
}

inline Tensor concat_axis(Tape& tape, const std::vector<Tensor>& xs,
                          std::size_t axis) {
  if (xs.empty()) throw config_error("concat_axis: no inputs");
  if (xs.size() == 1) return xs[0];
  const Shape& first = xs[0].shape();
  if (axis >= first.size()) {
    throw config_error("concat_axis: axis " + std::to_string(axis) +
                       " out of range for " + shape_str(first));
  }
  std::size_t axis_total = 0;
  for (const Tensor& t : xs) {
    if (t.rank() != first.size()) {
      throw config_error("concat_axis: rank mismatch " + shape_str(first) +
                         " vs " + shape_str(t.shape()));
    }
    for (std::size_t i = 0; i < first.size(); ++i) {
      if (i != axis && t.shape()[i] != first[i]) {
        throw config_error("concat_axis: shapes " + shape_str(first) +
                           " and " + shape_str(t.shape()) +
                           " differ off the concat axis");
      }
    }
    axis_total += t.shape()[axis];
  }
  Shape out_shape = first;
  out_shape[axis] = axis_total;

  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= first[i];
  for (std::size_t i = axis + 1; i < first.size(); ++i) inner *= first[i];

  Tensor out = Tensor::zeros(out_shape);
  double* po = out.values_mut().data();
  const std::size_t out_row = axis_total * inner;
  std::size_t offset = 0;
  for (const Tensor& t : xs) {
    const std::size_t rows = t.shape()[axis] * inner;
    const double* pt = t.values().data();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy(pt + o * rows, pt + (o + 1) * rows,
                po + o * out_row + offset);
    }
    offset += rows;
  }

  bool any_grad = false;
  for (const Tensor& t : xs) any_grad |= t.requires_grad();
  if (tape.enabled() && any_grad) {
    out.set_requires_grad(true);
    std::vector<Tensor> ins = xs;
    Tensor oc = out;
    tape.record(out, [ins, oc, outer, inner, out_row, axis]() mutable {
      const double* pg = oc.grad().data();
      std::size_t offset = 0;
      for (Tensor& t : ins) {
        const std::size_t rows = t.shape()[axis] * inner;
        if (t.requires_grad()) {
          double* gt = t.ensure_grad().data();
          for (std::size_t o = 0; o < outer; ++o) {
            const double* src = pg + o * out_row + offset;
            double* dst = gt + o * rows;
            for (std::size_t k = 0; k < rows; ++k) dst[k] += src[k];
          }
        }
        offset += rows;
      }
    });
  }
  return out;
}

inline Tensor slice_axis(Tape& tape, const Tensor& x, std::size_t axis,
                         std::size_t start, std::size_t len) {
  const Shape& s = x.shape();
  if (axis >= s.size() || start + len > s[axis]) {
    throw config_error("slice_axis: [" + std::to_string(start) + "," +
                       std::to_string(start + len) + ") on axis " +
                       std::to_string(axis) + " of " + shape_str(s));
  }
  Shape out_shape = s;
  out_shape[axis] = len;
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];

  Tensor out = Tensor::zeros(out_shape);
  const double* px = x.values().data();
  double* po = out.values_mut().data();
  const std::size_t in_row = s[axis] * inner;
  const std::size_t out_rows = len * inner;
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy(px + o * in_row + start * inner,
              px + o * in_row + (start + len) * inner, po + o * out_rows);
  }

  if (detail::track(tape, {&x})) {
    out.set_requires_grad(true);
    Tensor xc = x, oc = out;
    tape.record(out, [xc, oc, outer, inner, in_row, out_rows, start]() mutable {
      const double* pg = oc.grad().data();
      double* gx = xc.ensure_grad().data();
      for (std::size_t o = 0; o < outer; ++o) {
        const double* src = pg + o * out_rows;
        double* dst = gx + o * in_row + start * inner;
        for (std::size_t k = 0; k < out_rows; ++k) dst[k] += src[k];
      }
    });
  }
  return out;
}

// Shares the value buffer (no copy); gradient is added back element for
// element since row-major linear order is unchanged.
inline Tensor reshape(Tape& tape, const Tensor& x, Shape new_shape) {
  if (shape_numel(new_shape) != x.numel()) {
    throw config_error("reshape: " + shape_str(x.shape()) + " -> " +
                       shape_str(new_shape) + " changes element count");
  }
  Tensor out = x.alias_with_shape(std::move(new_shape));
  if (detail::track(tape, {&x})) {
    out.set_requires_grad(true);
    Tensor xc = x, oc = out;
    tape.record(out, [xc, oc]() mutable {
      const double* pg = oc.grad().data();
      double* gx = xc.ensure_grad().data();
      for (std::size_t i = 0; i < xc.numel(); ++i) gx[i] += pg[i];
    });
  }
  return out;
}

namespace detail {
inline std::vector<std::size_t> row_major_strides(const Shape& s) {
  std::vector<std::size_t> st(s.size(), 1);
  for (std::size_t i = s.size() - 1; i-- > 0;) st[i] = st[i + 1] * s[i + 1];
  return st;
}
}  // namespace detail

// Reorders axes: out dim k = in dim axes[k].
inline Tensor permute(Tape& tape, const Tensor& x,
                      const std::vector<std::size_t>& axes) {
  const Shape& s = x.shape();
  if (axes.size() != s.size()) {
    throw config_error("permute: got " + std::to_string(axes.size()) +
                       " axes for " + shape_str(s));
  }
  std::vector<bool> seen(s.size(), false);
  Shape out_shape(s.size());
  for (std::size_t k = 0; k < axes.size(); ++k) {
    if (axes[k] >= s.size() || seen[axes[k]]) {
      throw config_error("permute: invalid axis list for " + shape_str(s));
    }
    seen[axes[k]] = true;
    out_shape[k] = s[axes[k]];
  }

  const auto in_strides = detail::row_major_strides(s);
  std::vector<std::size_t> gather(s.size());
  for (std::size_t k = 0; k < axes.size(); ++k) gather[k] = in_strides[axes[k]];

  Tensor out = Tensor::zeros(out_shape);
  {
    const double* px = x.values().data();
    double* po = out.values_mut().data();
    std::vector<std::size_t> coord(out_shape.size(), 0);
    std::size_t src = 0;
    const std::size_t n = x.numel();
    for (std::size_t i = 0; i < n; ++i) {
      po[i] = px[src];
      for (std::size_t k = out_shape.size(); k-- > 0;) {
        if (++coord[k] < out_shape[k]) {
          src += gather[k];
          break;
        }
        coord[k] = 0;
        src -= gather[k] * (out_shape[k] - 1);
      }
    }
  }

  if (detail::track(tape, {&x})) {
    out.set_requires_grad(true);
    Tensor xc = x, oc = out;
    tape.record(out, [xc, oc, out_shape, gather]() mutable {
      const double* pg = oc.grad().data();
      double* gx = xc.ensure_grad().data();
      std::vector<std::size_t> coord(out_shape.size(), 0);
      std::size_t src = 0;
      const std::size_t n = xc.numel();
      for (std::size_t i = 0; i < n; ++i) {
        gx[src] += pg[i];
        for (std::size_t k = out_shape.size(); k-- > 0;) {
          if (++coord[k] < out_shape[k]) {
            src += gather[k];
            break;
          }
          coord[k] = 0;
          src -= gather[k] * (out_shape[k] - 1);
        }
      }
    });
  }
  return out;
}

}  // namespace stgat
