#pragma once

// Tape-based reverse-mode differentiation over 2-D tensors.
//
// Nodes are appended in evaluation order, so the tape is already a
// topological order and backward() is a single reverse sweep.

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "rbp/tensor.hpp"

namespace rbp {

/// A tensor owned by a model together with its gradient and Adam moments.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;
  Tensor first_moment;
  Tensor second_moment;
  std::size_t step = 0;
  bool has_grad = false;

  Parameter() = default;
  Parameter(std::string n, Tensor v, bool train = true)
      : name(std::move(n)),
        value(std::move(v)),
        grad(value.shape(), 0.0),
        trainable(train),
        first_moment(value.shape(), 0.0),
        second_moment(value.shape(), 0.0) {}
};

/// Owns a model's parameters. Indices handed out by add() stay valid for the
/// lifetime of the store, including across copies.
class ParameterStore {
 public:
  std::size_t add(std::string name, Tensor value, bool trainable = true) {
    for (const auto& p : params_) {
      if (p.name == name) throw std::invalid_argument("duplicate parameter name: " + name);
    }
    params_.emplace_back(std::move(name), std::move(value), trainable);
    return params_.size() - 1;
  }

  Parameter& operator[](std::size_t i) { return params_.at(i); }
  const Parameter& operator[](std::size_t i) const { return params_.at(i); }

  Parameter* find(std::string_view name) {
    for (auto& p : params_) {
      if (p.name == name) return &p;
    }
    return nullptr;
  }
  const Parameter* find(std::string_view name) const {
    for (const auto& p : params_) {
      if (p.name == name) return &p;
    }
    return nullptr;
  }

  std::size_t size() const noexcept { return params_.size(); }
  std::span<Parameter> all() noexcept { return params_; }
  std::span<const Parameter> all() const noexcept { return params_; }

  std::size_t trainable_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.trainable ? p.value.size() : 0;
    return n;
  }

 private:
  std::vector<Parameter> params_;
};

enum class Op {
  input,
  parameter,
  matmul,
  add,
  sub,
  mul,
  concat,
  relu,
  sigmoid,
  tanh,
  abs_diff,
  softmax,
  dropout_mask_apply,
  scalar_scale,
  scale_by,
  clip,
  center_rows,
  position_scatter,
  normalize_rows,
  sum,
  cross_entropy,
  mse,
};

inline const char* op_name(Op op) {
  switch (op) {
    case Op::input: return "input";
    case Op::parameter: return "parameter";
    case Op::matmul: return "matmul";
    case Op::add: return "add";
    case Op::sub: return "sub";
    case Op::mul: return "mul";
    case Op::concat: return "concat";
    case Op::relu: return "relu";
    case Op::sigmoid: return "sigmoid";
    case Op::tanh: return "tanh";
    case Op::abs_diff: return "abs_diff";
    case Op::softmax: return "softmax";
    case Op::dropout_mask_apply: return "dropout_mask_apply";
    case Op::scalar_scale: return "scalar_scale";
    case Op::scale_by: return "scale_by";
    case Op::clip: return "clip";
    case Op::center_rows: return "center_rows";
    case Op::position_scatter: return "position_scatter";
    case Op::normalize_rows: return "normalize_rows";
    case Op::sum: return "sum";
    case Op::cross_entropy: return "cross_entropy";
    case Op::mse: return "mse";
  }
  return "?";
}

/// Handle to a node of a Graph.
struct Var {
  std::size_t id = 0;
};

/// Floor applied to probabilities before taking logarithms.
inline constexpr double kProbabilityFloor = 1e-12;

class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // ---- leaves -----------------------------------------------------------

  Var input(Tensor value) {
    Node n;
    n.op = Op::input;
    n.value = std::move(value);
    return push(std::move(n));
  }

  /// Registers a parameter leaf. Each parameter gets one node per graph, so
  /// weights shared across time steps accumulate into a single gradient.
  Var param(Parameter& p) {
    if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var{it->second};
    Node n;
    n.op = Op::parameter;
    n.value = p.value;
    n.param = &p;
    n.needs_grad = p.trainable;
    Var v = push(std::move(n));
    param_nodes_.emplace(&p, v.id);
    return v;
  }

  // ---- primitives -------------------------------------------------------

  Var matmul(Var a, Var b) {
    const Tensor& x = value(a);
    const Tensor& y = value(b);
    if (x.cols() != y.rows()) mismatch(Op::matmul, x, y);
    const std::size_t r = x.rows(), k = x.cols(), c = y.cols();
    Tensor out = Tensor::matrix(r, c);
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t t = 0; t < k; ++t) {
        const double xv = x(i, t);
        if (xv == 0.0) continue;
        const double* yrow = &y.values()[t * c];
        double* orow = &out.values()[i * c];
        for (std::size_t j = 0; j < c; ++j) orow[j] += xv * yrow[j];
      }
    }
    return push_op(Op::matmul, {a, b}, std::move(out));
  }

  /// Elementwise sum. `b` may also be a single row broadcast over the rows of `a`.
  Var add(Var a, Var b) {
    const Tensor& x = value(a);
    const Tensor& y = value(b);
    Tensor out = Tensor::matrix(x.rows(), x.cols());
    if (same_shape(x, y)) {
      for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
    } else if (y.rows() == 1 && y.cols() == x.cols()) {
      for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) = x(i, j) + y[j];
    } else {
      mismatch(Op::add, x, y);
    }
    return push_op(Op::add, {a, b}, std::move(out));
  }

  Var sub(Var a, Var b) {
    const Tensor& x = value(a);
    const Tensor& y = value(b);
    if (!same_shape(x, y)) mismatch(Op::sub, x, y);
    Tensor out = Tensor::matrix(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i];
    return push_op(Op::sub, {a, b}, std::move(out));
  }

  Var mul(Var a, Var b) {
    const Tensor& x = value(a);
    const Tensor& y = value(b);
    if (!same_shape(x, y)) mismatch(Op::mul, x, y);
    Tensor out = Tensor::matrix(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
    return push_op(Op::mul, {a, b}, std::move(out));
  }

  /// Column-wise concatenation; all parts must have the same row count.
  Var concat(std::span<const Var> parts) {
    if (parts.empty()) throw ShapeError("concat: no operands");
    const std::size_t r = value(parts[0]).rows();
    std::size_t c = 0;
    for (Var p : parts) {
      if (value(p).rows() != r) mismatch(Op::concat, value(parts[0]), value(p));
      c += value(p).cols();
    }
    Tensor out = Tensor::matrix(r, c);
    std::size_t off = 0;
    for (Var p : parts) {
      const Tensor& x = value(p);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < x.cols(); ++j) out(i, off + j) = x(i, j);
      off += x.cols();
    }
    return push_op(Op::concat, std::vector<Var>(parts.begin(), parts.end()), std::move(out));
  }
  Var concat(std::initializer_list<Var> parts) {
    return concat(std::span<const Var>(parts.begin(), parts.size()));
  }

  Var relu(Var a) {
    return unary(Op::relu, a, [](double v) { return v > 0.0 ? v : 0.0; });
  }
  Var sigmoid(Var a) {
    return unary(Op::sigmoid, a, [](double v) {
      if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
      const double e = std::exp(v);
      return e / (1.0 + e);
    });
  }
  Var tanh(Var a) {
    return unary(Op::tanh, a, [](double v) { return std::tanh(v); });
  }

  /// Full-wave rectified difference |a - b|.
  Var abs_diff(Var a, Var b) {
    const Tensor& x = value(a);
    const Tensor& y = value(b);
    if (!same_shape(x, y)) mismatch(Op::abs_diff, x, y);
    Tensor out = Tensor::matrix(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::abs(x[i] - y[i]);
    return push_op(Op::abs_diff, {a, b}, std::move(out));
  }

  /// Row-wise softmax.
  Var softmax(Var a) {
    const Tensor& x = value(a);
    Tensor out = Tensor::matrix(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i) {
      auto in = x.row(i);
      auto o = out.row(i);
      const double mx = *std::max_element(in.begin(), in.end());
      double s = 0.0;
      for (std::size_t j = 0; j < in.size(); ++j) s += (o[j] = std::exp(in[j] - mx));
      for (double& v : o) v /= s;
    }
    return push_op(Op::softmax, {a}, std::move(out));
  }

  /// Multiplies by a fixed mask; inverted-dropout scaling is baked into the mask.
  Var dropout_mask_apply(Var a, Tensor mask) {
    const Tensor& x = value(a);
    if (!same_shape(x, mask)) mismatch(Op::dropout_mask_apply, x, mask);
    Tensor out = Tensor::matrix(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * mask[i];
    Var v = push_op(Op::dropout_mask_apply, {a}, std::move(out));
    nodes_[v.id].aux = std::move(mask);
    return v;
  }

  Var scalar_scale(Var a, double factor) {
    const Tensor& x = value(a);
    Tensor out = Tensor::matrix(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * factor;
    Var v = push_op(Op::scalar_scale, {a}, std::move(out));
    nodes_[v.id].lo = factor;
    return v;
  }

  /// Scales `a` by the single value held in `s` (a 1x1 node).
  Var scale_by(Var a, Var s) {
    const Tensor& x = value(a);
    const Tensor& f = value(s);
    if (f.size() != 1) mismatch(Op::scale_by, x, f);
    Tensor out = Tensor::matrix(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * f[0];
    return push_op(Op::scale_by, {a, s}, std::move(out));
  }

  Var clip(Var a, double lo, double hi) {
    const Tensor& x = value(a);
    Tensor out = Tensor::matrix(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::clamp(x[i], lo, hi);
    Var v = push_op(Op::clip, {a}, std::move(out));
    nodes_[v.id].lo = lo;
    nodes_[v.id].hi = hi;
    return v;
  }

  /// Subtracts each row's mean from the row.
  Var center_rows(Var a) {
    const Tensor& x = value(a);
    Tensor out = Tensor::matrix(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i) {
      auto in = x.row(i);
      const double m = std::accumulate(in.begin(), in.end(), 0.0) / static_cast<double>(in.size());
      for (std::size_t j = 0; j < in.size(); ++j) out(i, j) = in[j] - m;
    }
    return push_op(Op::center_rows, {a}, std::move(out));
  }

  /// Fixed-weight scatter from context positions to vocabulary bins:
  /// out[b, tokens[b][i]] += a[b, i]. `tokens` is row-major, one row per batch item.
  Var position_scatter(Var a, std::vector<std::size_t> tokens, std::size_t vocab) {
    const Tensor& x = value(a);
    if (tokens.size() != x.size()) {
      throw ShapeError("position_scatter: " + std::to_string(tokens.size()) +
                       " token indices for operand " + shape_string(x.shape()));
    }
    Tensor out = Tensor::matrix(x.rows(), vocab);
    for (std::size_t b = 0; b < x.rows(); ++b) {
      for (std::size_t i = 0; i < x.cols(); ++i) {
        const std::size_t t = tokens[b * x.cols() + i];
        if (t >= vocab) throw std::out_of_range("position_scatter: token index out of range");
        out(b, t) += x(b, i);
      }
    }
    Var v = push_op(Op::position_scatter, {a}, std::move(out));
    nodes_[v.id].indices = std::move(tokens);
    return v;
  }

  /// Divides every row by its sum. Rows whose sum is not positive are replaced
  /// by the matching row of `fallback` and counted in fallback_rows().
  Var normalize_rows(Var a, Var fallback) {
    const Tensor& x = value(a);
    const Tensor& f = value(fallback);
    if (!same_shape(x, f)) mismatch(Op::normalize_rows, x, f);
    Tensor out = Tensor::matrix(x.rows(), x.cols());
    Tensor sums = Tensor::matrix(x.rows(), 1);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      auto in = x.row(i);
      const double s = std::accumulate(in.begin(), in.end(), 0.0);
      sums[i] = s;
      if (s > 0.0) {
        for (std::size_t j = 0; j < in.size(); ++j) out(i, j) = in[j] / s;
      } else {
        ++fallback_rows_;
        for (std::size_t j = 0; j < in.size(); ++j) out(i, j) = f(i, j);
      }
    }
    Var v = push_op(Op::normalize_rows, {a, fallback}, std::move(out));
    nodes_[v.id].aux = std::move(sums);
    return v;
  }

  Var sum(Var a) {
    const Tensor& x = value(a);
    const double s = std::accumulate(x.values().begin(), x.values().end(), 0.0);
    return push_op(Op::sum, {a}, Tensor::scalar(s));
  }

  /// Mean negative log-probability of the target column of each row.
  Var cross_entropy(Var probs, std::span<const std::size_t> targets) {
    const Tensor& p = value(probs);
    if (targets.size() != p.rows()) {
      throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for probabilities " +
                       shape_string(p.shape()));
    }
    double loss = 0.0;
    for (std::size_t i = 0; i < p.rows(); ++i) {
      if (targets[i] >= p.cols()) throw std::out_of_range("cross_entropy: target index out of range");
      loss -= std::log(std::max(p(i, targets[i]), kProbabilityFloor));
    }
    loss /= static_cast<double>(p.rows());
    Var v = push_op(Op::cross_entropy, {probs}, Tensor::scalar(loss));
    nodes_[v.id].indices.assign(targets.begin(), targets.end());
    return v;
  }

  /// Mean squared error against a constant target.
  Var mse(Var a, Tensor target) {
    const Tensor& x = value(a);
    if (!same_shape(x, target)) mismatch(Op::mse, x, target);
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - target[i]) * (x[i] - target[i]);
    Var v = push_op(Op::mse, {a}, Tensor::scalar(s / static_cast<double>(x.size())));
    nodes_[v.id].aux = std::move(target);
    return v;
  }

  /// Generic dispatcher over the operand-only primitives.
  Var apply(Op kind, std::span<const Var> in) {
    auto need = [&](std::size_t n) {
      if (in.size() != n) {
        throw std::invalid_argument(std::string(op_name(kind)) + ": expected " + std::to_string(n) +
                                    " operands, got " + std::to_string(in.size()));
      }
    };
    switch (kind) {
      case Op::matmul: need(2); return matmul(in[0], in[1]);
      case Op::add: need(2); return add(in[0], in[1]);
      case Op::sub: need(2); return sub(in[0], in[1]);
      case Op::mul: need(2); return mul(in[0], in[1]);
      case Op::abs_diff: need(2); return abs_diff(in[0], in[1]);
      case Op::scale_by: need(2); return scale_by(in[0], in[1]);
      case Op::concat: return concat(in);
      case Op::relu: need(1); return relu(in[0]);
      case Op::sigmoid: need(1); return sigmoid(in[0]);
      case Op::tanh: need(1); return tanh(in[0]);
      case Op::softmax: need(1); return softmax(in[0]);
      case Op::center_rows: need(1); return center_rows(in[0]);
      case Op::sum: need(1); return sum(in[0]);
      default:
        throw std::invalid_argument(std::string("apply: ") + op_name(kind) + " needs extra arguments");
    }
  }

  // ---- access -----------------------------------------------------------

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  Op kind(Var v) const { return nodes_.at(v.id).op; }
  std::size_t size() const noexcept { return nodes_.size(); }
  std::size_t fallback_rows() const noexcept { return fallback_rows_; }

  /// Gradient of the last backward() target with respect to `v`; zeros when
  /// no gradient reached the node.
  Tensor grad(Var v) const {
    const Node& n = nodes_.at(v.id);
    return n.grad.empty() ? Tensor(n.value.shape(), 0.0) : n.grad;
  }

  /// Inputs of relu, abs_diff and clip nodes sitting within `tol` of a kink.
  std::size_t kink_count(double tol) const {
    std::size_t hits = 0;
    for (const Node& n : nodes_) {
      if (n.op == Op::relu) {
        if (!nodes_[n.in[0]].needs_grad) continue;
        for (double v : nodes_[n.in[0]].value.values()) hits += std::abs(v) <= tol;
      } else if (n.op == Op::abs_diff) {
        const Tensor& x = nodes_[n.in[0]].value;
        const Tensor& y = nodes_[n.in[1]].value;
        const bool varies = nodes_[n.in[0]].needs_grad || nodes_[n.in[1]].needs_grad;
        if (!varies) continue;
        for (std::size_t i = 0; i < x.size(); ++i) hits += std::abs(x[i] - y[i]) <= tol;
      } else if (n.op == Op::clip) {
        if (!nodes_[n.in[0]].needs_grad) continue;
        for (double v : nodes_[n.in[0]].value.values()) hits += std::abs(v - n.lo) <= tol || std::abs(v - n.hi) <= tol;
      }
    }
    return hits;
  }

  /// Reverse sweep from a scalar node. Zeroes and then fills the gradient of
  /// every parameter on the tape; frozen parameters keep a zero gradient.
  void backward(Var loss) {
    Node& root = nodes_.at(loss.id);
    if (root.value.size() != 1) {
      throw std::invalid_argument("backward: loss must be scalar, got " + shape_string(root.value.shape()));
    }
    for (Node& n : nodes_) n.grad = Tensor();
    for (auto& [p, id] : param_nodes_) {
      p->grad = Tensor(p->value.shape(), 0.0);
      p->has_grad = true;
    }
    root.grad = Tensor(root.value.shape(), 1.0);

    for (std::size_t id = loss.id + 1; id-- > 0;) {
      Node& n = nodes_[id];
      if (!n.needs_grad || n.grad.empty()) continue;
      propagate(n);
    }
    for (auto& [p, id] : param_nodes_) {
      const Node& n = nodes_[id];
      if (p->trainable && !n.grad.empty()) {
        for (std::size_t i = 0; i < n.grad.size(); ++i) p->grad[i] += n.grad[i];
      }
    }
  }

 private:
  struct Node {
    Op op = Op::input;
    std::vector<std::size_t> in;
    Tensor value;
    Tensor grad;
    Tensor aux;
    std::vector<std::size_t> indices;
    double lo = 0.0;
    double hi = 0.0;
    Parameter* param = nullptr;
    bool needs_grad = false;
  };

  [[noreturn]] static void mismatch(Op op, const Tensor& a, const Tensor& b) {
    throw ShapeError(std::string(op_name(op)) + ": incompatible shapes " + shape_string(a.shape()) + " and " +
                     shape_string(b.shape()));
  }

  Var push(Node n) {
    nodes_.push_back(std::move(n));
    return Var{nodes_.size() - 1};
  }

  Var push_op(Op op, std::vector<Var> inputs, Tensor out) {
    Node n;
    n.op = op;
    for (Var v : inputs) {
      n.in.push_back(v.id);
      n.needs_grad = n.needs_grad || nodes_[v.id].needs_grad;
    }
    n.value = std::move(out);
    return push(std::move(n));
  }
  Var push_op(Op op, std::initializer_list<Var> inputs, Tensor out) {
    return push_op(op, std::vector<Var>(inputs), std::move(out));
  }

  template <class F>
  Var unary(Op op, Var a, F f) {
    const Tensor& x = value(a);
    Tensor out = Tensor::matrix(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
    return push_op(op, {a}, std::move(out));
  }

  Tensor& grad_of(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) n.grad = Tensor::matrix(n.value.rows(), n.value.cols());
    return n.grad;
  }

  void propagate(const Node& n) {
    const Tensor& g = n.grad;
    auto wants = [&](std::size_t k) { return nodes_[n.in[k]].needs_grad; };
    switch (n.op) {
      case Op::input:
      case Op::parameter:
        break;
      case Op::matmul: {
        const Tensor& x = nodes_[n.in[0]].value;
        const Tensor& y = nodes_[n.in[1]].value;
        const std::size_t r = x.rows(), k = x.cols(), c = y.cols();
        if (wants(0)) {
          Tensor& gx = grad_of(n.in[0]);
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t t = 0; t < k; ++t) {
              double s = 0.0;
              for (std::size_t j = 0; j < c; ++j) s += g(i, j) * y(t, j);
              gx(i, t) += s;
            }
        }
        if (wants(1)) {
          Tensor& gy = grad_of(n.in[1]);
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t t = 0; t < k; ++t) {
              const double xv = x(i, t);
              if (xv == 0.0) continue;
              for (std::size_t j = 0; j < c; ++j) gy(t, j) += xv * g(i, j);
            }
        }
        break;
      }
      case Op::add: {
        if (wants(0)) {
          Tensor& gx = grad_of(n.in[0]);
          for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
        }
        if (wants(1)) {
          Tensor& gy = grad_of(n.in[1]);
          if (gy.size() == g.size()) {
            for (std::size_t i = 0; i < g.size(); ++i) gy[i] += g[i];
          } else {
            for (std::size_t i = 0; i < g.rows(); ++i)
              for (std::size_t j = 0; j < g.cols(); ++j) gy[j] += g(i, j);
          }
        }
        break;
      }
      case Op::sub: {
        if (wants(0)) {
          Tensor& gx = grad_of(n.in[0]);
          for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
        }
        if (wants(1)) {
          Tensor& gy = grad_of(n.in[1]);
          for (std::size_t i = 0; i < g.size(); ++i) gy[i] -= g[i];
        }
        break;
      }
      case Op::mul: {
        const Tensor& x = nodes_[n.in[0]].value;
        const Tensor& y = nodes_[n.in[1]].value;
        if (wants(0)) {
          Tensor& gx = grad_of(n.in[0]);
          for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * y[i];
        }
        if (wants(1)) {
          Tensor& gy = grad_of(n.in[1]);
          for (std::size_t i = 0; i < g.size(); ++i) gy[i] += g[i] * x[i];
        }
        break;
      }
      case Op::concat: {
        std::size_t off = 0;
        for (std::size_t k = 0; k < n.in.size(); ++k) {
          const std::size_t c = nodes_[n.in[k]].value.cols();
          if (wants(k)) {
            Tensor& gx = grad_of(n.in[k]);
            for (std::size_t i = 0; i < g.rows(); ++i)
              for (std::size_t j = 0; j < c; ++j) gx(i, j) += g(i, off + j);
          }
          off += c;
        }
        break;
      }
      case Op::relu: {
        const Tensor& x = nodes_[n.in[0]].value;
        Tensor& gx = grad_of(n.in[0]);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += x[i] > 0.0 ? g[i] : 0.0;
        break;
      }
      case Op::sigmoid: {
        Tensor& gx = grad_of(n.in[0]);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * n.value[i] * (1.0 - n.value[i]);
        break;
      }
      case Op::tanh: {
        Tensor& gx = grad_of(n.in[0]);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (1.0 - n.value[i] * n.value[i]);
        break;
      }
      case Op::abs_diff: {
        const Tensor& x = nodes_[n.in[0]].value;
        const Tensor& y = nodes_[n.in[1]].value;
        for (std::size_t k = 0; k < 2; ++k) {
          if (!wants(k)) continue;
          Tensor& gk = grad_of(n.in[k]);
          const double sign = k == 0 ? 1.0 : -1.0;
          for (std::size_t i = 0; i < g.size(); ++i) {
            const double d = x[i] - y[i];
            const double s = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
            gk[i] += sign * s * g[i];
          }
        }
        break;
      }
      case Op::softmax: {
        Tensor& gx = grad_of(n.in[0]);
        for (std::size_t i = 0; i < g.rows(); ++i) {
          double dot = 0.0;
          for (std::size_t j = 0; j < g.cols(); ++j) dot += g(i, j) * n.value(i, j);
          for (std::size_t j = 0; j < g.cols(); ++j) gx(i, j) += n.value(i, j) * (g(i, j) - dot);
        }
        break;
      }
      case Op::dropout_mask_apply: {
        Tensor& gx = grad_of(n.in[0]);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * n.aux[i];
        break;
      }
      case Op::scalar_scale: {
        Tensor& gx = grad_of(n.in[0]);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * n.lo;
        break;
      }
      case Op::scale_by: {
        const Tensor& x = nodes_[n.in[0]].value;
        const double f = nodes_[n.in[1]].value[0];
        if (wants(0)) {
          Tensor& gx = grad_of(n.in[0]);
          for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * f;
        }
        if (wants(1)) {
          double s = 0.0;
          for (std::size_t i = 0; i < g.size(); ++i) s += g[i] * x[i];
          grad_of(n.in[1])[0] += s;
        }
        break;
      }
      case Op::clip: {
        const Tensor& x = nodes_[n.in[0]].value;
        Tensor& gx = grad_of(n.in[0]);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += (x[i] >= n.lo && x[i] <= n.hi) ? g[i] : 0.0;
        break;
      }
      case Op::center_rows: {
        Tensor& gx = grad_of(n.in[0]);
        for (std::size_t i = 0; i < g.rows(); ++i) {
          auto gr = g.row(i);
          const double m = std::accumulate(gr.begin(), gr.end(), 0.0) / static_cast<double>(gr.size());
          for (std::size_t j = 0; j < gr.size(); ++j) gx(i, j) += gr[j] - m;
        }
        break;
      }
      case Op::position_scatter: {
        Tensor& gx = grad_of(n.in[0]);
        const std::size_t c = gx.cols();
        for (std::size_t b = 0; b < gx.rows(); ++b)
          for (std::size_t i = 0; i < c; ++i) gx(b, i) += g(b, n.indices[b * c + i]);
        break;
      }
      case Op::normalize_rows: {
        const Tensor& x = nodes_[n.in[0]].value;
        for (std::size_t i = 0; i < g.rows(); ++i) {
          const double s = n.aux[i];
          if (s > 0.0) {
            if (!wants(0)) continue;
            Tensor& gx = grad_of(n.in[0]);
            double dot = 0.0;
            for (std::size_t j = 0; j < g.cols(); ++j) dot += g(i, j) * x(i, j);
            for (std::size_t j = 0; j < g.cols(); ++j) gx(i, j) += (g(i, j) - dot / s) / s;
          } else if (wants(1)) {
            Tensor& gf = grad_of(n.in[1]);
            for (std::size_t j = 0; j < g.cols(); ++j) gf(i, j) += g(i, j);
          }
        }
        break;
      }
      case Op::sum: {
        Tensor& gx = grad_of(n.in[0]);
        for (double& v : gx.values()) v += g[0];
        break;
      }
      case Op::cross_entropy: {
        const Tensor& p = nodes_[n.in[0]].value;
        Tensor& gx = grad_of(n.in[0]);
        const double scale = g[0] / static_cast<double>(p.rows());
        for (std::size_t i = 0; i < p.rows(); ++i) {
          const double pt = p(i, n.indices[i]);
          if (pt > kProbabilityFloor) gx(i, n.indices[i]) -= scale / pt;
        }
        break;
      }
      case Op::mse: {
        const Tensor& x = nodes_[n.in[0]].value;
        Tensor& gx = grad_of(n.in[0]);
        const double scale = 2.0 * g[0] / static_cast<double>(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) gx[i] += scale * (x[i] - n.aux[i]);
        break;
      }
    }
  }

  std::vector<Node> nodes_;
  std::unordered_map<Parameter*, std::size_t> param_nodes_;
  std::size_t fallback_rows_ = 0;
};

}  // namespace rbp
