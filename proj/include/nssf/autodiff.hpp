/* Copyright 2026 The nssf Authors.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#pragma once

#include <Eigen/Core>

#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "nssf/errors.hpp"

namespace nssf::ad {

// Reverse-mode automatic differentiation over real matrices. Nodes live on
// a Tape in topological order; values are flat row-major arrays viewed as
// rows x cols. Complex quantities are carried as separate real/imaginary
// tensors. Double precision throughout.

using Arr = Eigen::ArrayXd;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<Mat>;
using ConstMatMap = Eigen::Map<const Mat>;

// Plain value container, used for parameters outside any tape.
struct Tensor {
  Eigen::Index rows = 0, cols = 0;
  Arr v;

  Tensor() = default;
  Tensor(Eigen::Index r, Eigen::Index c) : rows(r), cols(c), v(Arr::Zero(r * c)) {}
  Eigen::Index size() const { return rows * cols; }
  MatMap mat() { return MatMap(v.data(), rows, cols); }
  ConstMatMap mat() const { return ConstMatMap(v.data(), rows, cols); }
};

using Params = std::map<std::string, Tensor>;  // ordered -> deterministic

class Tape;

struct Var {
  Tape* tape = nullptr;
  int id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
};

class Tape {
 public:
  struct Node {
    Eigen::Index rows = 0, cols = 0;
    Arr value;
    Arr grad;  // empty until touched in backward
    bool requires_grad = false;
    std::function<void()> backward;  // empty for leaves
  };

  // --- node construction -------------------------------------------------

  Var leaf(const Tensor& t, bool requires_grad) {
    return push(t.rows, t.cols, t.v, requires_grad, {});
  }
  Var constant(Arr value, Eigen::Index rows, Eigen::Index cols) {
    return push(rows, cols, std::move(value), false, {});
  }
  Var scalar_const(double v) {
    Arr a(1);
    a[0] = v;
    return push(1, 1, std::move(a), false, {});
  }

  // Generic fused op: modules add custom nodes with hand-written adjoints.
  Var make_node(Eigen::Index rows, Eigen::Index cols, Arr value,
                const std::vector<Var>& parents,
                std::function<void()> backward) {
    bool rg = false;
    for (const Var& p : parents) rg = rg || node(p.id).requires_grad;
    return push(rows, cols, std::move(value), rg, rg ? std::move(backward)
                                                     : std::function<void()>());
  }

  // --- accessors ----------------------------------------------------------

  Node& node(int id) { return nodes_[id]; }
  const Node& node(int id) const { return nodes_[id]; }
  Eigen::Index rows(Var v) const { return node(v.id).rows; }
  Eigen::Index cols(Var v) const { return node(v.id).cols; }
  const Arr& value(Var v) const { return node(v.id).value; }
  ConstMatMap mat(Var v) const {
    const Node& n = node(v.id);
    return ConstMatMap(n.value.data(), n.rows, n.cols);
  }
  // Gradient wrt v after backward(); zeros if the loss never touched it.
  Arr grad(Var v) const {
    const Node& n = node(v.id);
    if (n.grad.size() == 0) return Arr::Zero(n.rows * n.cols);
    return n.grad;
  }

  // Accumulation helper for backward closures.
  Arr& grad_buffer(int id) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0) n.grad = Arr::Zero(n.rows * n.cols);
    return n.grad;
  }
  bool grad_pending(int id) const { return nodes_[id].grad.size() != 0; }

  void backward(Var loss) {
    Node& l = node(loss.id);
    require(l.rows == 1 && l.cols == 1, "backward: loss must be scalar");
    require(l.requires_grad, "backward: loss does not depend on parameters");
    grad_buffer(loss.id)[0] = 1.0;
    for (int id = loss.id; id >= 0; --id) {
      Node& n = nodes_[id];
      if (!n.requires_grad || n.grad.size() == 0 || !n.backward) continue;
      n.backward();
    }
  }

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  Var push(Eigen::Index rows, Eigen::Index cols, Arr value, bool requires_grad,
           std::function<void()> backward) {
    require(value.size() == rows * cols, "tape: shape/value mismatch");
    Node n;
    n.rows = rows;
    n.cols = cols;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<int>(nodes_.size()) - 1};
  }

  std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------
// Elementwise and structural primitives

namespace detail {

inline void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.tape->rows(a) != b.tape->rows(b) || a.tape->cols(a) != b.tape->cols(b))
    throw ShapeError(std::string(op) + ": shape mismatch");
}

// Elementwise op with dvalue/dinput given as a function of (input, output).
template <typename F, typename DF>
Var unary_elementwise(Var a, F f, DF df, const char* /*name*/) {
  Tape* tp = a.tape;
  Arr out = tp->value(a).unaryExpr(f);
  const int aid = a.id;
  Var r = tp->make_node(tp->rows(a), tp->cols(a), std::move(out), {a},
                        std::function<void()>());
  const int rid = r.id;
  if (tp->node(rid).requires_grad) {
    tp->node(rid).backward = [tp, aid, rid, df]() {
      const Arr& g = tp->node(rid).grad;
      const Arr& x = tp->node(aid).value;
      const Arr& y = tp->node(rid).value;
      tp->grad_buffer(aid) += g * x.binaryExpr(y, df);
    };
  }
  return r;
}

}  // namespace detail

inline Var add(Var a, Var b) {
  detail::check_same_shape(a, b, "add");
  Tape* tp = a.tape;
  Var r = tp->make_node(tp->rows(a), tp->cols(a), tp->value(a) + tp->value(b),
                        {a, b}, {});
  const int aid = a.id, bid = b.id, rid = r.id;
  if (tp->node(rid).requires_grad)
    tp->node(rid).backward = [tp, aid, bid, rid]() {
      const Arr& g = tp->node(rid).grad;
      if (tp->node(aid).requires_grad) tp->grad_buffer(aid) += g;
      if (tp->node(bid).requires_grad) tp->grad_buffer(bid) += g;
    };
  return r;
}

inline Var sub(Var a, Var b) {
  detail::check_same_shape(a, b, "sub");
  Tape* tp = a.tape;
  Var r = tp->make_node(tp->rows(a), tp->cols(a), tp->value(a) - tp->value(b),
                        {a, b}, {});
  const int aid = a.id, bid = b.id, rid = r.id;
  if (tp->node(rid).requires_grad)
    tp->node(rid).backward = [tp, aid, bid, rid]() {
      const Arr& g = tp->node(rid).grad;
      if (tp->node(aid).requires_grad) tp->grad_buffer(aid) += g;
      if (tp->node(bid).requires_grad) tp->grad_buffer(bid) -= g;
    };
  return r;
}

// Elementwise (Hadamard) product.
inline Var mul(Var a, Var b) {
  detail::check_same_shape(a, b, "mul");
  Tape* tp = a.tape;
  Var r = tp->make_node(tp->rows(a), tp->cols(a), tp->value(a) * tp->value(b),
                        {a, b}, {});
  const int aid = a.id, bid = b.id, rid = r.id;
  if (tp->node(rid).requires_grad)
    tp->node(rid).backward = [tp, aid, bid, rid]() {
      const Arr& g = tp->node(rid).grad;
      if (tp->node(aid).requires_grad)
        tp->grad_buffer(aid) += g * tp->node(bid).value;
      if (tp->node(bid).requires_grad)
        tp->grad_buffer(bid) += g * tp->node(aid).value;
    };
  return r;
}

inline Var scale(Var a, double s) {
  Tape* tp = a.tape;
  Var r = tp->make_node(tp->rows(a), tp->cols(a), tp->value(a) * s, {a}, {});
  const int aid = a.id, rid = r.id;
  if (tp->node(rid).requires_grad)
    tp->node(rid).backward = [tp, aid, rid, s]() {
      tp->grad_buffer(aid) += tp->node(rid).grad * s;
    };
  return r;
}

inline Var add_scalar(Var a, double s) {
  Tape* tp = a.tape;
  Var r = tp->make_node(tp->rows(a), tp->cols(a), tp->value(a) + s, {a}, {});
  const int aid = a.id, rid = r.id;
  if (tp->node(rid).requires_grad)
    tp->node(rid).backward = [tp, aid, rid]() {
      tp->grad_buffer(aid) += tp->node(rid).grad;
    };
  return r;
}

inline Var sigmoid(Var a) {
  return detail::unary_elementwise(
      a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); }, "sigmoid");
}

inline Var tanh_(Var a) {
  return detail::unary_elementwise(
      a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; }, "tanh");
}

inline Var exp_(Var a) {
  return detail::unary_elementwise(
      a, [](double x) { return std::exp(x); },
      [](double, double y) { return y; }, "exp");
}

inline Var log_(Var a) {
  if ((a.tape->value(a) <= 0.0).any())
    throw DomainError("log of non-positive value");
  return detail::unary_elementwise(
      a, [](double x) { return std::log(x); },
      [](double x, double) { return 1.0 / x; }, "log");
}

inline Var square(Var a) {
  return detail::unary_elementwise(
      a, [](double x) { return x * x; },
      [](double x, double) { return 2.0 * x; }, "square");
}

inline Var sqrt_(Var a) {
  if ((a.tape->value(a) <= 0.0).any())
    throw DomainError("sqrt of non-positive value");
  return detail::unary_elementwise(
      a, [](double x) { return std::sqrt(x); },
      [](double, double y) { return 0.5 / y; }, "sqrt");
}

// [rows_a x cols_a] . [cols_a x cols_b]
inline Var matmul(Var a, Var b) {
  Tape* tp = a.tape;
  if (tp->cols(a) != tp->rows(b)) throw ShapeError("matmul: inner dims differ");
  const Eigen::Index m = tp->rows(a), k = tp->cols(a), n = tp->cols(b);
  Arr out(m * n);
  MatMap(out.data(), m, n).noalias() = tp->mat(a) * tp->mat(b);
  Var r = tp->make_node(m, n, std::move(out), {a, b}, {});
  const int aid = a.id, bid = b.id, rid = r.id;
  if (tp->node(rid).requires_grad)
    tp->node(rid).backward = [tp, aid, bid, rid, m, k, n]() {
      ConstMatMap g(tp->node(rid).grad.data(), m, n);
      ConstMatMap av(tp->node(aid).value.data(), m, k);
      ConstMatMap bv(tp->node(bid).value.data(), k, n);
      if (tp->node(aid).requires_grad)
        MatMap(tp->grad_buffer(aid).data(), m, k).noalias() += g * bv.transpose();
      if (tp->node(bid).requires_grad)
        MatMap(tp->grad_buffer(bid).data(), k, n).noalias() += av.transpose() * g;
    };
  return r;
}

// Adds a [1 x cols] row vector to every row (bias broadcast).
inline Var add_rowvec(Var a, Var bias) {
  Tape* tp = a.tape;
  if (tp->rows(bias) != 1 || tp->cols(bias) != tp->cols(a))
    throw ShapeError("add_rowvec: bias must be [1 x cols]");
  const Eigen::Index m = tp->rows(a), n = tp->cols(a);
  Arr out(m * n);
  MatMap(out.data(), m, n) =
      tp->mat(a).rowwise() + Eigen::RowVectorXd::Map(tp->value(bias).data(), n);
  Var r = tp->make_node(m, n, std::move(out), {a, bias}, {});
  const int aid = a.id, bid = bias.id, rid = r.id;
  if (tp->node(rid).requires_grad)
    tp->node(rid).backward = [tp, aid, bid, rid, m, n]() {
      ConstMatMap g(tp->node(rid).grad.data(), m, n);
      if (tp->node(aid).requires_grad) tp->grad_buffer(aid) += tp->node(rid).grad;
      if (tp->node(bid).requires_grad)
        Eigen::RowVectorXd::Map(tp->grad_buffer(bid).data(), n) +=
            g.colwise().sum();
    };
  return r;
}

inline Var sum(Var a) {
  Tape* tp = a.tape;
  Arr out(1);
  out[0] = tp->value(a).sum();
  Var r = tp->make_node(1, 1, std::move(out), {a}, {});
  const int aid = a.id, rid = r.id;
  if (tp->node(rid).requires_grad)
    tp->node(rid).backward = [tp, aid, rid]() {
      tp->grad_buffer(aid) += tp->node(rid).grad[0];
    };
  return r;
}

inline Var mean(Var a) {
  Tape* tp = a.tape;
  const double inv = 1.0 / static_cast<double>(tp->value(a).size());
  return scale(sum(a), inv);
}

// Columns [c0, c1) of a.
inline Var slice_cols(Var a, Eigen::Index c0, Eigen::Index c1) {
  Tape* tp = a.tape;
  const Eigen::Index m = tp->rows(a), n = tp->cols(a);
  if (c0 < 0 || c1 > n || c0 >= c1) throw ShapeError("slice_cols: bad range");
  const Eigen::Index w = c1 - c0;
  Arr out(m * w);
  MatMap(out.data(), m, w) = tp->mat(a).middleCols(c0, w);
  Var r = tp->make_node(m, w, std::move(out), {a}, {});
  const int aid = a.id, rid = r.id;
  if (tp->node(rid).requires_grad)
    tp->node(rid).backward = [tp, aid, rid, m, n, c0, w]() {
      MatMap(tp->grad_buffer(aid).data(), m, n).middleCols(c0, w) +=
          ConstMatMap(tp->node(rid).grad.data(), m, w);
    };
  return r;
}

// Rows [r0, r1) of a.
inline Var slice_rows(Var a, Eigen::Index r0, Eigen::Index r1) {
  Tape* tp = a.tape;
  const Eigen::Index m = tp->rows(a), n = tp->cols(a);
  if (r0 < 0 || r1 > m || r0 >= r1) throw ShapeError("slice_rows: bad range");
  const Eigen::Index h = r1 - r0;
  Arr out = tp->value(a).segment(r0 * n, h * n);
  Var r = tp->make_node(h, n, std::move(out), {a}, {});
  const int aid = a.id, rid = r.id;
  if (tp->node(rid).requires_grad)
    tp->node(rid).backward = [tp, aid, rid, n, r0, h]() {
      tp->grad_buffer(aid).segment(r0 * n, h * n) += tp->node(rid).grad;
    };
  return r;
}

// [A | B] side by side.
inline Var concat_cols(Var a, Var b) {
  Tape* tp = a.tape;
  if (tp->rows(a) != tp->rows(b)) throw ShapeError("concat_cols: row mismatch");
  const Eigen::Index m = tp->rows(a), na = tp->cols(a), nb = tp->cols(b);
  Arr out(m * (na + nb));
  MatMap o(out.data(), m, na + nb);
  o.leftCols(na) = tp->mat(a);
  o.rightCols(nb) = tp->mat(b);
  Var r = tp->make_node(m, na + nb, std::move(out), {a, b}, {});
  const int aid = a.id, bid = b.id, rid = r.id;
  if (tp->node(rid).requires_grad)
    tp->node(rid).backward = [tp, aid, bid, rid, m, na, nb]() {
      ConstMatMap g(tp->node(rid).grad.data(), m, na + nb);
      if (tp->node(aid).requires_grad)
        MatMap(tp->grad_buffer(aid).data(), m, na) += g.leftCols(na);
      if (tp->node(bid).requires_grad)
        MatMap(tp->grad_buffer(bid).data(), m, nb) += g.rightCols(nb);
    };
  return r;
}

// Stacks equal-width blocks on top of each other.
inline Var stack_rows(const std::vector<Var>& parts) {
  require(!parts.empty(), "stack_rows: empty");
  Tape* tp = parts[0].tape;
  const Eigen::Index n = tp->cols(parts[0]);
  Eigen::Index m = 0;
  for (const Var& p : parts) {
    if (tp->cols(p) != n) throw ShapeError("stack_rows: col mismatch");
    m += tp->rows(p);
  }
  Arr out(m * n);
  Eigen::Index off = 0;
  for (const Var& p : parts) {
    out.segment(off, tp->value(p).size()) = tp->value(p);
    off += tp->value(p).size();
  }
  Var r = tp->make_node(m, n, std::move(out), parts, {});
  const int rid = r.id;
  std::vector<int> ids;
  for (const Var& p : parts) ids.push_back(p.id);
  if (tp->node(rid).requires_grad)
    tp->node(rid).backward = [tp, rid, ids]() {
      const Arr& g = tp->node(rid).grad;
      Eigen::Index off = 0;
      for (int pid : ids) {
        const Eigen::Index sz = tp->node(pid).value.size();
        if (tp->node(pid).requires_grad)
          tp->grad_buffer(pid) += g.segment(off, sz);
        off += sz;
      }
    };
  return r;
}

// Row permutation: out.row(i) = a.row(perm[i]); perm need not be a
// permutation (gather semantics, scatter-add backward).
inline Var gather_rows(Var a, std::vector<Eigen::Index> perm) {
  Tape* tp = a.tape;
  const Eigen::Index n = tp->cols(a);
  const Eigen::Index m = static_cast<Eigen::Index>(perm.size());
  Arr out(m * n);
  for (Eigen::Index i = 0; i < m; ++i)
    out.segment(i * n, n) = tp->value(a).segment(perm[i] * n, n);
  Var r = tp->make_node(m, n, std::move(out), {a}, {});
  const int aid = a.id, rid = r.id;
  if (tp->node(rid).requires_grad)
    tp->node(rid).backward = [tp, aid, rid, n, perm = std::move(perm)]() {
      const Arr& g = tp->node(rid).grad;
      Arr& ga = tp->grad_buffer(aid);
      for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(perm.size()); ++i)
        ga.segment(perm[i] * n, n) += g.segment(i * n, n);
    };
  return r;
}

inline Var transpose(Var a) {
  Tape* tp = a.tape;
  const Eigen::Index m = tp->rows(a), n = tp->cols(a);
  Arr out(m * n);
  MatMap(out.data(), n, m) = tp->mat(a).transpose();
  Var r = tp->make_node(n, m, std::move(out), {a}, {});
  const int aid = a.id, rid = r.id;
  if (tp->node(rid).requires_grad)
    tp->node(rid).backward = [tp, aid, rid, m, n]() {
      MatMap(tp->grad_buffer(aid).data(), m, n) +=
          ConstMatMap(tp->node(rid).grad.data(), n, m).transpose();
    };
  return r;
}

// Same data, new shape (row-major flattening preserved).
inline Var reshape(Var a, Eigen::Index rows, Eigen::Index cols) {
  Tape* tp = a.tape;
  if (rows * cols != tp->value(a).size()) throw ShapeError("reshape: size");
  Var r = tp->make_node(rows, cols, tp->value(a), {a}, {});
  const int aid = a.id, rid = r.id;
  if (tp->node(rid).requires_grad)
    tp->node(rid).backward = [tp, aid, rid]() {
      tp->grad_buffer(aid) += tp->node(rid).grad;
    };
  return r;
}

// Complex Hadamard product on paired real/imag tensors:
// (ar + j ai)(br + j bi).
inline std::pair<Var, Var> complex_mul(Var ar, Var ai, Var br, Var bi) {
  Var re = sub(mul(ar, br), mul(ai, bi));
  Var im = add(mul(ar, bi), mul(ai, br));
  return {re, im};
}

// Complex matrix product via four real matmuls.
inline std::pair<Var, Var> complex_matmul(Var ar, Var ai, Var br, Var bi) {
  Var re = sub(matmul(ar, br), matmul(ai, bi));
  Var im = add(matmul(ar, bi), matmul(ai, br));
  return {re, im};
}

// Registers every parameter as a tape leaf; training reads gradients back
// through this map.
inline std::map<std::string, Var> make_leaves(Tape& tape, const Params& params,
                                              bool requires_grad) {
  std::map<std::string, Var> leaves;
  for (const auto& [name, t] : params)
    leaves.emplace(name, tape.leaf(t, requires_grad));
  return leaves;
}

}  // namespace nssf::ad
