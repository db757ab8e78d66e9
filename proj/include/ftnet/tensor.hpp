// Copyright 2026 The ftnet Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Dense row-major tensors with reverse-mode automatic differentiation.
//
// A BasicTensor is a cheap handle onto a shared graph node. Operations that
// touch a tensor with requires_grad() record their parents and a backward
// rule on the result node; backward() sorts the reachable nodes
// topologically (the GradTape) and replays the rules in reverse.

#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "ftnet/error.hpp"

namespace ftnet {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

namespace detail {
inline thread_local int no_grad_depth = 0;
}

/// While alive, newly created results never record a backward rule.
/// Scoped to the current thread.
class NoGradGuard {
 public:
  NoGradGuard() { ++detail::no_grad_depth; }
  ~NoGradGuard() { --detail::no_grad_depth; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

inline bool grad_mode_enabled() { return detail::no_grad_depth == 0; }

template <typename Scalar>
class BasicTensor {
 public:
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  struct Node {
    Shape shape;
    Array value;
    Array grad;  // empty until first accumulation
    bool requires_grad = false;
    std::string name;
    // Tag used for pattern matching during backward (softmax fusion).
    const char* op = "leaf";
    std::vector<std::shared_ptr<Node>> parents;
    // Reads this node's grad and accumulates into the parents' grads.
    std::function<void(Node&)> backward;

    Array& grad_buffer() {
      if (grad.size() == 0) grad = Array::Zero(value.size());
      return grad;
    }
  };

  BasicTensor() : node_(std::make_shared<Node>()) {}

  BasicTensor(Shape shape, Scalar fill) : BasicTensor() {
    check_extents(shape);
    node_->value = Array::Constant(static_cast<Eigen::Index>(shape_size(shape)), fill);
    node_->shape = std::move(shape);
  }

  BasicTensor(Shape shape, const std::vector<Scalar>& values) : BasicTensor() {
    check_extents(shape);
    if (values.size() != shape_size(shape)) {
      throw ShapeError("tensor: " + std::to_string(values.size()) + " values for shape " +
                       shape_str(shape));
    }
    node_->value = Eigen::Map<const Array>(values.data(), static_cast<Eigen::Index>(values.size()));
    node_->shape = std::move(shape);
  }

  BasicTensor(Shape shape, Array values) : BasicTensor() {
    check_extents(shape);
    if (static_cast<std::size_t>(values.size()) != shape_size(shape)) {
      throw ShapeError("tensor: " + std::to_string(values.size()) + " values for shape " +
                       shape_str(shape));
    }
    node_->value = std::move(values);
    node_->shape = std::move(shape);
  }

  static BasicTensor scalar(Scalar v) { return BasicTensor(Shape{}, v); }

  const Shape& shape() const { return node_->shape; }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return static_cast<std::size_t>(node_->value.size()); }

  const Array& values() const { return node_->value; }
  /// Direct write access; reserved for optimizers and initializers.
  Array& mutable_values() { return node_->value; }
  Scalar item() const {
    if (size() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
    return node_->value[0];
  }
  Scalar operator[](std::size_t i) const { return node_->value[static_cast<Eigen::Index>(i)]; }
  std::vector<Scalar> to_vector() const {
    return std::vector<Scalar>(node_->value.data(), node_->value.data() + node_->value.size());
  }

  bool has_grad() const { return node_->grad.size() != 0; }
  const Array& grad() const { return node_->grad; }
  void zero_grad() { node_->grad.resize(0); }

  bool requires_grad() const { return node_->requires_grad; }
  BasicTensor& set_requires_grad(bool on) {
    node_->requires_grad = on;
    return *this;
  }

  const std::string& name() const { return node_->name; }
  BasicTensor& set_name(std::string n) {
    node_->name = std::move(n);
    return *this;
  }

  /// Deep copy of value and flags; the copy is a fresh leaf.
  BasicTensor clone() const {
    BasicTensor t(node_->shape, node_->value);
    t.node_->requires_grad = node_->requires_grad;
    t.node_->name = node_->name;
    return t;
  }

  /// Same values, no history, no grad requirement.
  BasicTensor detach() const { return BasicTensor(node_->shape, node_->value); }

  const std::shared_ptr<Node>& node() const { return node_; }

  /// Builds an op result. The backward rule is dropped unless some parent
  /// requires grad and grad mode is enabled on this thread.
  static BasicTensor make_result(Shape shape, Array value,
                                 std::vector<std::shared_ptr<Node>> parents,
                                 std::function<void(Node&)> backward, const char* op) {
    BasicTensor out(std::move(shape), std::move(value));
    out.node_->op = op;
    const bool any = std::any_of(parents.begin(), parents.end(),
                                 [](const auto& p) { return p->requires_grad; });
    if (any && grad_mode_enabled()) {
      out.node_->requires_grad = true;
      out.node_->parents = std::move(parents);
      out.node_->backward = std::move(backward);
    }
    return out;
  }

 private:
  static void check_extents(const Shape& shape) {
    for (auto e : shape) {
      if (e == 0) throw ShapeError("tensor: zero extent in shape " + shape_str(shape));
    }
  }

  std::shared_ptr<Node> node_;
};

using Tensor = BasicTensor<double>;

/// Reachable nodes of a loss in topological order (inputs first).
template <typename Scalar>
class GradTape {
 public:
  using Node = typename BasicTensor<Scalar>::Node;

  explicit GradTape(const BasicTensor<Scalar>& root) {
    // Iterative post-order DFS over nodes that carry a backward path.
    std::unordered_set<const Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack;
    Node* r = root.node().get();
    if (!r->requires_grad) return;
    stack.emplace_back(r, 0);
    seen.insert(r);
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      if (next < node->parents.size()) {
        Node* p = node->parents[next++].get();
        if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
      } else {
        order_.push_back(node);
        stack.pop_back();
      }
    }
  }

  const std::vector<Node*>& nodes() const { return order_; }

  /// Seeds the last node (the root) with ones and runs every rule once.
  void replay() {
    if (order_.empty()) return;
    Node* root = order_.back();
    root->grad_buffer().setOnes();
    for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
      Node* n = *it;
      if (n->backward && n->grad.size() != 0) n->backward(*n);
    }
    // Interior grads are scratch; leaves keep theirs.
    for (Node* n : order_) {
      if (n->backward) n->grad.resize(0);
    }
  }

 private:
  std::vector<Node*> order_;
};

/// Populates grads of every requires_grad leaf reachable from `loss`.
/// Leaf grads accumulate across calls; call zero_grad() between steps.
template <typename Scalar>
void backward(const BasicTensor<Scalar>& loss) {
  if (loss.size() != 1) {
    throw ShapeError("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
  }
  if (!std::isfinite(static_cast<double>(loss.item()))) {
    throw NumericError("backward: non-finite loss");
  }
  GradTape<Scalar> tape(loss);
  tape.replay();
  for (auto* n : tape.nodes()) {
    if (!n->backward && n->grad.size() != 0 && !n->grad.allFinite()) {
      throw NumericError("backward: non-finite gradient" +
                         (n->name.empty() ? std::string{} : " for " + n->name));
    }
  }
}

// ---------------------------------------------------------------------------
// Elementwise arithmetic

enum class BinaryOp { add, sub, mul };

/// Elementwise `a op b`. `b` may be a single-element tensor broadcast over a.
template <typename Scalar>
BasicTensor<Scalar> elementwise(BinaryOp op, const BasicTensor<Scalar>& a,
                                const BasicTensor<Scalar>& b) {
  using T = BasicTensor<Scalar>;
  using Array = typename T::Array;
  const bool broadcast = b.size() == 1 && a.shape() != b.shape();
  if (!broadcast && a.shape() != b.shape()) {
    throw ShapeError("elementwise: shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()) + " are incompatible");
  }
  const Array& av = a.values();
  Array bv = broadcast ? Array::Constant(av.size(), b.values()[0]) : b.values();
  Array out;
  switch (op) {
    case BinaryOp::add: out = av + bv; break;
    case BinaryOp::sub: out = av - bv; break;
    case BinaryOp::mul: out = av * bv; break;
  }
  auto an = a.node();
  auto bn = b.node();
  return T::make_result(
      a.shape(), std::move(out), {an, bn},
      [an, bn, op, broadcast, bv](typename T::Node& self) {
        const Array& g = self.grad;
        if (an->requires_grad) {
          if (op == BinaryOp::mul) an->grad_buffer() += g * bv;
          else an->grad_buffer() += g;
        }
        if (bn->requires_grad) {
          Array gb = op == BinaryOp::mul ? Array(g * an->value) : (op == BinaryOp::sub ? Array(-g) : g);
          if (broadcast) bn->grad_buffer()[0] += gb.sum();
          else bn->grad_buffer() += gb;
        }
      },
      "elementwise");
}

template <typename S>
BasicTensor<S> operator+(const BasicTensor<S>& a, const BasicTensor<S>& b) {
  return elementwise(BinaryOp::add, a, b);
}
template <typename S>
BasicTensor<S> operator-(const BasicTensor<S>& a, const BasicTensor<S>& b) {
  return elementwise(BinaryOp::sub, a, b);
}
template <typename S>
BasicTensor<S> operator*(const BasicTensor<S>& a, const BasicTensor<S>& b) {
  return elementwise(BinaryOp::mul, a, b);
}

// ---------------------------------------------------------------------------
// Matrix product

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using MatMap = Eigen::Map<RowMatrix<Scalar>>;

template <typename Scalar>
using ConstMatMap = Eigen::Map<const RowMatrix<Scalar>>;

/// [M×K]·[K×N]. Backward: dA = dC·Bᵀ, dB = Aᵀ·dC.
template <typename Scalar>
BasicTensor<Scalar> matmul(const BasicTensor<Scalar>& a, const BasicTensor<Scalar>& b) {
  using T = BasicTensor<Scalar>;
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: cannot multiply " + shape_str(a.shape()) + " by " +
                     shape_str(b.shape()));
  }
  const auto m = static_cast<Eigen::Index>(a.dim(0));
  const auto k = static_cast<Eigen::Index>(a.dim(1));
  const auto n = static_cast<Eigen::Index>(b.dim(1));
  typename T::Array out(m * n);
  MatMap<Scalar>(out.data(), m, n).noalias() =
      ConstMatMap<Scalar>(a.values().data(), m, k) * ConstMatMap<Scalar>(b.values().data(), k, n);
  auto an = a.node();
  auto bn = b.node();
  return T::make_result(
      {a.dim(0), b.dim(1)}, std::move(out), {an, bn},
      [an, bn, m, k, n](typename T::Node& self) {
        ConstMatMap<Scalar> dc(self.grad.data(), m, n);
        if (an->requires_grad) {
          MatMap<Scalar>(an->grad_buffer().data(), m, k).noalias() +=
              dc * ConstMatMap<Scalar>(bn->value.data(), k, n).transpose();
        }
        if (bn->requires_grad) {
          MatMap<Scalar>(bn->grad_buffer().data(), k, n).noalias() +=
              ConstMatMap<Scalar>(an->value.data(), m, k).transpose() * dc;
        }
      },
      "matmul");
}

// ---------------------------------------------------------------------------
// Reductions

enum class ReduceOp { sum, mean, max };

namespace detail {

// Maps each flat input index to the flat index of its reduction group.
inline std::vector<std::size_t> reduction_groups(const Shape& shape,
                                                 const std::vector<bool>& reduced,
                                                 Shape& out_shape) {
  out_shape.clear();
  for (std::size_t d = 0; d < shape.size(); ++d) {
    if (!reduced[d]) out_shape.push_back(shape[d]);
  }
  // Output strides, expressed per input axis (0 on reduced axes).
  std::vector<std::size_t> ostride(shape.size(), 0);
  std::size_t s = 1;
  for (std::size_t d = shape.size(); d-- > 0;) {
    if (!reduced[d]) {
      ostride[d] = s;
      s *= shape[d];
    }
  }
  const std::size_t total = shape_size(shape);
  std::vector<std::size_t> group(total);
  std::vector<std::size_t> idx(shape.size(), 0);
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t g = 0;
    for (std::size_t d = 0; d < shape.size(); ++d) g += idx[d] * ostride[d];
    group[flat] = g;
    for (std::size_t d = shape.size(); d-- > 0;) {
      if (++idx[d] < shape[d]) break;
      idx[d] = 0;
    }
  }
  return group;
}

}  // namespace detail

/// Reduces over `axes` (empty list means all axes). Reduced axes are
/// dropped from the result shape. The max gradient goes to the first
/// maximal element of each group.
template <typename Scalar>
BasicTensor<Scalar> reduce(ReduceOp op, const BasicTensor<Scalar>& x,
                           std::vector<std::size_t> axes = {}) {
  using T = BasicTensor<Scalar>;
  using Array = typename T::Array;
  std::vector<bool> reduced(x.rank(), axes.empty());
  for (auto ax : axes) {
    if (ax >= x.rank()) {
      throw ShapeError("reduce: axis " + std::to_string(ax) + " out of range for shape " +
                       shape_str(x.shape()));
    }
    if (reduced[ax]) throw ShapeError("reduce: duplicate axis " + std::to_string(ax));
    reduced[ax] = true;
  }
  Shape out_shape;
  auto group = std::make_shared<std::vector<std::size_t>>(
      detail::reduction_groups(x.shape(), reduced, out_shape));
  const auto out_n = static_cast<Eigen::Index>(shape_size(out_shape));
  const Scalar count = static_cast<Scalar>(x.size() / static_cast<std::size_t>(out_n));
  const Array& xv = x.values();
  Array out;
  auto argmax = std::make_shared<std::vector<std::size_t>>();
  if (op == ReduceOp::max) {
    out = Array::Constant(out_n, -std::numeric_limits<Scalar>::infinity());
    argmax->assign(static_cast<std::size_t>(out_n), 0);
    for (std::size_t i = 0; i < group->size(); ++i) {
      const auto g = (*group)[i];
      // Strict comparison keeps the first maximum.
      if (xv[static_cast<Eigen::Index>(i)] > out[static_cast<Eigen::Index>(g)]) {
        out[static_cast<Eigen::Index>(g)] = xv[static_cast<Eigen::Index>(i)];
        (*argmax)[g] = i;
      }
    }
  } else {
    out = Array::Zero(out_n);
    for (std::size_t i = 0; i < group->size(); ++i) {
      out[static_cast<Eigen::Index>((*group)[i])] += xv[static_cast<Eigen::Index>(i)];
    }
    if (op == ReduceOp::mean) out /= count;
  }
  auto xn = x.node();
  return T::make_result(
      std::move(out_shape), std::move(out), {xn},
      [xn, group, argmax, op, count](typename T::Node& self) {
        Array& gx = xn->grad_buffer();
        if (op == ReduceOp::max) {
          for (std::size_t g = 0; g < argmax->size(); ++g) {
            gx[static_cast<Eigen::Index>((*argmax)[g])] += self.grad[static_cast<Eigen::Index>(g)];
          }
          return;
        }
        const Scalar scale = op == ReduceOp::mean ? Scalar(1) / count : Scalar(1);
        for (std::size_t i = 0; i < group->size(); ++i) {
          gx[static_cast<Eigen::Index>(i)] += scale * self.grad[static_cast<Eigen::Index>((*group)[i])];
        }
      },
      "reduce");
}

template <typename S>
BasicTensor<S> sum(const BasicTensor<S>& x, std::vector<std::size_t> axes = {}) {
  return reduce(ReduceOp::sum, x, std::move(axes));
}
template <typename S>
BasicTensor<S> mean(const BasicTensor<S>& x, std::vector<std::size_t> axes = {}) {
  return reduce(ReduceOp::mean, x, std::move(axes));
}
template <typename S>
BasicTensor<S> max(const BasicTensor<S>& x, std::vector<std::size_t> axes = {}) {
  return reduce(ReduceOp::max, x, std::move(axes));
}

// ---------------------------------------------------------------------------
// Gradient checking

/// Max over elements of |analytic - central difference| / max(1, |analytic|)
/// for a scalar function of x. x is not modified.
template <typename Scalar, typename F>
Scalar grad_check(F&& f, const BasicTensor<Scalar>& x, Scalar eps = Scalar(1e-5)) {
  if (!(eps > 0)) throw UsageError("grad_check: eps must be positive");
  BasicTensor<Scalar> probe = x.detach();
  probe.set_requires_grad(true);
  BasicTensor<Scalar> y = f(probe);
  if (y.size() != 1) throw ShapeError("grad_check: function must be scalar-valued");
  backward(y);
  typename BasicTensor<Scalar>::Array analytic =
      probe.has_grad() ? probe.grad() : BasicTensor<Scalar>::Array::Zero(probe.size());

  Scalar worst = 0;
  NoGradGuard no_grad;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    BasicTensor<Scalar> plus = x.detach();
    plus.mutable_values()[ii] += eps;
    BasicTensor<Scalar> minus = x.detach();
    minus.mutable_values()[ii] -= eps;
    const Scalar fp = f(plus).item();
    const Scalar fm = f(minus).item();
    if (!std::isfinite(static_cast<double>(fp)) || !std::isfinite(static_cast<double>(fm))) {
      throw NumericError("grad_check: non-finite function value");
    }
    const Scalar numeric = (fp - fm) / (2 * eps);
    const Scalar err = std::abs(analytic[ii] - numeric) / std::max(Scalar(1), std::abs(analytic[ii]));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace ftnet
