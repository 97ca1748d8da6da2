#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "recapdet/errors.hpp"

namespace recapdet {

template <typename S>
using Vec = Eigen::Array<S, Eigen::Dynamic, 1>;

template <typename S>
using MatRM = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Shape = std::vector<int>;

inline std::int64_t shape_numel(const Shape& s) {
  std::int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << ']';
  return os.str();
}

template <typename S>
struct Node {
  Shape shape;
  Vec<S> data;
  Vec<S> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node<S>>> parents;
  // Single-use backward closure; consumed (and released) by backward().
  std::function<void(Node<S>&)> backprop;

  void ensure_grad() {
    if (grad.size() != data.size()) grad = Vec<S>::Zero(data.size());
  }
};

template <typename S>
using NodePtr = std::shared_ptr<Node<S>>;

// Dense row-major n-d array, a shared handle onto a tape node. Values are
// immutable after an op creates them; only gradients accumulate. One tape is
// single-threaded; independent graphs may live on different threads.
template <typename S>
class Tensor {
 public:
  using Scalar = S;

  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    Tensor t;
    t.n_ = std::make_shared<Node<S>>();
    t.n_->shape = std::move(shape);
    t.n_->data = Vec<S>::Zero(shape_numel(t.n_->shape));
    t.n_->requires_grad = requires_grad;
    return t;
  }

  static Tensor full(Shape shape, S value, bool requires_grad = false) {
    Tensor t = zeros(std::move(shape), requires_grad);
    t.n_->data.setConstant(value);
    return t;
  }

  static Tensor from_data(Shape shape, std::vector<S> values, bool requires_grad = false) {
    if (shape_numel(shape) != static_cast<std::int64_t>(values.size()))
      throw ShapeError("from_data: " + shape_str(shape) + " does not hold " +
                       std::to_string(values.size()) + " values");
    Tensor t = zeros(std::move(shape), requires_grad);
    for (std::int64_t i = 0; i < t.size(); ++i) t.n_->data[i] = values[static_cast<std::size_t>(i)];
    return t;
  }

  static Tensor scalar(S value, bool requires_grad = false) {
    return from_data({1}, {value}, requires_grad);
  }

  // Result node of an op: shape + parents + backward closure.
  static Tensor result(Shape shape, std::vector<NodePtr<S>> parents,
                       std::function<void(Node<S>&)> backprop) {
    Tensor t = zeros(std::move(shape));
    for (const auto& p : parents)
      if (p && p->requires_grad) t.n_->requires_grad = true;
    if (t.n_->requires_grad) {
      t.n_->parents = std::move(parents);
      t.n_->backprop = std::move(backprop);
    }
    return t;
  }

  bool defined() const { return static_cast<bool>(n_); }
  const Shape& shape() const { return n_->shape; }
  int rank() const { return static_cast<int>(n_->shape.size()); }
  int dim(int i) const { return n_->shape[static_cast<std::size_t>(i)]; }
  std::int64_t size() const { return n_->data.size(); }

  Vec<S>& data() { return n_->data; }
  const Vec<S>& data() const { return n_->data; }
  S* raw() { return n_->data.data(); }
  const S* raw() const { return n_->data.data(); }

  bool requires_grad() const { return n_->requires_grad; }
  void set_requires_grad(bool v) { n_->requires_grad = v; }

  bool has_grad() const { return n_->grad.size() == n_->data.size(); }
  const Vec<S>& grad() const {
    if (!has_grad()) throw UsageError("gradient not populated; call backward() first");
    return n_->grad;
  }
  Vec<S>& grad_ref() {
    n_->ensure_grad();
    return n_->grad;
  }
  void zero_grad() {
    if (has_grad()) n_->grad.setZero();
  }

  NodePtr<S> node() const { return n_; }

  S item() const {
    if (size() != 1) throw UsageError("item() on non-scalar tensor " + shape_str(shape()));
    return n_->data[0];
  }

 private:
  NodePtr<S> n_;
};

// Reverse-mode sweep from a scalar loss. The tape is consumed: each node's
// backward closure is released after it runs, so a graph can be walked once.
template <typename S>
void backward(const Tensor<S>& loss) {
  if (!loss.defined() || loss.size() != 1)
    throw UsageError("backward() requires a scalar loss tensor");
  NodePtr<S> root = loss.node();
  if (!root->requires_grad)
    throw UsageError("backward() on a graph with no tensors requiring grad");

  // iterative post-order topological sort over parents
  std::vector<Node<S>*> order;
  std::unordered_set<Node<S>*> seen;
  std::vector<std::pair<Node<S>*, std::size_t>> stack;
  stack.emplace_back(root.get(), 0);
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<S>* p = node->parents[next++].get();
      if (p && p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->ensure_grad();
  root->grad[0] = S(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<S>* node = *it;
    if (node->backprop) {
      node->ensure_grad();
      node->backprop(*node);
      node->backprop = nullptr;
    }
  }
}

}  // namespace recapdet
