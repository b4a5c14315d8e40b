#pragma once

// Dense row-major tensors with reverse-mode differentiation.
//
// A Tensor is a shared handle onto a Node. Operations on tensors that require
// gradients record their parents and a backward closure in the result node;
// `backward(root)` linearises that graph into a Tape (topological order) and
// walks it in reverse. Leaf gradients accumulate across calls, interior
// gradients are reset at the start of every pass.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "hsx/core/error.hpp"

namespace hsx::tensor {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << ']';
  return os.str();
}

template <class T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // empty until first needed
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;
  const char* op = "leaf";

  bool is_leaf() const { return !backward_fn; }

  std::vector<T>& ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), T(0));
    return grad;
  }
};

template <class T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(Shape shape, T fill = T(0), bool requires_grad = false)
      : node_(std::make_shared<Node<T>>()) {
    node_->value.assign(numel(shape), fill);
    node_->shape = std::move(shape);
    node_->requires_grad = requires_grad;
  }

  Tensor(Shape shape, std::vector<T> data, bool requires_grad = false)
      : node_(std::make_shared<Node<T>>()) {
    if (data.size() != numel(shape))
      throw Error(ErrorKind::Dimension, "data length " + std::to_string(data.size()) +
                                            " does not match shape " + shape_str(shape));
    node_->shape = std::move(shape);
    node_->value = std::move(data);
    node_->requires_grad = requires_grad;
  }

  static Tensor from_node(std::shared_ptr<Node<T>> n) {
    Tensor t;
    t.node_ = std::move(n);
    return t;
  }

  static Tensor scalar(T v, bool requires_grad = false) { return Tensor(Shape{}, v, requires_grad); }

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->value.size(); }

  std::span<T> data() { return node_->value; }
  std::span<const T> data() const { return node_->value; }
  std::vector<T>& values() { return node_->value; }
  const std::vector<T>& values() const { return node_->value; }
  T item() const {
    if (size() != 1) throw Error(ErrorKind::Dimension, "item() on tensor of shape " + shape_str(shape()));
    return node_->value[0];
  }
  T& operator[](std::size_t i) { return node_->value[i]; }
  T operator[](std::size_t i) const { return node_->value[i]; }

  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool r) { node_->requires_grad = r; }

  /// Gradient accumulator; zero-filled on first access.
  std::span<T> grad() { return node_->ensure_grad(); }
  std::span<const T> grad() const { return node_->ensure_grad(); }
  bool has_grad() const { return node_->grad.size() == node_->value.size(); }
  void zero_grad() {
    if (has_grad()) std::fill(node_->grad.begin(), node_->grad.end(), T(0));
  }

  /// Copy of the values with no graph history.
  Tensor detach() const { return Tensor(shape(), node_->value, false); }

  Node<T>& node() const { return *node_; }
  const std::shared_ptr<Node<T>>& node_ptr() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

template <class T>
Tensor<T> zeros(Shape s, bool requires_grad = false) {
  return Tensor<T>(std::move(s), T(0), requires_grad);
}

/// Creates the result node of an operation. When any parent requires a
/// gradient the node records the parents and the backward closure; otherwise
/// it is a plain constant and the graph is not extended.
template <class T>
Tensor<T> make_result(Shape shape, std::vector<T> value,
                      std::vector<std::shared_ptr<Node<T>>> parents,
                      std::function<void(Node<T>&)> backward, const char* op) {
  auto n = std::make_shared<Node<T>>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->op = op;
  const bool any = std::any_of(parents.begin(), parents.end(),
                               [](const auto& p) { return p && p->requires_grad; });
  if (any) {
    n->requires_grad = true;
    n->parents = std::move(parents);
    n->backward_fn = std::move(backward);
  }
  return Tensor<T>::from_node(std::move(n));
}

/// Topologically ordered list of differentiable nodes reachable from a root.
template <class T>
class Tape {
 public:
  static Tape record(const Tensor<T>& root) {
    Tape tape;
    if (!root.requires_grad()) return tape;
    std::unordered_set<const Node<T>*> seen;
    // Iterative post-order DFS; deep graphs would overflow a recursive walk.
    std::vector<std::pair<Node<T>*, std::size_t>> stack;
    stack.emplace_back(&root.node(), 0);
    seen.insert(&root.node());
    while (!stack.empty()) {
      auto& [n, next] = stack.back();
      if (next < n->parents.size()) {
        Node<T>* p = n->parents[next++].get();
        if (p && p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
        continue;
      }
      tape.order_.push_back(n);
      stack.pop_back();
    }
    return tape;
  }

  std::span<Node<T>* const> order() const { return order_; }
  std::size_t size() const { return order_.size(); }

  /// Seeds the root gradient with ones and propagates in reverse order.
  void run_backward() const {
    if (order_.empty()) return;
    for (Node<T>* n : order_)
      if (!n->is_leaf()) {
        n->ensure_grad();
        std::fill(n->grad.begin(), n->grad.end(), T(0));
      }
    Node<T>* root = order_.back();
    auto& g = root->ensure_grad();
    if (root->is_leaf()) {
      for (auto& v : g) v += T(1);
      return;
    }
    std::fill(g.begin(), g.end(), T(1));
    for (auto it = order_.rbegin(); it != order_.rend(); ++it)
      if (!(*it)->is_leaf()) (*it)->backward_fn(**it);
  }

 private:
  std::vector<Node<T>*> order_;
};

/// Backpropagates from `root` (normally a scalar loss) into every leaf that
/// requires a gradient. Calling it twice without zeroing doubles the leaf
/// gradients.
template <class T>
void backward(const Tensor<T>& root) {
  Tape<T>::record(root).run_backward();
}

template <class T>
bool all_finite(std::span<const T> v) {
  return std::all_of(v.begin(), v.end(), [](T x) { return std::isfinite(x); });
}

/// Converts between precisions; the result is a fresh leaf.
template <class To, class From>
Tensor<To> cast(const Tensor<From>& t, bool requires_grad = false) {
  std::vector<To> v(t.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<To>(t[i]);
  return Tensor<To>(t.shape(), std::move(v), requires_grad);
}

}  // namespace hsx::tensor
