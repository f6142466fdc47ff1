#pragma once

// Dense row-major tensors with a reverse-mode autodiff tape.
//
// A Tensor is a cheap handle onto a shared Node. Leaves are created with
// make_tensor(); every other node is produced by an op and remembers its
// parents plus a closure that pushes its gradient back to them. Scalar type
// is a template parameter: float for training, double for gradient checks.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "agct/error.hpp"

namespace agct {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

template <class T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // empty == absent
  bool requires_grad = false;
  std::string_view op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  bool is_leaf() const { return !backward; }

  std::vector<T>& grad_buffer() {
    if (grad.empty()) grad.assign(value.size(), T(0));
    return grad;
  }
};

template <class T>
using NodePtr = std::shared_ptr<Node<T>>;

namespace detail {

inline thread_local bool grad_mode = true;

// Records the sign pattern of every abs/ReLU input while active. Gradient
// checks compare patterns between perturbed evaluations to detect kinks.
struct KinkMonitor {
  bool active = false;
  std::uint64_t hash = 1469598103934665603ull;

  void reset() { hash = 1469598103934665603ull; }

  void observe(double x) {
    const std::uint64_t code = x > 0 ? 1 : (x < 0 ? 2 : 3);
    hash = (hash ^ code) * 1099511628211ull;
  }
};

inline thread_local KinkMonitor kink_monitor;

}  // namespace detail

inline bool grad_enabled() { return detail::grad_mode; }

/// Disables graph recording for the current thread while in scope.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_mode) { detail::grad_mode = false; }
  ~NoGradGuard() { detail::grad_mode = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

template <class T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(NodePtr<T> node) : node_(std::move(node)) {}

  bool defined() const { return static_cast<bool>(node_); }

  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t numel() const { return node_->value.size(); }

  std::span<const T> values() const { return node_->value; }

  /// Direct write access. Only meaningful on leaves (optimizer updates,
  /// finite-difference perturbation); writing into an op result does not
  /// invalidate graphs that already consumed it.
  std::span<T> mutable_values() { return node_->value; }

  T item() const {
    if (numel() != 1)
      fail(ErrorKind::shape_mismatch,
           "item() on tensor of shape " + shape_string(shape()));
    return node_->value[0];
  }

  T operator[](std::size_t i) const { return node_->value[i]; }

  bool requires_grad() const { return node_->requires_grad; }

  void set_requires_grad(bool flag) {
    if (!node_->is_leaf())
      fail(ErrorKind::invalid_argument, "requires_grad can only be set on leaves");
    node_->requires_grad = flag;
    if (!flag) node_->grad.clear();
  }

  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const T> grad() const { return node_->grad; }

  bool is_leaf() const { return node_->is_leaf(); }
  std::string_view op() const { return node_->op; }

  /// Copy of the values as a new leaf without gradient tracking.
  Tensor detach() const {
    auto n = std::make_shared<Node<T>>();
    n->shape = node_->shape;
    n->value = node_->value;
    return Tensor(std::move(n));
  }

  const Node<T>* id() const { return node_.get(); }
  const NodePtr<T>& node() const { return node_; }

 private:
  NodePtr<T> node_;
};

template <class T>
Tensor<T> make_tensor(Shape shape, std::vector<T> values, bool requires_grad = false) {
  for (std::size_t d : shape)
    if (d == 0)
      fail(ErrorKind::invalid_argument,
           "tensor dimensions must be >= 1, got " + shape_string(shape));
  if (shape.empty())
    fail(ErrorKind::invalid_argument, "tensor shape must have at least one dimension");
  const std::size_t expected = shape_numel(shape);
  if (values.size() != expected)
    fail(ErrorKind::shape_mismatch, "length mismatch " + std::to_string(values.size()) +
                                        " vs " + std::to_string(expected));
  auto n = std::make_shared<Node<T>>();
  n->shape = std::move(shape);
  n->value = std::move(values);
  n->requires_grad = requires_grad;
  return Tensor<T>(std::move(n));
}

template <class T>
Tensor<T> full(Shape shape, T value, bool requires_grad = false) {
  const std::size_t n = shape_numel(shape);
  return make_tensor<T>(std::move(shape), std::vector<T>(n, value), requires_grad);
}

template <class T>
Tensor<T> zeros(Shape shape, bool requires_grad = false) {
  return full<T>(std::move(shape), T(0), requires_grad);
}

/// Converts between precisions (e.g. float parameters into a double check
/// copy). The result is a fresh leaf.
template <class To, class From>
Tensor<To> cast(const Tensor<From>& t, bool requires_grad = false) {
  std::vector<To> v(t.values().begin(), t.values().end());
  return make_tensor<To>(t.shape(), std::move(v), requires_grad);
}

namespace detail {

template <class T>
bool any_requires_grad(std::initializer_list<const Tensor<T>*> inputs) {
  for (const Tensor<T>* t : inputs)
    if (t && t->defined() && t->requires_grad()) return true;
  return false;
}

/// Gradient buffer of a parent, or nullptr when it does not track gradients.
template <class T>
T* grad_of(Node<T>* parent) {
  return parent && parent->requires_grad ? parent->grad_buffer().data() : nullptr;
}

/// Builds an op result. `backward` receives the output gradient; it is only
/// attached when recording is enabled and some input requires grad.
template <class T, class Backward>
Tensor<T> make_result(std::string_view op, Shape shape, std::vector<T> value,
                      std::initializer_list<const Tensor<T>*> inputs, Backward&& backward) {
  auto n = std::make_shared<Node<T>>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->op = op;
  if (::agct::grad_enabled() && any_requires_grad<T>(inputs)) {
    n->requires_grad = true;
    for (const Tensor<T>* t : inputs)
      if (t && t->defined()) n->parents.push_back(t->node());
    n->backward = [fn = std::forward<Backward>(backward)](Node<T>& self) {
      fn(std::span<const T>(self.grad));
    };
  }
  return Tensor<T>(std::move(n));
}

template <class T>
Tensor<T> make_constant(std::string_view op, Shape shape, std::vector<T> value) {
  auto n = std::make_shared<Node<T>>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->op = op;
  return Tensor<T>(std::move(n));
}

}  // namespace detail

}  // namespace agct
