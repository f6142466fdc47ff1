#pragma once

#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "agct/tensor.hpp"

namespace agct {

/// Leaf gradients produced by one backward() call, keyed by tensor identity.
template <class T>
class Gradients {
 public:
  bool contains(const Tensor<T>& t) const { return grads_.count(t.id()) != 0; }

  /// Gradient of `t`; zeros when `t` was not reachable from the loss.
  std::vector<T> get(const Tensor<T>& t) const {
    auto it = grads_.find(t.id());
    if (it == grads_.end()) return std::vector<T>(t.numel(), T(0));
    return it->second;
  }

  const std::vector<T>* find(const Tensor<T>& t) const {
    auto it = grads_.find(t.id());
    return it == grads_.end() ? nullptr : &it->second;
  }

  std::size_t size() const { return grads_.size(); }

  void set(const Node<T>* id, std::vector<T> g) { grads_[id] = std::move(g); }

 private:
  std::unordered_map<const Node<T>*, std::vector<T>> grads_;
};

template <class T>
Gradients<T> backward(const Tensor<T>& loss) {
  for (std::size_t d : loss.shape())
    if (d != 1)
      fail(ErrorKind::shape_mismatch,
           "backward requires a scalar loss, got shape " + shape_string(loss.shape()));
  if (!loss.requires_grad())
    fail(ErrorKind::invalid_argument, "loss does not depend on any tensor requiring grad");

  // Iterative post-order DFS; reversed it is a valid reverse topological order.
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> visited;
  std::vector<std::pair<Node<T>*, std::size_t>> stack;
  Node<T>* root = loss.node().get();
  stack.emplace_back(root, 0);
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T>* p = node->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node<T>* n : order) n->grad.clear();
  root->grad.assign(1, T(1));

  Gradients<T> result;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->is_leaf()) {
      result.set(n, n->grad.empty() ? std::vector<T>(n->value.size(), T(0)) : n->grad);
      continue;
    }
    if (!n->grad.empty()) n->backward(*n);
    if (n != root) std::vector<T>().swap(n->grad);
  }
  return result;
}

}  // namespace agct
