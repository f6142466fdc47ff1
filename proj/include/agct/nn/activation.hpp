#pragma once

#include <cmath>
#include <vector>

#include "agct/tensor.hpp"

namespace agct::nn {

enum class ActivationKind { relu, tanh };

template <class T>
Tensor<T> activation(ActivationKind kind, const Tensor<T>& input) {
  const std::size_t n = input.numel();
  const auto x = input.values();
  std::vector<T> out(n);
  Node<T>* xn = input.node().get();
  if (kind == ActivationKind::relu) {
    const bool monitor = ::agct::detail::kink_monitor.active;
    for (std::size_t i = 0; i < n; ++i) {
      if (monitor) ::agct::detail::kink_monitor.observe(static_cast<double>(x[i]));
      out[i] = x[i] > T(0) ? x[i] : T(0);
    }
    return ::agct::detail::make_result<T>("relu", input.shape(), std::move(out), {&input},
                                          [xn, n](std::span<const T> g) {
                                            T* gx = ::agct::detail::grad_of(xn);
                                            if (!gx) return;
                                            for (std::size_t i = 0; i < n; ++i)
                                              if (xn->value[i] > T(0)) gx[i] += g[i];
                                          });
  }
  for (std::size_t i = 0; i < n; ++i) out[i] = std::tanh(x[i]);
  // Backward needs the output; keep a copy rather than a self-reference.
  std::vector<T> y = out;
  return ::agct::detail::make_result<T>("tanh", input.shape(), std::move(out), {&input},
                                        [xn, y = std::move(y)](std::span<const T> g) {
                                          T* gx = ::agct::detail::grad_of(xn);
                                          if (!gx) return;
                                          for (std::size_t i = 0; i < y.size(); ++i)
                                            gx[i] += g[i] * (T(1) - y[i] * y[i]);
                                        });
}

template <class T>
Tensor<T> relu(const Tensor<T>& input) {
  return activation(ActivationKind::relu, input);
}

template <class T>
Tensor<T> tanh(const Tensor<T>& input) {
  return activation(ActivationKind::tanh, input);
}

}  // namespace agct::nn
