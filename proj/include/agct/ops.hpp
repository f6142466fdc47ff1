#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "agct/tensor.hpp"

namespace agct {

enum class ElementwiseKind { add, sub, mul, abs, neg, square };
enum class ReduceKind { sum, mean, min, max };

namespace detail {

inline bool is_binary(ElementwiseKind kind) {
  return kind == ElementwiseKind::add || kind == ElementwiseKind::sub ||
         kind == ElementwiseKind::mul;
}

// b matches a except for a size-1 channel axis (axis 1).
inline bool channel_broadcastable(const Shape& a, const Shape& b) {
  if (a.size() != b.size() || a.size() < 2 || b[1] != 1) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (i != 1 && a[i] != b[i]) return false;
  return true;
}

struct BroadcastIndex {
  std::size_t outer = 1;     // product of dims before the channel axis
  std::size_t channels = 1;  // a's channel count
  std::size_t inner = 1;     // product of dims after the channel axis

  std::size_t b_index(std::size_t i) const {
    const std::size_t o = i / (channels * inner);
    return o * inner + i % inner;
  }
};

inline BroadcastIndex broadcast_index(const Shape& a) {
  BroadcastIndex bi;
  bi.outer = a[0];
  bi.channels = a[1];
  for (std::size_t i = 2; i < a.size(); ++i) bi.inner *= a[i];
  return bi;
}

}  // namespace detail

template <class T>
Tensor<T> elementwise(ElementwiseKind kind, const Tensor<T>& a,
                      const std::optional<Tensor<T>>& b = std::nullopt) {
  const std::size_t n = a.numel();
  const auto av = a.values();
  Node<T>* an = a.node().get();

  if (!detail::is_binary(kind)) {
    std::vector<T> out(n);
    switch (kind) {
      case ElementwiseKind::abs: {
        const bool monitor = detail::kink_monitor.active;
        for (std::size_t i = 0; i < n; ++i) {
          if (monitor) detail::kink_monitor.observe(static_cast<double>(av[i]));
          out[i] = std::abs(av[i]);
        }
        return detail::make_result<T>("abs", a.shape(), std::move(out), {&a},
                                      [an, n](std::span<const T> g) {
                                        T* ga = detail::grad_of(an);
                                        if (!ga) return;
                                        for (std::size_t i = 0; i < n; ++i) {
                                          const T x = an->value[i];
                                          // subgradient 0 at 0
                                          ga[i] += x > 0 ? g[i] : (x < 0 ? -g[i] : T(0));
                                        }
                                      });
      }
      case ElementwiseKind::neg:
        for (std::size_t i = 0; i < n; ++i) out[i] = -av[i];
        return detail::make_result<T>("neg", a.shape(), std::move(out), {&a},
                                      [an, n](std::span<const T> g) {
                                        T* ga = detail::grad_of(an);
                                        if (!ga) return;
                                        for (std::size_t i = 0; i < n; ++i) ga[i] -= g[i];
                                      });
      case ElementwiseKind::square:
        for (std::size_t i = 0; i < n; ++i) out[i] = av[i] * av[i];
        return detail::make_result<T>("square", a.shape(), std::move(out), {&a},
                                      [an, n](std::span<const T> g) {
                                        T* ga = detail::grad_of(an);
                                        if (!ga) return;
                                        for (std::size_t i = 0; i < n; ++i)
                                          ga[i] += T(2) * an->value[i] * g[i];
                                      });
      default:
        break;
    }
  }

  if (!b || !b->defined())
    fail(ErrorKind::invalid_argument, "binary elementwise op requires a second operand");
  const Tensor<T>& bt = *b;
  Node<T>* bn = bt.node().get();
  const bool same = a.shape() == bt.shape();
  if (!same && !detail::channel_broadcastable(a.shape(), bt.shape()))
    fail(ErrorKind::shape_mismatch, "cannot combine shapes " + shape_string(a.shape()) +
                                        " and " + shape_string(bt.shape()));
  const auto bv = bt.values();
  const detail::BroadcastIndex bi =
      same ? detail::BroadcastIndex{} : detail::broadcast_index(a.shape());
  auto bidx = [same, bi](std::size_t i) { return same ? i : bi.b_index(i); };

  std::vector<T> out(n);
  switch (kind) {
    case ElementwiseKind::add:
      for (std::size_t i = 0; i < n; ++i) out[i] = av[i] + bv[bidx(i)];
      break;
    case ElementwiseKind::sub:
      for (std::size_t i = 0; i < n; ++i) out[i] = av[i] - bv[bidx(i)];
      break;
    case ElementwiseKind::mul:
      for (std::size_t i = 0; i < n; ++i) out[i] = av[i] * bv[bidx(i)];
      break;
    default:
      break;
  }
  const char* name = kind == ElementwiseKind::add ? "add"
                     : kind == ElementwiseKind::sub ? "sub"
                                                    : "mul";
  return detail::make_result<T>(
      name, a.shape(), std::move(out), {&a, &bt},
      [kind, an, bn, n, bidx](std::span<const T> g) {
        T* ga = detail::grad_of(an);
        T* gb = detail::grad_of(bn);
        for (std::size_t i = 0; i < n; ++i) {
          const std::size_t j = bidx(i);
          switch (kind) {
            case ElementwiseKind::add:
              if (ga) ga[i] += g[i];
              if (gb) gb[j] += g[i];
              break;
            case ElementwiseKind::sub:
              if (ga) ga[i] += g[i];
              if (gb) gb[j] -= g[i];
              break;
            default:
              if (ga) ga[i] += g[i] * bn->value[j];
              if (gb) gb[j] += g[i] * an->value[i];
              break;
          }
        }
      });
}

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return elementwise(ElementwiseKind::add, a, std::optional<Tensor<T>>(b));
}
template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return elementwise(ElementwiseKind::sub, a, std::optional<Tensor<T>>(b));
}
template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return elementwise(ElementwiseKind::mul, a, std::optional<Tensor<T>>(b));
}
template <class T>
Tensor<T> abs(const Tensor<T>& a) {
  return elementwise(ElementwiseKind::abs, a);
}
template <class T>
Tensor<T> neg(const Tensor<T>& a) {
  return elementwise(ElementwiseKind::neg, a);
}
template <class T>
Tensor<T> square(const Tensor<T>& a) {
  return elementwise(ElementwiseKind::square, a);
}

/// a * factor + offset with constant scalars.
template <class T>
Tensor<T> affine(const Tensor<T>& a, T factor, T offset) {
  const std::size_t n = a.numel();
  std::vector<T> out(n);
  const auto av = a.values();
  for (std::size_t i = 0; i < n; ++i) out[i] = av[i] * factor + offset;
  Node<T>* an = a.node().get();
  return detail::make_result<T>("affine", a.shape(), std::move(out), {&a},
                                [an, n, factor](std::span<const T> g) {
                                  T* ga = detail::grad_of(an);
                                  if (!ga) return;
                                  for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * factor;
                                });
}

template <class T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  return affine(a, factor, T(0));
}

template <class T>
Tensor<T> add_scalar(const Tensor<T>& a, T offset) {
  return affine(a, T(1), offset);
}

/// Reduces over `axes` (all axes when empty). Reduced axes are removed; a
/// full reduction yields shape [1]. min/max results never track gradients.
template <class T>
Tensor<T> reduce(ReduceKind kind, const Tensor<T>& a, std::vector<std::size_t> axes = {}) {
  const Shape& in = a.shape();
  const std::size_t rank = in.size();
  std::vector<bool> reduced(rank, axes.empty());
  for (std::size_t ax : axes) {
    if (ax >= rank)
      fail(ErrorKind::invalid_argument, "reduce axis " + std::to_string(ax) +
                                            " out of range for shape " + shape_string(in));
    reduced[ax] = true;
  }
  Shape out_shape;
  for (std::size_t i = 0; i < rank; ++i)
    if (!reduced[i]) out_shape.push_back(in[i]);
  if (out_shape.empty()) out_shape.push_back(1);

  // Map every input element to its output slot.
  const std::size_t n = a.numel();
  std::vector<std::size_t> slot(n);
  {
    std::vector<std::size_t> idx(rank, 0);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t o = 0;
      for (std::size_t d = 0; d < rank; ++d)
        if (!reduced[d]) o = o * in[d] + idx[d];
      slot[i] = o;
      for (std::size_t d = rank; d-- > 0;) {
        if (++idx[d] < in[d]) break;
        idx[d] = 0;
      }
    }
  }
  const std::size_t m = shape_numel(out_shape);
  const std::size_t group = n / m;
  const auto av = a.values();

  if (kind == ReduceKind::min || kind == ReduceKind::max) {
    const bool is_min = kind == ReduceKind::min;
    std::vector<T> out(m, is_min ? std::numeric_limits<T>::infinity()
                                 : -std::numeric_limits<T>::infinity());
    for (std::size_t i = 0; i < n; ++i)
      out[slot[i]] = is_min ? std::min(out[slot[i]], av[i]) : std::max(out[slot[i]], av[i]);
    return detail::make_constant<T>(is_min ? "min" : "max", std::move(out_shape),
                                    std::move(out));
  }

  std::vector<T> out(m, T(0));
  for (std::size_t i = 0; i < n; ++i) out[slot[i]] += av[i];
  const T factor = kind == ReduceKind::mean ? T(1) / static_cast<T>(group) : T(1);
  if (kind == ReduceKind::mean)
    for (T& v : out) v *= factor;
  Node<T>* an = a.node().get();
  return detail::make_result<T>(
      kind == ReduceKind::mean ? "mean" : "sum", std::move(out_shape), std::move(out), {&a},
      [an, slot = std::move(slot), factor](std::span<const T> g) {
        T* ga = detail::grad_of(an);
        if (!ga) return;
        for (std::size_t i = 0; i < slot.size(); ++i) ga[i] += g[slot[i]] * factor;
      });
}

template <class T>
Tensor<T> sum(const Tensor<T>& a, std::vector<std::size_t> axes = {}) {
  return reduce(ReduceKind::sum, a, std::move(axes));
}

template <class T>
Tensor<T> mean(const Tensor<T>& a, std::vector<std::size_t> axes = {}) {
  return reduce(ReduceKind::mean, a, std::move(axes));
}

}  // namespace agct
