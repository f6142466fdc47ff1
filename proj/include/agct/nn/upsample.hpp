#pragma once

#include <cmath>
#include <vector>

#include "agct/tensor.hpp"

namespace agct::nn {

namespace internal {

struct LerpTap {
  std::size_t lo, hi;
  double frac;
};

// Corner-aligned sampling: output index i maps to i * (in-1)/(out-1).
inline std::vector<LerpTap> lerp_taps(std::size_t in, std::size_t out) {
  std::vector<LerpTap> taps(out);
  for (std::size_t i = 0; i < out; ++i) {
    if (in == 1 || out == 1) {
      taps[i] = {0, 0, 0.0};
      continue;
    }
    const double pos = static_cast<double>(i) * static_cast<double>(in - 1) /
                       static_cast<double>(out - 1);
    std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    if (lo >= in - 1) lo = in - 1;
    const std::size_t hi = lo + 1 < in ? lo + 1 : lo;
    taps[i] = {lo, hi, pos - static_cast<double>(lo)};
  }
  return taps;
}

}  // namespace internal

template <class T>
Tensor<T> bilinear_upsample(const Tensor<T>& input, std::size_t target_h, std::size_t target_w) {
  if (input.rank() != 4)
    fail(ErrorKind::shape_mismatch,
         "bilinear_upsample expects [N,C,H,W], got " + shape_string(input.shape()));
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  if (target_h < h || target_w < w)
    fail(ErrorKind::invalid_argument, "bilinear_upsample cannot downscale " +
                                          shape_string(input.shape()) + " to " +
                                          std::to_string(target_h) + "x" +
                                          std::to_string(target_w));
  const auto ty = internal::lerp_taps(h, target_h);
  const auto tx = internal::lerp_taps(w, target_w);
  const auto x = input.values();
  std::vector<T> out(n * c * target_h * target_w);
  for (std::size_t p = 0; p < n * c; ++p) {
    const T* src = x.data() + p * h * w;
    T* dst = out.data() + p * target_h * target_w;
    for (std::size_t i = 0; i < target_h; ++i) {
      const auto& a = ty[i];
      for (std::size_t j = 0; j < target_w; ++j) {
        const auto& b = tx[j];
        // lo + f * (hi - lo) keeps constants exact and stays within [lo, hi]
        const double tl = src[a.lo * w + b.lo], tr = src[a.lo * w + b.hi];
        const double bl = src[a.hi * w + b.lo], br = src[a.hi * w + b.hi];
        const double top = tl + b.frac * (tr - tl);
        const double bot = bl + b.frac * (br - bl);
        dst[i * target_w + j] = static_cast<T>(top + a.frac * (bot - top));
      }
    }
  }
  Node<T>* xn = input.node().get();
  return ::agct::detail::make_result<T>(
      "bilinear_upsample", Shape{n, c, target_h, target_w}, std::move(out), {&input},
      [xn, n, c, h, w, target_h, target_w, ty, tx](std::span<const T> g) {
        T* gx = ::agct::detail::grad_of(xn);
        if (!gx) return;
        for (std::size_t p = 0; p < n * c; ++p) {
          T* dst = gx + p * h * w;
          const T* src = g.data() + p * target_h * target_w;
          for (std::size_t i = 0; i < target_h; ++i) {
            const auto& a = ty[i];
            for (std::size_t j = 0; j < target_w; ++j) {
              const auto& b = tx[j];
              const double v = src[i * target_w + j];
              dst[a.lo * w + b.lo] += static_cast<T>(v * (1.0 - a.frac) * (1.0 - b.frac));
              dst[a.lo * w + b.hi] += static_cast<T>(v * (1.0 - a.frac) * b.frac);
              dst[a.hi * w + b.lo] += static_cast<T>(v * a.frac * (1.0 - b.frac));
              dst[a.hi * w + b.hi] += static_cast<T>(v * a.frac * b.frac);
            }
          }
        }
      });
}

}  // namespace agct::nn
