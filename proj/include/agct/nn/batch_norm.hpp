#pragma once

#include <cmath>
#include <vector>

#include "agct/tensor.hpp"

namespace agct::nn {

/// train: normalize by batch statistics and update running stats.
/// eval: normalize by running stats.
/// batch_stats: batch statistics without touching running stats (inference
/// with batch size 1, where this equals instance normalization).
enum class NormMode { train, eval, batch_stats };

template <class T>
struct BatchNormParams {
  Tensor<T> scale;
  Tensor<T> shift;
  std::vector<T> running_mean;
  std::vector<T> running_var;
  double momentum = 0.1;
  double epsilon = 1e-5;
  NormMode mode = NormMode::train;

  std::size_t channels() const { return scale.numel(); }
};

template <class T>
Tensor<T> batch_norm(const Tensor<T>& input, BatchNormParams<T>& p) {
  if (input.rank() != 4)
    fail(ErrorKind::shape_mismatch,
         "batch_norm expects [N,C,H,W], got " + shape_string(input.shape()));
  const std::size_t n = input.dim(0), c = input.dim(1);
  const std::size_t plane = input.dim(2) * input.dim(3);
  if (c != p.channels())
    fail(ErrorKind::shape_mismatch, "batch_norm channel mismatch: input has " +
                                        std::to_string(c) + ", parameters have " +
                                        std::to_string(p.channels()));
  if (plane == 0 || n == 0) fail(ErrorKind::shape_mismatch, "batch_norm on zero spatial extent");
  const std::size_t count = n * plane;
  const auto x = input.values();
  const auto gamma = p.scale.values();
  const auto beta = p.shift.values();

  std::vector<T> mean(c), inv_std(c);
  const bool use_batch = p.mode != NormMode::eval;
  for (std::size_t ch = 0; ch < c; ++ch) {
    if (use_batch) {
      double s = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        const T* row = x.data() + (b * c + ch) * plane;
        for (std::size_t i = 0; i < plane; ++i) s += row[i];
      }
      const double mu = s / static_cast<double>(count);
      double ss = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        const T* row = x.data() + (b * c + ch) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          const double d = row[i] - mu;
          ss += d * d;
        }
      }
      const double var = ss / static_cast<double>(count);
      mean[ch] = static_cast<T>(mu);
      inv_std[ch] = static_cast<T>(1.0 / std::sqrt(var + p.epsilon));
      if (p.mode == NormMode::train) {
        p.running_mean[ch] =
            static_cast<T>((1.0 - p.momentum) * p.running_mean[ch] + p.momentum * mu);
        p.running_var[ch] =
            static_cast<T>((1.0 - p.momentum) * p.running_var[ch] + p.momentum * var);
      }
    } else {
      mean[ch] = p.running_mean[ch];
      inv_std[ch] = static_cast<T>(1.0 / std::sqrt(static_cast<double>(p.running_var[ch]) +
                                                   p.epsilon));
    }
  }

  std::vector<T> xhat(x.size()), out(x.size());
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t off = (b * c + ch) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        const T xh = (x[off + i] - mean[ch]) * inv_std[ch];
        xhat[off + i] = xh;
        out[off + i] = gamma[ch] * xh + beta[ch];
      }
    }

  Node<T>* xn = input.node().get();
  Node<T>* gn = p.scale.node().get();
  Node<T>* bn = p.shift.node().get();
  return ::agct::detail::make_result<T>(
      "batch_norm", input.shape(), std::move(out), {&input, &p.scale, &p.shift},
      [xn, gn, bn, n, c, plane, count, use_batch, xhat = std::move(xhat),
       inv_std = std::move(inv_std)](std::span<const T> g) {
        T* gx = ::agct::detail::grad_of(xn);
        T* gg = ::agct::detail::grad_of(gn);
        T* gb = ::agct::detail::grad_of(bn);
        for (std::size_t ch = 0; ch < c; ++ch) {
          double sum_g = 0.0, sum_gx = 0.0;
          for (std::size_t b = 0; b < n; ++b) {
            const std::size_t off = (b * c + ch) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
              sum_g += g[off + i];
              sum_gx += static_cast<double>(g[off + i]) * xhat[off + i];
            }
          }
          if (gg) gg[ch] += static_cast<T>(sum_gx);
          if (gb) gb[ch] += static_cast<T>(sum_g);
          if (!gx) continue;
          const double gamma = gn->value[ch];
          const double is = inv_std[ch];
          for (std::size_t b = 0; b < n; ++b) {
            const std::size_t off = (b * c + ch) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
              if (use_batch) {
                const double m = static_cast<double>(count);
                gx[off + i] += static_cast<T>(
                    gamma * is / m * (m * g[off + i] - sum_g - xhat[off + i] * sum_gx));
              } else {
                gx[off + i] += static_cast<T>(gamma * is * g[off + i]);
              }
            }
          }
        }
      });
}

}  // namespace agct::nn
