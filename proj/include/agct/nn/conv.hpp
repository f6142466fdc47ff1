#pragma once

// 2-D convolution and its adjoint over NCHW tensors, lowered to GEMM via
// im2col. Cross-correlation convention, symmetric zero padding.

#include <Eigen/Core>
#include <type_traits>
#include <vector>

#include "agct/tensor.hpp"

namespace agct::nn {

/// Weight layout is [out, in, kh, kw] for conv2d and [in, out, kh, kw] for
/// conv_transpose2d, so one tensor describes a conv and its adjoint.
template <class T>
struct Conv2dParams {
  Tensor<T> weight;
  Tensor<T> bias;
  std::size_t stride = 1;
  std::size_t padding = 0;
};

namespace internal {

template <class T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <class T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

// dst (+)= lhs * rhs. Eigen's blocked GEMM packs both operands, so its result
// depends only on the shapes. Its matrix-vector and coefficient-based paths
// peel according to pointer alignment, which would make training depend on
// where the allocator placed a buffer; those shapes get a fixed-order loop.
template <class Dst, class Lhs, class Rhs>
void matmul(Dst&& dst, const Lhs& lhs, const Rhs& rhs, bool accumulate) {
  const Eigen::Index m = lhs.rows(), k = lhs.cols(), n = rhs.cols();
  if (m > 1 && n > 1 && m + n + k >= 20) {
    if (accumulate)
      dst.noalias() += lhs * rhs;
    else
      dst.noalias() = lhs * rhs;
    return;
  }
  using T = typename std::decay_t<Dst>::Scalar;
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      T acc = accumulate ? dst(i, j) : T(0);
      for (Eigen::Index p = 0; p < k; ++p) acc += lhs(i, p) * rhs(p, j);
      dst(i, j) = acc;
    }
}

template <class T>
T row_sum(const T* x, std::size_t n) {
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

struct ConvGeometry {
  std::size_t channels, height, width;  // image side
  std::size_t kh, kw, stride, padding;
  std::size_t out_h, out_w;             // sliding-window side

  std::size_t rows() const { return channels * kh * kw; }
  std::size_t cols() const { return out_h * out_w; }
};

template <class T>
void im2col(const T* image, const ConvGeometry& g, T* cols) {
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(g.padding);
  const std::size_t ncols = g.cols();
  for (std::size_t c = 0; c < g.channels; ++c)
    for (std::size_t i = 0; i < g.kh; ++i)
      for (std::size_t j = 0; j < g.kw; ++j) {
        T* row = cols + ((c * g.kh + i) * g.kw + j) * ncols;
        const T* plane = image + c * g.height * g.width;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(oy * g.stride + i) - pad;
          T* dst = row + oy * g.out_w;
          if (y < 0 || y >= static_cast<std::ptrdiff_t>(g.height)) {
            std::fill(dst, dst + g.out_w, T(0));
            continue;
          }
          const T* src = plane + static_cast<std::size_t>(y) * g.width;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const std::ptrdiff_t x = static_cast<std::ptrdiff_t>(ox * g.stride + j) - pad;
            dst[ox] = (x < 0 || x >= static_cast<std::ptrdiff_t>(g.width))
                          ? T(0)
                          : src[static_cast<std::size_t>(x)];
          }
        }
      }
}

// Scatter-add of im2col: image += col2im(cols).
template <class T>
void col2im(const T* cols, const ConvGeometry& g, T* image) {
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(g.padding);
  const std::size_t ncols = g.cols();
  for (std::size_t c = 0; c < g.channels; ++c)
    for (std::size_t i = 0; i < g.kh; ++i)
      for (std::size_t j = 0; j < g.kw; ++j) {
        const T* row = cols + ((c * g.kh + i) * g.kw + j) * ncols;
        T* plane = image + c * g.height * g.width;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(oy * g.stride + i) - pad;
          if (y < 0 || y >= static_cast<std::ptrdiff_t>(g.height)) continue;
          T* dst = plane + static_cast<std::size_t>(y) * g.width;
          const T* src = row + oy * g.out_w;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const std::ptrdiff_t x = static_cast<std::ptrdiff_t>(ox * g.stride + j) - pad;
            if (x >= 0 && x < static_cast<std::ptrdiff_t>(g.width))
              dst[static_cast<std::size_t>(x)] += src[ox];
          }
        }
      }
}

inline void check_rank4(const Shape& s, const char* what) {
  if (s.size() != 4)
    fail(ErrorKind::shape_mismatch,
         std::string(what) + " expects a rank-4 tensor, got " + shape_string(s));
}

}  // namespace internal

inline std::size_t conv_output_size(std::size_t in, std::size_t kernel, std::size_t stride,
                                    std::size_t padding) {
  if (in + 2 * padding < kernel) return 0;
  return (in + 2 * padding - kernel) / stride + 1;
}

inline std::size_t conv_transpose_output_size(std::size_t in, std::size_t kernel,
                                              std::size_t stride, std::size_t padding) {
  const std::ptrdiff_t out = static_cast<std::ptrdiff_t>((in - 1) * stride + kernel) -
                             2 * static_cast<std::ptrdiff_t>(padding);
  return out < 1 ? 0 : static_cast<std::size_t>(out);
}

template <class T>
Tensor<T> conv2d(const Tensor<T>& input, const Conv2dParams<T>& p) {
  internal::check_rank4(input.shape(), "conv2d input");
  internal::check_rank4(p.weight.shape(), "conv2d weight");
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t cout = p.weight.dim(0), kh = p.weight.dim(2), kw = p.weight.dim(3);
  if (p.weight.dim(1) != c)
    fail(ErrorKind::shape_mismatch, "conv2d channel mismatch: input has " + std::to_string(c) +
                                        ", weight expects " + std::to_string(p.weight.dim(1)));
  if (p.bias.numel() != cout)
    fail(ErrorKind::shape_mismatch, "conv2d bias length does not match output channels");
  if (p.stride == 0) fail(ErrorKind::invalid_argument, "conv2d stride must be >= 1");
  const std::size_t oh = conv_output_size(h, kh, p.stride, p.padding);
  const std::size_t ow = conv_output_size(w, kw, p.stride, p.padding);
  if (oh < 1 || ow < 1)
    fail(ErrorKind::shape_mismatch, "conv2d output dimension < 1 for input " +
                                        shape_string(input.shape()));

  const internal::ConvGeometry g{c, h, w, kh, kw, p.stride, p.padding, oh, ow};
  const std::size_t k = g.rows(), cols_n = g.cols();
  const bool track = grad_enabled() && (input.requires_grad() || p.weight.requires_grad() ||
                                        p.bias.requires_grad());
  std::vector<T> cols(track ? n * k * cols_n : k * cols_n);
  std::vector<T> out(n * cout * cols_n);
  const internal::ConstMatrixMap<T> wm(p.weight.values().data(), cout, k);
  const auto bias = p.bias.values();
  for (std::size_t b = 0; b < n; ++b) {
    T* cb = cols.data() + (track ? b * k * cols_n : 0);
    internal::im2col(input.values().data() + b * c * h * w, g, cb);
    internal::MatrixMap<T> om(out.data() + b * cout * cols_n, cout, cols_n);
    internal::matmul(om, wm, internal::ConstMatrixMap<T>(cb, k, cols_n), false);
    for (std::size_t o = 0; o < cout; ++o) om.row(o).array() += bias[o];
  }
  if (!track) cols.clear();

  Node<T>* xn = input.node().get();
  Node<T>* wn = p.weight.node().get();
  Node<T>* bn = p.bias.node().get();
  return ::agct::detail::make_result<T>(
      "conv2d", Shape{n, cout, oh, ow}, std::move(out), {&input, &p.weight, &p.bias},
      [xn, wn, bn, g, n, cout, cols = std::move(cols)](std::span<const T> grad) {
        const std::size_t k = g.rows(), cols_n = g.cols();
        T* gx = ::agct::detail::grad_of(xn);
        T* gw = ::agct::detail::grad_of(wn);
        T* gb = ::agct::detail::grad_of(bn);
        const internal::ConstMatrixMap<T> wm(wn->value.data(), cout, k);
        std::vector<T> dcols(gx ? k * cols_n : 0);
        for (std::size_t b = 0; b < n; ++b) {
          const internal::ConstMatrixMap<T> gm(grad.data() + b * cout * cols_n, cout, cols_n);
          const internal::ConstMatrixMap<T> cm(cols.data() + b * k * cols_n, k, cols_n);
          if (gw) internal::matmul(internal::MatrixMap<T>(gw, cout, k), gm, cm.transpose(), true);
          if (gb)
            for (std::size_t o = 0; o < cout; ++o)
              gb[o] += internal::row_sum(grad.data() + (b * cout + o) * cols_n, cols_n);
          if (gx) {
            internal::matmul(internal::MatrixMap<T>(dcols.data(), k, cols_n), wm.transpose(), gm,
                             false);
            internal::col2im(dcols.data(), g, gx + b * g.channels * g.height * g.width);
          }
        }
      });
}

template <class T>
Tensor<T> conv_transpose2d(const Tensor<T>& input, const Conv2dParams<T>& p) {
  internal::check_rank4(input.shape(), "conv_transpose2d input");
  internal::check_rank4(p.weight.shape(), "conv_transpose2d weight");
  const std::size_t n = input.dim(0), cin = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t cout = p.weight.dim(1), kh = p.weight.dim(2), kw = p.weight.dim(3);
  if (p.weight.dim(0) != cin)
    fail(ErrorKind::shape_mismatch,
         "conv_transpose2d channel mismatch: input has " + std::to_string(cin) +
             ", weight expects " + std::to_string(p.weight.dim(0)));
  if (p.bias.numel() != cout)
    fail(ErrorKind::shape_mismatch, "conv_transpose2d bias length does not match output channels");
  if (p.stride == 0) fail(ErrorKind::invalid_argument, "conv_transpose2d stride must be >= 1");
  const std::size_t oh = conv_transpose_output_size(h, kh, p.stride, p.padding);
  const std::size_t ow = conv_transpose_output_size(w, kw, p.stride, p.padding);
  if (oh < 1 || ow < 1 || conv_output_size(oh, kh, p.stride, p.padding) != h ||
      conv_output_size(ow, kw, p.stride, p.padding) != w)
    fail(ErrorKind::shape_mismatch, "conv_transpose2d output dimension < 1 for input " +
                                        shape_string(input.shape()));

  // Geometry of the adjoint conv: image side is our output.
  const internal::ConvGeometry g{cout, oh, ow, kh, kw, p.stride, p.padding, h, w};
  const std::size_t k = g.rows(), pin = g.cols();
  std::vector<T> out(n * cout * oh * ow, T(0));
  std::vector<T> cols(k * pin);
  const internal::ConstMatrixMap<T> wm(p.weight.values().data(), cin, k);
  for (std::size_t b = 0; b < n; ++b) {
    const internal::ConstMatrixMap<T> xm(input.values().data() + b * cin * pin, cin, pin);
    internal::matmul(internal::MatrixMap<T>(cols.data(), k, pin), wm.transpose(), xm, false);
    T* ob = out.data() + b * cout * oh * ow;
    internal::col2im(cols.data(), g, ob);
    const auto bias = p.bias.values();
    for (std::size_t o = 0; o < cout; ++o)
      for (std::size_t i = 0; i < oh * ow; ++i) ob[o * oh * ow + i] += bias[o];
  }

  Node<T>* xn = input.node().get();
  Node<T>* wn = p.weight.node().get();
  Node<T>* bn = p.bias.node().get();
  return ::agct::detail::make_result<T>(
      "conv_transpose2d", Shape{n, cout, oh, ow}, std::move(out), {&input, &p.weight, &p.bias},
      [xn, wn, bn, g, n, cin](std::span<const T> grad) {
        const std::size_t k = g.rows(), pin = g.cols();
        const std::size_t plane = g.height * g.width;
        T* gx = ::agct::detail::grad_of(xn);
        T* gw = ::agct::detail::grad_of(wn);
        T* gb = ::agct::detail::grad_of(bn);
        const internal::ConstMatrixMap<T> wm(wn->value.data(), cin, k);
        std::vector<T> dcols(k * pin);
        for (std::size_t b = 0; b < n; ++b) {
          const T* gout = grad.data() + b * g.channels * plane;
          if (gb)
            for (std::size_t o = 0; o < g.channels; ++o)
              for (std::size_t i = 0; i < plane; ++i) gb[o] += gout[o * plane + i];
          if (!gx && !gw) continue;
          internal::im2col(gout, g, dcols.data());
          const internal::ConstMatrixMap<T> dm(dcols.data(), k, pin);
          if (gx) internal::matmul(internal::MatrixMap<T>(gx + b * cin * pin, cin, pin), wm, dm, true);
          if (gw) {
            const internal::ConstMatrixMap<T> xm(xn->value.data() + b * cin * pin, cin, pin);
            internal::matmul(internal::MatrixMap<T>(gw, cin, k), xm, dm.transpose(), true);
          }
        }
      });
}

}  // namespace agct::nn
