#pragma once

#include "agct/nn/activation.hpp"
#include "agct/nn/batch_norm.hpp"
#include "agct/nn/conv.hpp"
#include "agct/nn/init.hpp"
#include "agct/ops.hpp"

namespace agct::nn {

/// conv -> norm -> ReLU -> conv -> norm, added to the block input.
template <class T>
struct ResidualBlockParams {
  Conv2dParams<T> conv1;
  BatchNormParams<T> norm1;
  Conv2dParams<T> conv2;
  BatchNormParams<T> norm2;
};

template <class T>
ResidualBlockParams<T> make_residual_block(std::size_t channels, std::size_t kernel, Rng& rng) {
  const std::size_t pad = kernel / 2;
  ResidualBlockParams<T> p;
  p.conv1 = make_conv<T>(channels, channels, kernel, 1, pad, rng);
  p.norm1 = make_batch_norm<T>(channels);
  p.conv2 = make_conv<T>(channels, channels, kernel, 1, pad, rng);
  p.norm2 = make_batch_norm<T>(channels);
  return p;
}

template <class T>
Tensor<T> residual_block(const Tensor<T>& input, ResidualBlockParams<T>& p) {
  if (input.rank() != 4 || p.conv1.weight.dim(1) != input.dim(1) ||
      p.conv2.weight.dim(0) != input.dim(1))
    fail(ErrorKind::shape_mismatch, "residual block channel mismatch for input " +
                                        shape_string(input.shape()));
  Tensor<T> h = relu(batch_norm(conv2d(input, p.conv1), p.norm1));
  h = batch_norm(conv2d(h, p.conv2), p.norm2);
  return add(input, h);
}

}  // namespace agct::nn
