#pragma once

#include <random>
#include <vector>

#include "agct/nn/batch_norm.hpp"
#include "agct/nn/conv.hpp"
#include "agct/tensor.hpp"

namespace agct::nn {

using Rng = std::mt19937_64;

inline constexpr double kInitStd = 0.02;

/// i.i.d. normal(0, std) draws; the sequence depends only on the generator state.
template <class T>
std::vector<T> init_params(const Shape& shape, Rng& rng, double std_dev = kInitStd) {
  std::normal_distribution<double> dist(0.0, std_dev);
  std::vector<T> v(shape_numel(shape));
  for (T& x : v) x = static_cast<T>(dist(rng));
  return v;
}

template <class T>
Conv2dParams<T> make_conv(std::size_t in, std::size_t out, std::size_t kernel,
                          std::size_t stride, std::size_t padding, Rng& rng) {
  const Shape ws{out, in, kernel, kernel};
  return {make_tensor<T>(ws, init_params<T>(ws, rng), true), zeros<T>({out}, true), stride,
          padding};
}

template <class T>
Conv2dParams<T> make_conv_transpose(std::size_t in, std::size_t out, std::size_t kernel,
                                    std::size_t stride, std::size_t padding, Rng& rng) {
  const Shape ws{in, out, kernel, kernel};
  return {make_tensor<T>(ws, init_params<T>(ws, rng), true), zeros<T>({out}, true), stride,
          padding};
}

template <class T>
BatchNormParams<T> make_batch_norm(std::size_t channels) {
  BatchNormParams<T> p;
  p.scale = full<T>({channels}, T(1), true);
  p.shift = zeros<T>({channels}, true);
  p.running_mean.assign(channels, T(0));
  p.running_var.assign(channels, T(1));
  return p;
}

}  // namespace agct::nn
