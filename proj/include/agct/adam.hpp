#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "agct/autograd.hpp"
#include "agct/tensor.hpp"

namespace agct {

template <class T>
struct NamedParameter {
  std::string name;
  Tensor<T> tensor;
};

template <class T>
using ParameterSet = std::vector<NamedParameter<T>>;

struct AdamHyper {
  double learning_rate = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <class T>
struct AdamMoments {
  std::vector<T> first;
  std::vector<T> second;
};

template <class T>
struct AdamState {
  AdamHyper hyper;
  std::uint64_t step = 0;
  std::map<std::string, AdamMoments<T>> moments;
};

/// One bias-corrected ADAM update of every parameter in `params`, in place.
template <class T>
void adam_step(ParameterSet<T>& params, const Gradients<T>& grads, AdamState<T>& state) {
  for (const auto& p : params)
    if (!grads.contains(p.tensor))
      fail(ErrorKind::missing_parameter, "no gradient for parameter '" + p.name + "'");

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double b1 = state.hyper.beta1;
  const double b2 = state.hyper.beta2;
  const double c1 = 1.0 - std::pow(b1, t);
  const double c2 = 1.0 - std::pow(b2, t);
  const double lr = state.hyper.learning_rate;
  const double eps = state.hyper.epsilon;

  for (auto& p : params) {
    const std::vector<T>& g = *grads.find(p.tensor);
    auto& mom = state.moments[p.name];
    const std::size_t n = p.tensor.numel();
    if (mom.first.empty()) {
      mom.first.assign(n, T(0));
      mom.second.assign(n, T(0));
    }
    if (mom.first.size() != n || mom.second.size() != n)
      fail(ErrorKind::shape_mismatch, "adam moments for '" + p.name + "' do not match parameter");
    auto values = p.tensor.mutable_values();
    for (std::size_t i = 0; i < n; ++i) {
      const double gi = static_cast<double>(g[i]);
      const double m = b1 * static_cast<double>(mom.first[i]) + (1.0 - b1) * gi;
      const double v = b2 * static_cast<double>(mom.second[i]) + (1.0 - b2) * gi * gi;
      mom.first[i] = static_cast<T>(m);
      mom.second[i] = static_cast<T>(v);
      const double update = lr * (m / c1) / (std::sqrt(v / c2) + eps);
      values[i] = static_cast<T>(static_cast<double>(values[i]) - update);
    }
  }
}

}  // namespace agct
