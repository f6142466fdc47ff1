#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <type_traits>
#include <vector>

#include "agct/autograd.hpp"
#include "agct/tensor.hpp"

namespace agct {

struct GradCheckOptions {
  double eps = 1e-4;
  /// Elements checked per input; 0 checks every element. Sampled elements
  /// are drawn without replacement from a generator seeded with `seed`.
  std::size_t max_elements_per_input = 0;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  /// Elements skipped because the +-eps evaluations straddle an abs/ReLU kink.
  std::size_t excluded = 0;
  std::size_t worst_input = 0;
  std::size_t worst_element = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// Compares reverse-mode gradients of a scalar function against central
/// differences. Relative error is |a - n| / max(|a|, |n|, 1e-8).
template <class T>
GradCheckResult grad_check(const std::function<Tensor<T>()>& function,
                           std::vector<Tensor<T>> inputs, GradCheckOptions options = {}) {
  static_assert(std::is_same_v<T, double>, "gradient checks run in 64-bit mode");

  Tensor<T> out = function();
  if (out.numel() != 1)
    fail(ErrorKind::shape_mismatch,
         "grad_check function must return a scalar, got " + shape_string(out.shape()));
  const Gradients<T> grads = backward(out);

  auto& monitor = detail::kink_monitor;
  auto evaluate = [&](std::uint64_t& pattern) {
    NoGradGuard guard;
    monitor.reset();
    const double v = static_cast<double>(function().item());
    pattern = monitor.hash;
    return v;
  };

  struct MonitorScope {
    detail::KinkMonitor& m;
    explicit MonitorScope(detail::KinkMonitor& mon) : m(mon) { m.active = true; }
    ~MonitorScope() { m.active = false; }
  } scope(monitor);

  std::uint64_t base_pattern = 0;
  evaluate(base_pattern);
  GradCheckResult result;
  std::mt19937_64 rng(options.seed);
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Tensor<T>& input = inputs[k];
    const std::vector<T> analytic = grads.get(input);
    std::vector<std::size_t> elements(input.numel());
    std::iota(elements.begin(), elements.end(), std::size_t{0});
    if (options.max_elements_per_input && elements.size() > options.max_elements_per_input) {
      std::shuffle(elements.begin(), elements.end(), rng);
      elements.resize(options.max_elements_per_input);
      std::sort(elements.begin(), elements.end());
    }
    auto values = input.mutable_values();
    for (std::size_t i : elements) {
      const T saved = values[i];
      std::uint64_t plus_pattern = 0, minus_pattern = 0;
      values[i] = saved + static_cast<T>(options.eps);
      const double f_plus = evaluate(plus_pattern);
      values[i] = saved - static_cast<T>(options.eps);
      const double f_minus = evaluate(minus_pattern);
      values[i] = saved;
      if (plus_pattern != base_pattern || minus_pattern != base_pattern) {
        ++result.excluded;
        continue;
      }
      const double numeric = (f_plus - f_minus) / (2.0 * options.eps);
      const double a = static_cast<double>(analytic[i]);
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double rel = std::abs(a - numeric) / denom;
      ++result.checked;
      if (rel > result.max_relative_error) {
        result.max_relative_error = rel;
        result.worst_input = k;
        result.worst_element = i;
        result.worst_analytic = a;
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace agct
