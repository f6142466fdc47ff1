#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "agct/data/morphology.hpp"
#include "agct/data/volume.hpp"
#include "agct/error.hpp"

namespace agct::data {

inline constexpr double kHeadThresholdFraction = 0.05;
inline constexpr std::size_t kHeadMorphRadius = 2;
inline constexpr double kMrPercentile = 99.9;
inline constexpr double kCtWindowLow = -1000.0;
inline constexpr double kCtWindowHigh = 2000.0;

/// Percentile with linear interpolation between order statistics (rank
/// q/100 * (n-1)), the usual "linear" definition.
inline double percentile(std::span<const float> values, double q) {
  if (values.empty()) fail(ErrorKind::empty_input, "percentile of an empty set");
  std::vector<float> v(values.begin(), values.end());
  const double rank = q / 100.0 * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(lo), v.end());
  const double a = v[lo];
  double b = a;
  if (hi != lo) b = *std::min_element(v.begin() + static_cast<std::ptrdiff_t>(lo) + 1, v.end());
  return a + (rank - static_cast<double>(lo)) * (b - a);
}

/// Threshold at fraction * p99.9, closing, largest 4-connected component,
/// hole filling. Throws no_head_found when nothing survives.
inline Mask head_mask(std::span<const float> mr_slice, std::size_t width, std::size_t height,
                      double threshold_fraction = kHeadThresholdFraction,
                      std::size_t morph_radius = kHeadMorphRadius) {
  if (mr_slice.size() != width * height)
    fail(ErrorKind::shape_mismatch, "head_mask slice size does not match dimensions");
  const double p = percentile(mr_slice, kMrPercentile);
  const double threshold = threshold_fraction * p;
  Mask m(width, height);
  for (std::size_t i = 0; i < mr_slice.size(); ++i) m.bits[i] = mr_slice[i] > threshold;
  if (m.empty()) fail(ErrorKind::no_head_found, "no head found: slice has no voxel above threshold");
  m = fill_holes(largest_component(closing(m, morph_radius)));
  if (m.empty()) fail(ErrorKind::no_head_found, "no head found after morphology");
  return m;
}

// CT window [-1000, 2000] HU <-> [-1, 1]. Computed in double; the inverse is
// exact on float HU values from the window.
inline double normalize_hu(double hu) {
  const double c = std::clamp(hu, kCtWindowLow, kCtWindowHigh);
  return (c - 500.0) / 1500.0;
}
inline double denormalize_hu(double v) { return v * 1500.0 + 500.0; }

inline std::vector<double> normalize_ct(std::span<const float> hu) {
  std::vector<double> out(hu.size());
  for (std::size_t i = 0; i < hu.size(); ++i) out[i] = normalize_hu(hu[i]);
  return out;
}

template <class T>
std::vector<float> denormalize_ct(std::span<const T> v) {
  std::vector<float> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    out[i] = static_cast<float>(denormalize_hu(static_cast<double>(v[i])));
  return out;
}

/// MR scale: the volume's 99.9th percentile maps to +1, zero to -1.
inline double mr_scale(const Volume& mr) { return percentile(mr.voxels, kMrPercentile); }

inline double normalize_mr_value(double x, double p999) {
  if (!(p999 > 0)) return -1.0;
  return std::clamp(x / p999, 0.0, 1.0) * 2.0 - 1.0;
}

inline std::vector<double> normalize_mr(std::span<const float> mr, double p999) {
  std::vector<double> out(mr.size());
  for (std::size_t i = 0; i < mr.size(); ++i) out[i] = normalize_mr_value(mr[i], p999);
  return out;
}

/// Sets everything outside the mask to -1 (air-equivalent).
inline void apply_mask(std::vector<double>& v, const Mask& m) {
  for (std::size_t i = 0; i < v.size(); ++i)
    if (!m.bits[i]) v[i] = -1.0;
}

}  // namespace agct::data
