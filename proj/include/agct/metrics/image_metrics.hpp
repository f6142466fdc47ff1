#pragma once

// Image similarity on HU grids, restricted to a mask. Everything accumulates
// in double in raster order.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "agct/data/morphology.hpp"
#include "agct/error.hpp"

namespace agct::metrics {

using data::Mask;

inline constexpr double kSsimK1 = 0.01;
inline constexpr double kSsimK2 = 0.02;

namespace internal {

inline std::size_t check_inputs(std::span<const float> real, std::span<const float> syn,
                                const Mask& mask, const char* what) {
  if (real.size() != syn.size() || real.size() != mask.bits.size())
    fail(ErrorKind::shape_mismatch, std::string(what) + ": image and mask sizes differ");
  const std::size_t n = mask.count();
  if (n == 0) fail(ErrorKind::empty_input, std::string(what) + ": empty mask");
  return n;
}

}  // namespace internal

inline double mae(std::span<const float> real, std::span<const float> syn, const Mask& mask) {
  const std::size_t n = internal::check_inputs(real, syn, mask, "mae");
  double sum = 0;
  for (std::size_t i = 0; i < real.size(); ++i)
    if (mask.bits[i]) sum += std::abs(static_cast<double>(real[i]) - static_cast<double>(syn[i]));
  return sum / static_cast<double>(n);
}

/// Dynamic range for PSNR and SSIM: the largest value of either image inside
/// the mask.
inline double peak_value(std::span<const float> real, std::span<const float> syn, const Mask& mask) {
  internal::check_inputs(real, syn, mask, "peak_value");
  double q = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < real.size(); ++i)
    if (mask.bits[i]) q = std::max({q, static_cast<double>(real[i]), static_cast<double>(syn[i])});
  return q;
}

/// +infinity when the images agree exactly inside the mask.
inline double psnr(std::span<const float> real, std::span<const float> syn, const Mask& mask) {
  const std::size_t n = internal::check_inputs(real, syn, mask, "psnr");
  double se = 0;
  for (std::size_t i = 0; i < real.size(); ++i)
    if (mask.bits[i]) {
      const double d = static_cast<double>(real[i]) - static_cast<double>(syn[i]);
      se += d * d;
    }
  if (se == 0) return std::numeric_limits<double>::infinity();
  const double q = peak_value(real, syn, mask);
  return 10.0 * std::log10(q * q / (se / static_cast<double>(n)));
}

/// One global SSIM statistic over the masked voxels, with population
/// variances and covariance.
inline double ssim(std::span<const float> real, std::span<const float> syn, const Mask& mask) {
  const std::size_t n = internal::check_inputs(real, syn, mask, "ssim");
  const double nd = static_cast<double>(n);
  double mr = 0, ms = 0;
  for (std::size_t i = 0; i < real.size(); ++i)
    if (mask.bits[i]) {
      mr += real[i];
      ms += syn[i];
    }
  mr /= nd;
  ms /= nd;
  double vr = 0, vs = 0, cov = 0;
  for (std::size_t i = 0; i < real.size(); ++i)
    if (mask.bits[i]) {
      const double a = real[i] - mr, b = syn[i] - ms;
      vr += a * a;
      vs += b * b;
      cov += a * b;
    }
  vr /= nd;
  vs /= nd;
  cov /= nd;
  const double q = peak_value(real, syn, mask);
  const double c1 = (kSsimK1 * q) * (kSsimK1 * q), c2 = (kSsimK2 * q) * (kSsimK2 * q);
  return ((2 * mr * ms + c1) * (2 * cov + c2)) / ((mr * mr + ms * ms + c1) * (vr + vs + c2));
}

/// Windowed variant: local statistics under an 11x11 Gaussian (sigma 1.5),
/// weights renormalized over in-mask neighbours, SSIM map averaged over the
/// mask. Not used by default.
inline double ssim_windowed(std::span<const float> real, std::span<const float> syn,
                            const Mask& mask) {
  const std::size_t n = internal::check_inputs(real, syn, mask, "ssim_windowed");
  const double q = peak_value(real, syn, mask);
  const double c1 = (kSsimK1 * q) * (kSsimK1 * q), c2 = (kSsimK2 * q) * (kSsimK2 * q);
  constexpr int r = 5;
  double g[2 * r + 1];
  for (int d = -r; d <= r; ++d) g[d + r] = std::exp(-d * d / (2 * 1.5 * 1.5));
  const auto w = static_cast<std::ptrdiff_t>(mask.width), h = static_cast<std::ptrdiff_t>(mask.height);
  double total = 0;
  for (std::ptrdiff_t y = 0; y < h; ++y)
    for (std::ptrdiff_t x = 0; x < w; ++x) {
      if (!mask.bits[static_cast<std::size_t>(y * w + x)]) continue;
      double sw = 0, sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
      for (std::ptrdiff_t dy = -r; dy <= r; ++dy)
        for (std::ptrdiff_t dx = -r; dx <= r; ++dx) {
          const std::ptrdiff_t xx = x + dx, yy = y + dy;
          if (xx < 0 || yy < 0 || xx >= w || yy >= h) continue;
          const auto i = static_cast<std::size_t>(yy * w + xx);
          if (!mask.bits[i]) continue;
          const double k = g[dx + r] * g[dy + r], a = real[i], b = syn[i];
          sw += k;
          sa += k * a;
          sb += k * b;
          saa += k * a * a;
          sbb += k * b * b;
          sab += k * a * b;
        }
      const double ma = sa / sw, mb = sb / sw;
      const double va = std::max(0.0, saa / sw - ma * ma), vb = std::max(0.0, sbb / sw - mb * mb);
      const double cab = sab / sw - ma * mb;
      total += ((2 * ma * mb + c1) * (2 * cab + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
  return total / static_cast<double>(n);
}

}  // namespace agct::metrics
