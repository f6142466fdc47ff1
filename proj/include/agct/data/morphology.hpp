#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "agct/error.hpp"

namespace agct::data {

struct Mask {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> bits;  // 0 or 1, row-major

  Mask() = default;
  Mask(std::size_t w, std::size_t h, std::uint8_t fill = 0) : width(w), height(h), bits(w * h, fill) {}

  std::uint8_t& operator()(std::size_t x, std::size_t y) { return bits[y * width + x]; }
  std::uint8_t operator()(std::size_t x, std::size_t y) const { return bits[y * width + x]; }

  std::size_t count() const {
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
  }
  bool empty() const { return count() == 0; }

  bool operator==(const Mask&) const = default;
};

enum class MorphKind { erode, dilate };

namespace internal {

// One separable pass of a (2r+1) window along x (horizontal) or y. Dilation
// takes the window max over in-image pixels; erosion the window min, also
// over in-image pixels only, so the image border does not eat into a mask.
inline Mask window_pass(const Mask& in, std::size_t r, bool horizontal, bool take_max) {
  Mask out(in.width, in.height);
  const std::ptrdiff_t w = static_cast<std::ptrdiff_t>(in.width);
  const std::ptrdiff_t h = static_cast<std::ptrdiff_t>(in.height);
  const std::ptrdiff_t rr = static_cast<std::ptrdiff_t>(r);
  for (std::ptrdiff_t y = 0; y < h; ++y)
    for (std::ptrdiff_t x = 0; x < w; ++x) {
      std::uint8_t acc = take_max ? 0 : 1;
      for (std::ptrdiff_t d = -rr; d <= rr; ++d) {
        const std::ptrdiff_t xx = horizontal ? x + d : x;
        const std::ptrdiff_t yy = horizontal ? y : y + d;
        if (xx < 0 || yy < 0 || xx >= w || yy >= h) continue;
        const std::uint8_t v = in.bits[static_cast<std::size_t>(yy * w + xx)];
        acc = take_max ? std::max(acc, v) : std::min(acc, v);
      }
      out.bits[static_cast<std::size_t>(y * w + x)] = acc;
    }
  return out;
}

}  // namespace internal

/// Minkowski erosion/dilation with a (2r+1)x(2r+1) square.
inline Mask morph(MorphKind kind, const Mask& mask, std::size_t radius) {
  if (radius < 1) fail(ErrorKind::invalid_argument, "morphology radius must be >= 1");
  const bool take_max = kind == MorphKind::dilate;
  return internal::window_pass(internal::window_pass(mask, radius, true, take_max), radius, false,
                               take_max);
}

inline Mask dilate(const Mask& m, std::size_t r) { return morph(MorphKind::dilate, m, r); }
inline Mask erode(const Mask& m, std::size_t r) { return morph(MorphKind::erode, m, r); }
inline Mask closing(const Mask& m, std::size_t r) { return erode(dilate(m, r), r); }

/// 4-connected components of the set pixels; returns a label grid (0 =
/// background, components numbered from 1 in raster order of first pixel).
inline std::vector<std::uint32_t> label_components(const Mask& m, std::uint32_t& count) {
  std::vector<std::uint32_t> labels(m.bits.size(), 0);
  std::vector<std::size_t> stack;
  count = 0;
  for (std::size_t start = 0; start < m.bits.size(); ++start) {
    if (!m.bits[start] || labels[start]) continue;
    ++count;
    labels[start] = count;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      const std::size_t x = p % m.width, y = p / m.width;
      auto visit = [&](std::size_t q) {
        if (m.bits[q] && !labels[q]) {
          labels[q] = count;
          stack.push_back(q);
        }
      };
      if (x > 0) visit(p - 1);
      if (x + 1 < m.width) visit(p + 1);
      if (y > 0) visit(p - m.width);
      if (y + 1 < m.height) visit(p + m.width);
    }
  }
  return labels;
}

/// Largest 4-connected component; ties go to the component met first in
/// raster order.
inline Mask largest_component(const Mask& m) {
  std::uint32_t n = 0;
  const auto labels = label_components(m, n);
  Mask out(m.width, m.height);
  if (n == 0) return out;
  std::vector<std::size_t> sizes(n + 1, 0);
  for (auto l : labels) ++sizes[l];
  std::uint32_t best = 1;
  for (std::uint32_t l = 2; l <= n; ++l)
    if (sizes[l] > sizes[best]) best = l;
  for (std::size_t i = 0; i < labels.size(); ++i) out.bits[i] = labels[i] == best;
  return out;
}

/// Sets every background pixel not 4-connected to the image border.
inline Mask fill_holes(const Mask& m) {
  std::vector<std::uint8_t> outside(m.bits.size(), 0);
  std::vector<std::size_t> stack;
  auto seed = [&](std::size_t x, std::size_t y) {
    const std::size_t p = y * m.width + x;
    if (!m.bits[p] && !outside[p]) {
      outside[p] = 1;
      stack.push_back(p);
    }
  };
  for (std::size_t x = 0; x < m.width; ++x) {
    seed(x, 0);
    seed(x, m.height - 1);
  }
  for (std::size_t y = 0; y < m.height; ++y) {
    seed(0, y);
    seed(m.width - 1, y);
  }
  while (!stack.empty()) {
    const std::size_t p = stack.back();
    stack.pop_back();
    const std::size_t x = p % m.width, y = p / m.width;
    if (x > 0) seed(x - 1, y);
    if (x + 1 < m.width) seed(x + 1, y);
    if (y > 0) seed(x, y - 1);
    if (y + 1 < m.height) seed(x, y + 1);
  }
  Mask out(m.width, m.height);
  for (std::size_t i = 0; i < out.bits.size(); ++i) out.bits[i] = outside[i] ? 0 : 1;
  return out;
}

}  // namespace agct::data
