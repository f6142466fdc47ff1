#pragma once

// 8-bit binary PGM (P5) panels for qualitative inspection.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "agct/io/binary.hpp"

namespace agct::io {

inline constexpr double kDisplayLowHU = -1000.0;
inline constexpr double kDisplayHighHU = 2000.0;

struct GrayImage {
  std::size_t width = 0, height = 0;
  std::vector<std::uint8_t> pixels;
};

/// Maps t in [0,1] (clamped) to 0..255, rounding half away from zero.
inline std::uint8_t gray_level(double t) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(t, 0.0, 1.0) * 255.0));
}

template <class F>
GrayImage map_image(std::span<const float> v, std::size_t w, std::size_t h, F f) {
  if (v.size() != w * h) fail(ErrorKind::shape_mismatch, "panel values do not match its size");
  GrayImage img{w, h, std::vector<std::uint8_t>(v.size())};
  for (std::size_t i = 0; i < v.size(); ++i) img.pixels[i] = gray_level(f(static_cast<double>(v[i])));
  return img;
}

inline GrayImage ct_panel(std::span<const float> hu, std::size_t w, std::size_t h) {
  return map_image(hu, w, h, [](double x) {
    return (x - kDisplayLowHU) / (kDisplayHighHU - kDisplayLowHU);
  });
}

/// Absolute difference in HU over the width of the display window.
inline GrayImage diff_panel(std::span<const float> real, std::span<const float> syn, std::size_t w,
                            std::size_t h) {
  if (real.size() != syn.size()) fail(ErrorKind::shape_mismatch, "difference panel sizes differ");
  std::vector<float> d(real.size());
  for (std::size_t i = 0; i < d.size(); ++i)
    d[i] = static_cast<float>(std::abs(static_cast<double>(real[i]) - static_cast<double>(syn[i])));
  return map_image(d, w, h, [](double x) { return x / (kDisplayHighHU - kDisplayLowHU); });
}

inline GrayImage unit_panel(std::span<const float> v, std::size_t w, std::size_t h) {
  return map_image(v, w, h, [](double x) { return x; });
}

/// MR already normalized to [-1,1].
inline GrayImage normalized_panel(std::span<const float> v, std::size_t w, std::size_t h) {
  return map_image(v, w, h, [](double x) { return (x + 1.0) / 2.0; });
}

inline std::vector<std::uint8_t> encode_pgm(const GrayImage& img) {
  ByteWriter w;
  w.text("P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n");
  w.raw(img.pixels);
  return w.take();
}

inline void write_pgm(const GrayImage& img, const std::filesystem::path& path) {
  write_file(path, encode_pgm(img));
}

inline GrayImage read_pgm(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
    std::string t;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) t.push_back(static_cast<char>(bytes[pos++]));
    return t;
  };
  if (token() != "P5") fail(ErrorKind::malformed_header, "not a binary PGM: " + path.string());
  GrayImage img;
  try {
    img.width = std::stoul(token());
    img.height = std::stoul(token());
    if (token() != "255") fail(ErrorKind::malformed_header, "PGM max value must be 255");
  } catch (const std::logic_error&) {
    fail(ErrorKind::malformed_header, "malformed PGM header: " + path.string());
  }
  ++pos;
  if (bytes.size() - std::min(pos, bytes.size()) != img.width * img.height)
    fail(ErrorKind::payload_size_mismatch, "PGM payload size mismatch: " + path.string());
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end());
  return img;
}

struct PanelSet {
  std::size_t width = 0, height = 0;
  std::vector<float> mr;                        // normalized [-1,1]
  std::vector<float> synct;                     // HU
  std::optional<std::vector<float>> real_ct;    // HU
  std::optional<std::vector<float>> attention;  // [0,1], already at image size
};

/// Writes <prefix>_mr and _synct PGMs, _ct and _diff when the reference is
/// present, and _attention when an attention map is.
inline std::vector<std::filesystem::path> emit_panels(const PanelSet& p,
                                                      const std::filesystem::path& dir,
                                                      const std::string& prefix) {
  std::vector<std::pair<std::string, GrayImage>> panels{
      {"mr", normalized_panel(p.mr, p.width, p.height)},
      {"synct", ct_panel(p.synct, p.width, p.height)}};
  if (p.real_ct) {
    panels.emplace_back("ct", ct_panel(*p.real_ct, p.width, p.height));
    panels.emplace_back("diff", diff_panel(*p.real_ct, p.synct, p.width, p.height));
  }
  if (p.attention) panels.emplace_back("attention", unit_panel(*p.attention, p.width, p.height));
  std::vector<std::filesystem::path> written;
  for (const auto& [name, img] : panels) {
    const auto path = dir / (prefix + "_" + name + ".pgm");
    write_pgm(img, path);
    written.push_back(path);
  }
  return written;
}

}  // namespace agct::io
