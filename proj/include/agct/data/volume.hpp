#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "agct/error.hpp"

namespace agct::data {

enum class Modality { MR, CT };

inline std::string_view to_string(Modality m) { return m == Modality::MR ? "MR" : "CT"; }

inline Modality parse_modality(std::string_view s) {
  if (s == "MR") return Modality::MR;
  if (s == "CT") return Modality::CT;
  fail(ErrorKind::malformed_header, "unknown modality '" + std::string(s) + "'");
}

inline constexpr float kMinHU = -1024.0f;
inline constexpr float kMaxHU = 3000.0f;

/// Row-major voxel grid, x fastest, then y, then z. CT in HU, MR in
/// arbitrary non-negative units.
struct Volume {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t depth = 0;
  std::array<double, 3> spacing{1.0, 1.0, 1.0};
  Modality modality = Modality::MR;
  std::string subject_id;
  std::vector<float> voxels;

  std::size_t slice_size() const { return width * height; }
  std::size_t voxel_count() const { return width * height * depth; }

  std::span<const float> slice(std::size_t z) const {
    return std::span<const float>(voxels).subspan(z * slice_size(), slice_size());
  }
  std::span<float> slice(std::size_t z) {
    return std::span<float>(voxels).subspan(z * slice_size(), slice_size());
  }

  float& at(std::size_t x, std::size_t y, std::size_t z) {
    return voxels[(z * height + y) * width + x];
  }
  float at(std::size_t x, std::size_t y, std::size_t z) const {
    return voxels[(z * height + y) * width + x];
  }

  bool operator==(const Volume&) const = default;
};

/// Shape and range invariants. Throws on the first violation.
inline void validate(const Volume& v) {
  if (v.width == 0 || v.height == 0 || v.depth == 0)
    fail(ErrorKind::invalid_argument, "volume dimensions must be positive, got " +
                                          std::to_string(v.width) + "x" +
                                          std::to_string(v.height) + "x" +
                                          std::to_string(v.depth));
  if (v.voxels.size() != v.voxel_count())
    fail(ErrorKind::payload_size_mismatch,
         "volume has " + std::to_string(v.voxels.size()) + " voxels, expected " +
             std::to_string(v.voxel_count()));
  for (float x : v.voxels) {
    if (v.modality == Modality::CT && !(x >= kMinHU && x <= kMaxHU))
      fail(ErrorKind::invalid_argument, "CT value " + std::to_string(x) + " outside [-1024, 3000]");
    if (v.modality == Modality::MR && !(x >= 0.0f))
      fail(ErrorKind::invalid_argument, "MR value " + std::to_string(x) + " is negative");
  }
}

}  // namespace agct::data
