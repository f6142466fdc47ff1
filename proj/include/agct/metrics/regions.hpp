#pragma once

#include <span>
#include <string>
#include <string_view>

#include "agct/data/morphology.hpp"
#include "agct/error.hpp"

namespace agct::metrics {

using data::Mask;

inline constexpr double kAirThresholdHU = -465.0;
inline constexpr double kBoneThresholdHU = 200.0;

struct RegionMasks {
  Mask head, air, bone, tissue;
};

/// Which CT decides region membership. With `either`, a voxel counts as air
/// (bone) if either CT puts it there; when the two disagree between air and
/// bone the real CT decides, so the regions still partition the head.
enum class RegionSource { real, either };

inline std::string_view to_string(RegionSource s) { return s == RegionSource::real ? "real" : "union"; }

inline RegionSource parse_region_source(std::string_view s) {
  if (s == "real") return RegionSource::real;
  if (s == "union") return RegionSource::either;
  fail(ErrorKind::invalid_argument, "unknown region source '" + std::string(s) + "' (real|union)");
}

inline RegionMasks region_masks(std::span<const float> real_ct, const Mask& head,
                                std::span<const float> syn_ct = {},
                                RegionSource source = RegionSource::real) {
  if (real_ct.size() != head.bits.size())
    fail(ErrorKind::shape_mismatch, "region_masks: CT and mask sizes differ");
  if (source == RegionSource::either && syn_ct.size() != real_ct.size())
    fail(ErrorKind::shape_mismatch, "region_masks: union mode needs a synthetic CT of equal size");
  if (head.empty()) fail(ErrorKind::empty_input, "region_masks: empty head mask");
  RegionMasks r{head, Mask(head.width, head.height), Mask(head.width, head.height),
                Mask(head.width, head.height)};
  for (std::size_t i = 0; i < real_ct.size(); ++i) {
    if (!head.bits[i]) continue;
    const bool real_air = real_ct[i] <= kAirThresholdHU, real_bone = real_ct[i] >= kBoneThresholdHU;
    bool air = real_air, bone = real_bone;
    if (source == RegionSource::either && !real_air && !real_bone) {
      air = syn_ct[i] <= kAirThresholdHU;
      bone = syn_ct[i] >= kBoneThresholdHU;
    }
    (air ? r.air : bone ? r.bone : r.tissue).bits[i] = 1;
  }
  return r;
}

}  // namespace agct::metrics
