#pragma once

// Paired pseudo-MR / pseudo-CT head phantoms. Anatomy is a stack of nested
// ellipses (scalp, skull ring, brain) with ventricles and air cavities; an
// optional surgical defect replaces an arc of the skull with soft tissue.
// MR contrast makes bone and air equally dark, so they can only be told
// apart from context.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "agct/data/volume.hpp"
#include "agct/error.hpp"

namespace agct::data {

enum class Tissue : std::uint8_t { background, scalp, skull, brain, ventricle, cavity, defect };

inline constexpr float kAirHU = -1000.0f;
inline constexpr float kSoftTissueHU = 40.0f;
inline constexpr float kBoneHU = 1000.0f;
inline constexpr float kVentricleHU = 10.0f;

inline float tissue_hu(Tissue t) {
  switch (t) {
    case Tissue::background:
    case Tissue::cavity: return kAirHU;
    case Tissue::skull: return kBoneHU;
    case Tissue::ventricle: return kVentricleHU;
    case Tissue::scalp:
    case Tissue::brain:
    case Tissue::defect: return kSoftTissueHU;
  }
  return kAirHU;
}

// Noise-free MR signal before the bias field.
inline float tissue_mr(Tissue t) {
  switch (t) {
    case Tissue::background:
    case Tissue::cavity: return 0.0f;
    case Tissue::skull: return 5.0f;
    case Tissue::scalp: return 115.0f;
    case Tissue::brain: return 100.0f;
    case Tissue::defect: return 110.0f;
    case Tissue::ventricle: return 160.0f;
  }
  return 0.0f;
}

struct PhantomParams {
  std::size_t size = 64;
  std::size_t subjects = 10;
  std::size_t slices = 8;
  double anomaly_rate = 0.2;
  double noise = 0.02;  // MR noise std as a fraction of brain signal (CT gets 25 HU per unit)
  double bias = 0.1;    // amplitude of the multiplicative MR bias field (log domain)
  std::uint64_t seed = 0;

  void validate() const {
    if (size == 0 || size % 8 != 0)
      fail(ErrorKind::invalid_argument,
           "phantom size " + std::to_string(size) + " must be a positive multiple of 8");
    if (size < 16) fail(ErrorKind::invalid_argument, "phantom size must be >= 16");
    if (subjects == 0 || slices == 0)
      fail(ErrorKind::invalid_argument, "phantom needs at least one subject and one slice");
    if (!(anomaly_rate >= 0.0 && anomaly_rate <= 1.0))
      fail(ErrorKind::invalid_argument, "anomaly rate must be within [0,1]");
    if (!(noise >= 0.0)) fail(ErrorKind::invalid_argument, "noise must be >= 0");
    if (!(bias >= 0.0)) fail(ErrorKind::invalid_argument, "bias must be >= 0");
  }
};

struct Ellipse {
  double cx = 0, cy = 0, a = 1, b = 1, theta = 0;

  // Coordinates in the ellipse frame, scaled so the boundary is radius 1.
  std::array<double, 2> local(double x, double y) const {
    const double dx = x - cx, dy = y - cy;
    const double c = std::cos(theta), s = std::sin(theta);
    return {(c * dx + s * dy) / a, (-s * dx + c * dy) / b};
  }
  bool contains(double x, double y) const {
    const auto [u, v] = local(x, y);
    return u * u + v * v <= 1.0;
  }
  Ellipse shrunk(double t) const { return {cx, cy, a - t, b - t, theta}; }
  Ellipse scaled(double f) const { return {cx, cy, a * f, b * f, theta}; }
};

/// Per-subject anatomy, in pixel units at the central slice.
struct SubjectGeometry {
  Ellipse head;
  double scalp_thickness = 0;
  double skull_thickness = 0;
  std::vector<Ellipse> ventricles;  // offsets relative to the head centre
  std::vector<Ellipse> cavities;
  bool defect = false;
  double defect_start = 0;  // radians, ellipse frame
  double defect_width = 0;
  std::array<double, 3> bias_coeff{0, 0, 0};
};

struct PhantomSubject {
  Volume mr;
  Volume ct;
  std::vector<Tissue> labels;  // per voxel
  SubjectGeometry geometry;

  /// Generating head raster of slice z (every non-background voxel).
  std::vector<std::uint8_t> head_raster(std::size_t z) const {
    const std::size_t n = mr.slice_size();
    std::vector<std::uint8_t> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = labels[z * n + i] != Tissue::background;
    return out;
  }
};

inline std::string subject_name(std::size_t index) {
  std::string digits = std::to_string(index);
  if (digits.size() < 3) digits.insert(0, 3 - digits.size(), '0');
  return "subj" + digits;
}

namespace internal {

inline double angle_in_frame(const Ellipse& e, double x, double y) {
  const auto [u, v] = e.local(x, y);
  double t = std::atan2(v, u);
  if (t < 0) t += 2 * std::numbers::pi;
  return t;
}

inline bool angle_in_arc(double t, double start, double width) {
  double d = t - start;
  while (d < 0) d += 2 * std::numbers::pi;
  while (d >= 2 * std::numbers::pi) d -= 2 * std::numbers::pi;
  return d <= width;
}

inline SubjectGeometry draw_geometry(const PhantomParams& p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto uni = [&](double lo, double hi) { return lo + (hi - lo) * u01(rng); };
  const double n = static_cast<double>(p.size);
  SubjectGeometry g;
  const double centre = (n - 1) / 2.0;
  g.head = {centre + uni(-0.02, 0.02) * n, centre + uni(-0.02, 0.02) * n, uni(0.34, 0.40) * n,
            uni(0.28, 0.34) * n, uni(-0.25, 0.25)};
  g.scalp_thickness = std::max(2.0, uni(0.05, 0.07) * n);
  // The skull is dark in MR. The head mask has to bridge it by closing with
  // radius 2, so no more than 4 pixel centres may fall across the ring.
  g.skull_thickness = std::clamp(uni(0.04, 0.06) * n, 2.0, 3.5);

  const std::size_t n_vent = u01(rng) < 0.5 ? 1 : 2;
  for (std::size_t i = 0; i < n_vent; ++i) {
    const double side = n_vent == 1 ? 0.0 : (i == 0 ? -1.0 : 1.0);
    g.ventricles.push_back({side * uni(0.04, 0.07) * n, uni(-0.03, 0.03) * n, uni(0.05, 0.08) * n,
                            uni(0.025, 0.04) * n, uni(-0.4, 0.4)});
  }
  const std::size_t n_cav = 1 + static_cast<std::size_t>(u01(rng) * 3.0 - 1e-9);
  for (std::size_t i = 0; i < n_cav; ++i) {
    const double phi = uni(0.0, 2 * std::numbers::pi);
    const double r = uni(0.45, 0.65);
    g.cavities.push_back({r * std::cos(phi), r * std::sin(phi), uni(0.04, 0.07) * n,
                          uni(0.03, 0.05) * n, uni(0.0, std::numbers::pi)});
  }
  g.defect = u01(rng) < p.anomaly_rate;
  g.defect_start = uni(0.0, 2 * std::numbers::pi);
  g.defect_width = uni(0.5, 1.0);
  for (double& c : g.bias_coeff) c = uni(-1.0, 1.0);
  return g;
}

}  // namespace internal

/// Tissue label of pixel (x, y) at slice scale factor `f`.
inline Tissue phantom_label(const SubjectGeometry& g, double f, double x, double y) {
  const Ellipse head = g.head.scaled(f);
  if (!head.contains(x, y)) return Tissue::background;
  const Ellipse skull_outer = head.shrunk(g.scalp_thickness);
  if (!skull_outer.contains(x, y)) return Tissue::scalp;
  const Ellipse skull_inner = skull_outer.shrunk(g.skull_thickness);
  if (!skull_inner.contains(x, y)) {
    if (g.defect && internal::angle_in_arc(internal::angle_in_frame(head, x, y), g.defect_start,
                                           g.defect_width))
      return Tissue::defect;
    return Tissue::skull;
  }
  // Cavity centres are given as fractions of the inner semi-axes, so they
  // follow the skull and may touch its inner surface, like sinuses.
  for (const Ellipse& c : g.cavities) {
    const double c0 = std::cos(skull_inner.theta), s0 = std::sin(skull_inner.theta);
    const double lx = c.cx * skull_inner.a, ly = c.cy * skull_inner.b;
    const Ellipse placed{skull_inner.cx + c0 * lx - s0 * ly, skull_inner.cy + s0 * lx + c0 * ly,
                         c.a * f, c.b * f, c.theta};
    if (placed.contains(x, y)) return Tissue::cavity;
  }
  for (const Ellipse& v : g.ventricles) {
    const Ellipse placed{head.cx + v.cx * f, head.cy + v.cy * f, v.a * f, v.b * f,
                         v.theta + head.theta};
    if (placed.contains(x, y)) return Tissue::ventricle;
  }
  return Tissue::brain;
}

/// Slice scale factor: the head narrows towards the ends of the stack.
inline double slice_scale(std::size_t z, std::size_t depth) {
  if (depth <= 1) return 1.0;
  const double mid = static_cast<double>(depth - 1) / 2.0;
  const double t = (static_cast<double>(z) - mid) / mid;
  return 1.0 - 0.12 * t * t;
}

inline PhantomSubject generate_subject(const PhantomParams& p, std::size_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(p.seed), static_cast<std::uint32_t>(p.seed >> 32),
                    static_cast<std::uint32_t>(index), 0x9a17u};
  std::mt19937_64 rng(seq);
  PhantomSubject s;
  s.geometry = internal::draw_geometry(p, rng);

  const std::size_t n = p.size;
  const double pixel_mm = 230.0 / static_cast<double>(n);
  for (Volume* v : {&s.mr, &s.ct}) {
    v->width = v->height = n;
    v->depth = p.slices;
    v->spacing = {pixel_mm, pixel_mm, 1.25};
    v->subject_id = subject_name(index);
    v->voxels.assign(n * n * p.slices, 0.0f);
  }
  s.mr.modality = Modality::MR;
  s.ct.modality = Modality::CT;
  s.labels.assign(n * n * p.slices, Tissue::background);

  std::normal_distribution<double> gauss(0.0, 1.0);
  const double half = static_cast<double>(n - 1) / 2.0;
  for (std::size_t z = 0; z < p.slices; ++z) {
    const double f = slice_scale(z, p.slices);
    for (std::size_t y = 0; y < n; ++y)
      for (std::size_t x = 0; x < n; ++x) {
        const double xd = static_cast<double>(x), yd = static_cast<double>(y);
        const Tissue t = phantom_label(s.geometry, f, xd, yd);
        const std::size_t i = (z * n + y) * n + x;
        s.labels[i] = t;
        const double u = (xd - half) / half, v = (yd - half) / half;
        const auto& c = s.geometry.bias_coeff;
        const double field = std::exp(p.bias * (c[0] * u + c[1] * v + c[2] * u * v));
        double mr = tissue_mr(t) * field;
        double ct = tissue_hu(t);
        if (p.noise > 0) {
          mr += gauss(rng) * p.noise * 100.0;
          ct += gauss(rng) * p.noise * 25.0;
        }
        s.mr.voxels[i] = static_cast<float>(std::max(0.0, mr));
        s.ct.voxels[i] = static_cast<float>(
            std::clamp(ct, static_cast<double>(kMinHU), static_cast<double>(kMaxHU)));
      }
  }
  return s;
}

/// Subjects are independent streams seeded from (seed, index), so any
/// subset can be regenerated, and generated in parallel, without changing
/// the others.
inline std::vector<PhantomSubject> generate_phantom(const PhantomParams& p) {
  p.validate();
  std::vector<PhantomSubject> out;
  out.reserve(p.subjects);
  for (std::size_t i = 0; i < p.subjects; ++i) out.push_back(generate_subject(p, i));
  return out;
}

}  // namespace agct::data
