#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "agct/data/volume.hpp"
#include "agct/metrics/image_metrics.hpp"
#include "agct/metrics/regions.hpp"
#include "json.hpp"

namespace agct::metrics {

struct MetricsReport {
  std::string subject_id;
  double mae_full = 0;
  std::optional<double> mae_air, mae_bone, mae_tissue;  // absent when the region is empty
  double psnr = 0;                                      // may be +inf
  double ssim = 0;
  std::size_t voxels_head = 0, voxels_air = 0, voxels_bone = 0, voxels_tissue = 0;
};

/// Column order of every report file.
inline const std::array<std::string, 10> kReportFields = {
    "mae_full", "mae_air",     "mae_bone",   "mae_tissue",  "psnr",
    "ssim",     "voxels_head", "voxels_air", "voxels_bone", "voxels_tissue"};

inline std::optional<double> report_field(const MetricsReport& r, const std::string& name) {
  if (name == "mae_full") return r.mae_full;
  if (name == "mae_air") return r.mae_air;
  if (name == "mae_bone") return r.mae_bone;
  if (name == "mae_tissue") return r.mae_tissue;
  if (name == "psnr") return r.psnr;
  if (name == "ssim") return r.ssim;
  if (name == "voxels_head") return static_cast<double>(r.voxels_head);
  if (name == "voxels_air") return static_cast<double>(r.voxels_air);
  if (name == "voxels_bone") return static_cast<double>(r.voxels_bone);
  if (name == "voxels_tissue") return static_cast<double>(r.voxels_tissue);
  fail(ErrorKind::invalid_argument, "unknown report field '" + name + "'");
}

/// Metrics of one slice or one pooled volume given as a flat grid.
inline MetricsReport evaluate_grid(std::span<const float> real, std::span<const float> syn,
                                   const Mask& head, const std::string& subject_id = {},
                                   RegionSource source = RegionSource::real) {
  if (real.size() != syn.size())
    fail(ErrorKind::shape_mismatch, "dimension mismatch between real and synthetic CT");
  const RegionMasks regions = region_masks(real, head, syn, source);
  MetricsReport r;
  r.subject_id = subject_id;
  r.mae_full = mae(real, syn, head);
  r.psnr = psnr(real, syn, head);
  r.ssim = ssim(real, syn, head);
  r.voxels_head = head.count();
  r.voxels_air = regions.air.count();
  r.voxels_bone = regions.bone.count();
  r.voxels_tissue = regions.tissue.count();
  if (r.voxels_air) r.mae_air = mae(real, syn, regions.air);
  if (r.voxels_bone) r.mae_bone = mae(real, syn, regions.bone);
  if (r.voxels_tissue) r.mae_tissue = mae(real, syn, regions.tissue);
  return r;
}

/// Pools the masked voxels of every slice. `head_masks` has one mask per
/// slice; slices without a head carry an empty mask.
inline MetricsReport evaluate(const data::Volume& real, const data::Volume& syn,
                              const std::vector<Mask>& head_masks,
                              RegionSource source = RegionSource::real) {
  if (real.width != syn.width || real.height != syn.height || real.depth != syn.depth)
    fail(ErrorKind::shape_mismatch,
         "dimension mismatch: reference is " + std::to_string(real.width) + "x" +
             std::to_string(real.height) + "x" + std::to_string(real.depth) + ", prediction is " +
             std::to_string(syn.width) + "x" + std::to_string(syn.height) + "x" +
             std::to_string(syn.depth));
  if (head_masks.size() != real.depth)
    fail(ErrorKind::shape_mismatch, "evaluate needs one head mask per slice");
  Mask pooled(real.width, real.height * real.depth);
  const std::size_t n = real.slice_size();
  for (std::size_t z = 0; z < real.depth; ++z) {
    const Mask& m = head_masks[z];
    if (m.bits.empty()) continue;
    if (m.width != real.width || m.height != real.height)
      fail(ErrorKind::shape_mismatch, "head mask of slice " + std::to_string(z) + " has wrong size");
    std::copy(m.bits.begin(), m.bits.end(), pooled.bits.begin() + static_cast<std::ptrdiff_t>(z * n));
  }
  return evaluate_grid(real.voxels, syn.voxels, pooled, real.subject_id, source);
}

struct FoldSpec {
  std::size_t k = 0;
  std::vector<std::vector<std::string>> folds;  // each fold sorted
};

/// Fisher-Yates shuffle driven by the raw 64-bit engine output, so the
/// assignment does not depend on the standard library's distributions.
inline FoldSpec kfold(std::vector<std::string> ids, std::size_t k, std::uint64_t seed) {
  if (k == 0) fail(ErrorKind::invalid_argument, "fold count must be >= 1");
  if (k > ids.size())
    fail(ErrorKind::invalid_argument, "cannot split " + std::to_string(ids.size()) +
                                          " subjects into " + std::to_string(k) + " folds");
  std::sort(ids.begin(), ids.end());
  std::mt19937_64 rng(seed);
  for (std::size_t i = ids.size(); i > 1; --i) std::swap(ids[i - 1], ids[rng() % i]);
  FoldSpec spec{k, std::vector<std::vector<std::string>>(k)};
  for (std::size_t i = 0; i < ids.size(); ++i) spec.folds[i % k].push_back(ids[i]);
  for (auto& f : spec.folds) std::sort(f.begin(), f.end());
  return spec;
}

struct FieldStats {
  double mean = 0;
  double sd = 0;
  std::size_t count = 0;     // values that entered mean and SD
  std::size_t excluded = 0;  // infinite values left out
  std::size_t missing = 0;   // absent values (empty region)
};

using Aggregate = std::map<std::string, FieldStats>;

/// Mean and population SD per field. Reports are summed in subject-id order
/// so the result does not depend on evaluation order.
inline Aggregate aggregate(std::vector<MetricsReport> reports) {
  if (reports.empty()) fail(ErrorKind::empty_input, "aggregate of an empty report list");
  std::stable_sort(reports.begin(), reports.end(),
                   [](const auto& a, const auto& b) { return a.subject_id < b.subject_id; });
  Aggregate out;
  for (const auto& field : kReportFields) {
    FieldStats s;
    std::vector<double> v;
    for (const auto& r : reports) {
      const auto x = report_field(r, field);
      if (!x) ++s.missing;
      else if (std::isinf(*x)) ++s.excluded;
      else v.push_back(*x);
    }
    s.count = v.size();
    if (!v.empty()) {
      double sum = 0;
      for (double x : v) sum += x;
      s.mean = sum / static_cast<double>(v.size());
      double ss = 0;
      for (double x : v) ss += (x - s.mean) * (x - s.mean);
      s.sd = std::sqrt(ss / static_cast<double>(v.size()));
    } else {
      s.mean = s.sd = std::nan("");
    }
    out[field] = s;
  }
  return out;
}

/// Shortest round-trip decimal; "inf", "-inf" and "nan" spelled out.
inline std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline std::string format_field(const std::optional<double>& x) {
  return x ? format_number(*x) : std::string();
}

inline nlohmann::json json_number(const std::optional<double>& x) {
  if (!x || std::isnan(*x)) return nullptr;
  if (std::isinf(*x)) return *x > 0 ? "inf" : "-inf";
  return *x;
}

/// One row per subject, then "mean" and "sd" rows.
inline std::string report_csv(const std::vector<MetricsReport>& reports) {
  std::ostringstream os;
  os << "subject";
  for (const auto& f : kReportFields) os << ',' << f;
  os << '\n';
  for (const auto& r : reports) {
    os << r.subject_id;
    for (const auto& f : kReportFields) os << ',' << format_field(report_field(r, f));
    os << '\n';
  }
  const Aggregate agg = aggregate(reports);
  for (const char* row : {"mean", "sd"}) {
    os << row;
    for (const auto& f : kReportFields) {
      const auto& s = agg.at(f);
      os << ',' << format_field(s.count ? std::optional(row[0] == 'm' ? s.mean : s.sd) : std::nullopt);
    }
    os << '\n';
  }
  return os.str();
}

inline nlohmann::json report_json(const MetricsReport& r) {
  nlohmann::json j;
  j["subject"] = r.subject_id;
  for (const auto& f : kReportFields) j[f] = json_number(report_field(r, f));
  return j;
}

inline nlohmann::json aggregate_json(const Aggregate& agg) {
  nlohmann::json mean, sd, excluded;
  for (const auto& f : kReportFields) {
    const auto& s = agg.at(f);
    mean[f] = s.count ? json_number(s.mean) : nullptr;
    sd[f] = s.count ? json_number(s.sd) : nullptr;
    excluded[f] = s.excluded;
  }
  return {{"mean", mean}, {"sd", sd}, {"excluded_infinite", excluded}};
}

/// JSON mirror of the CSV: same field names, plus the count of infinite
/// values left out of each mean.
inline nlohmann::json reports_json(const std::vector<MetricsReport>& reports) {
  nlohmann::json j;
  j["fields"] = kReportFields;
  j["subjects"] = nlohmann::json::array();
  for (const auto& r : reports) j["subjects"].push_back(report_json(r));
  const nlohmann::json agg = aggregate_json(aggregate(reports));
  for (const auto& [key, value] : agg.items()) j[key] = value;
  return j;
}

}  // namespace agct::metrics
