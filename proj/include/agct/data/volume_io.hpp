#pragma once

// <name>.vol.json header plus <name>.vol.raw payload of float32 LE voxels.

#include <filesystem>
#include <string>

#include "agct/data/volume.hpp"
#include "agct/io/binary.hpp"
#include "json.hpp"

namespace agct::data {

inline constexpr int kVolumeFormatVersion = 1;

struct VolumePaths {
  std::filesystem::path header;
  std::filesystem::path payload;
};

/// Accepts the stem ("dir/name") or either file of the pair.
inline VolumePaths volume_paths(const std::filesystem::path& path) {
  std::string s = path.string();
  for (const char* suffix : {".vol.json", ".vol.raw"}) {
    const std::string suf(suffix);
    if (s.size() > suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0) {
      s.resize(s.size() - suf.size());
      break;
    }
  }
  return {s + ".vol.json", s + ".vol.raw"};
}

inline nlohmann::json volume_header(const Volume& v) {
  return {{"format_version", kVolumeFormatVersion},
          {"width", v.width},
          {"height", v.height},
          {"depth", v.depth},
          {"spacing", {v.spacing[0], v.spacing[1], v.spacing[2]}},
          {"modality", std::string(to_string(v.modality))},
          {"subject_id", v.subject_id}};
}

inline void write_volume(const Volume& v, const std::filesystem::path& path) {
  validate(v);
  const VolumePaths p = volume_paths(path);
  io::ByteWriter w;
  w.f32_array(v.voxels);
  io::write_file(p.payload, w.bytes());
  io::write_text_file(p.header, volume_header(v).dump(2) + "\n");
}

/// Header only; payload is not touched.
inline Volume read_volume_header(const std::filesystem::path& path) {
  const VolumePaths p = volume_paths(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_text_file(p.header));
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::malformed_header, "malformed header '" + p.header.string() + "': " + e.what());
  }
  Volume v;
  try {
    if (!j.is_object()) throw std::runtime_error("header is not a JSON object");
    const auto version = j.at("format_version").get<long long>();
    if (version != kVolumeFormatVersion)
      fail(ErrorKind::unknown_version, "unknown volume format version " + std::to_string(version) +
                                           " in '" + p.header.string() + "'");
    const auto dim = [&](const char* key) {
      const auto x = j.at(key).get<long long>();
      if (x <= 0) throw std::runtime_error(std::string(key) + " must be positive");
      return static_cast<std::size_t>(x);
    };
    v.width = dim("width");
    v.height = dim("height");
    v.depth = dim("depth");
    const auto& sp = j.at("spacing");
    if (!sp.is_array() || sp.size() != 3) throw std::runtime_error("spacing must have 3 entries");
    for (std::size_t i = 0; i < 3; ++i) v.spacing[i] = sp[i].get<double>();
    v.modality = parse_modality(j.at("modality").get<std::string>());
    v.subject_id = j.at("subject_id").get<std::string>();
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    fail(ErrorKind::malformed_header, "malformed header '" + p.header.string() + "': " + e.what());
  }
  return v;
}

inline Volume read_volume(const std::filesystem::path& path) {
  Volume v = read_volume_header(path);
  const VolumePaths p = volume_paths(path);
  const auto bytes = io::read_file(p.payload);
  const std::size_t expected = v.voxel_count() * 4;
  if (bytes.size() != expected)
    fail(ErrorKind::payload_size_mismatch, "payload size mismatch for '" + p.payload.string() +
                                               "': expected " + std::to_string(expected) +
                                               " bytes, found " + std::to_string(bytes.size()));
  io::ByteReader r(bytes, ErrorKind::payload_size_mismatch);
  r.f32_array(v.voxel_count(), v.voxels);
  validate(v);
  return v;
}

}  // namespace agct::data
