#pragma once

#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "agct/data/morphology.hpp"
#include "agct/data/phantom.hpp"
#include "agct/data/preprocess.hpp"
#include "agct/data/volume.hpp"
#include "agct/data/volume_io.hpp"
#include "agct/tensor.hpp"

namespace agct::data {

template <class T>
struct SlicePair {
  Tensor<T> mr;  // [1,1,H,W] in [-1,1], -1 outside the head
  Tensor<T> ct;  // [1,1,H,W] in [-1,1], -1 outside the head
  Mask mask;
  std::string subject_id;
  std::size_t slice_index = 0;
};

using Logger = std::function<void(const std::string&)>;

inline void log_to_stderr(const std::string& msg) { std::cerr << msg << '\n'; }

inline void check_pair(const Volume& mr, const Volume& ct) {
  if (mr.modality != Modality::MR || ct.modality != Modality::CT)
    fail(ErrorKind::invalid_argument, "expected an MR and a CT volume for subject '" +
                                          mr.subject_id + "'");
  if (mr.width != ct.width || mr.height != ct.height || mr.depth != ct.depth)
    fail(ErrorKind::shape_mismatch, "MR and CT of subject '" + mr.subject_id +
                                        "' have different dimensions");
}

/// Head mask per MR slice; std::nullopt where no head is found.
inline std::vector<std::optional<Mask>> volume_masks(const Volume& mr) {
  std::vector<std::optional<Mask>> out;
  for (std::size_t z = 0; z < mr.depth; ++z) {
    try {
      out.push_back(head_mask(mr.slice(z), mr.width, mr.height));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::no_head_found) throw;
      out.push_back(std::nullopt);
    }
  }
  return out;
}

template <class T>
Tensor<T> slice_tensor(const std::vector<double>& v, std::size_t width, std::size_t height) {
  return make_tensor<T>({1, 1, height, width}, std::vector<T>(v.begin(), v.end()));
}

/// Masked, normalized slice pairs of one subject in slice order.
template <class T>
std::vector<SlicePair<T>> subject_slices(const Volume& mr, const Volume& ct,
                                         const Logger& log = log_to_stderr) {
  check_pair(mr, ct);
  const double p = mr_scale(mr);
  const auto masks = volume_masks(mr);
  std::vector<SlicePair<T>> out;
  for (std::size_t z = 0; z < mr.depth; ++z) {
    if (!masks[z]) {
      if (log) log("skipping " + mr.subject_id + " slice " + std::to_string(z) + ": no head found");
      continue;
    }
    std::vector<double> m = normalize_mr(mr.slice(z), p);
    std::vector<double> c = normalize_ct(ct.slice(z));
    apply_mask(m, *masks[z]);
    apply_mask(c, *masks[z]);
    out.push_back({slice_tensor<T>(m, mr.width, mr.height), slice_tensor<T>(c, mr.width, mr.height),
                   *masks[z], mr.subject_id, z});
  }
  return out;
}

struct SubjectFiles {
  std::filesystem::path mr;
  std::filesystem::path ct;
};

/// Pairs the volumes under `root` by subject id, sorted lexicographically.
inline std::map<std::string, SubjectFiles> discover_subjects(const std::filesystem::path& root) {
  if (!std::filesystem::is_directory(root))
    fail(ErrorKind::io, "data directory '" + root.string() + "' does not exist");
  std::vector<std::filesystem::path> headers;
  for (const auto& entry : std::filesystem::directory_iterator(root)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && name.size() > 9 &&
        name.compare(name.size() - 9, 9, ".vol.json") == 0)
      headers.push_back(entry.path());
  }
  std::sort(headers.begin(), headers.end());
  std::map<std::string, SubjectFiles> subjects;
  for (const auto& h : headers) {
    const Volume v = read_volume_header(h);
    auto& slot = subjects[v.subject_id];
    auto& target = v.modality == Modality::MR ? slot.mr : slot.ct;
    if (!target.empty())
      fail(ErrorKind::invalid_argument, "subject '" + v.subject_id + "' has more than one " +
                                            std::string(to_string(v.modality)) + " volume");
    target = h;
  }
  for (const auto& [id, files] : subjects)
    if (files.mr.empty() || files.ct.empty())
      fail(ErrorKind::invalid_argument, "subject '" + id + "' is missing its " +
                                            (files.mr.empty() ? "MR" : "CT") + " volume");
  if (subjects.empty()) fail(ErrorKind::empty_input, "no volumes found in '" + root.string() + "'");
  return subjects;
}

/// Writes `<subject>_mr` and `<subject>_ct` volume pairs into `dir`.
inline void write_phantom_dataset(const std::vector<PhantomSubject>& subjects,
                                  const std::filesystem::path& dir) {
  for (const auto& s : subjects) {
    write_volume(s.mr, dir / (s.mr.subject_id + "_mr"));
    write_volume(s.ct, dir / (s.ct.subject_id + "_ct"));
  }
}

/// All slice pairs under `root`, ordered by subject id then slice index.
/// With a filter only the listed subjects are loaded; unknown ids are errors.
template <class T>
std::vector<SlicePair<T>> dataset_slices(const std::filesystem::path& root,
                                         const std::optional<std::set<std::string>>& filter = {},
                                         const Logger& log = log_to_stderr) {
  const auto subjects = discover_subjects(root);
  if (filter)
    for (const auto& id : *filter)
      if (!subjects.count(id)) fail(ErrorKind::invalid_argument, "unknown subject '" + id + "'");
  std::vector<SlicePair<T>> out;
  for (const auto& [id, files] : subjects) {
    if (filter && !filter->count(id)) continue;
    auto pairs = subject_slices<T>(read_volume(files.mr), read_volume(files.ct), log);
    for (auto& p : pairs) out.push_back(std::move(p));
  }
  return out;
}

}  // namespace agct::data
