#pragma once

// Volume-level pieces shared by the command line and the acceptance suite:
// synthesis of a whole MR volume, evaluation against a reference CT, training
// on a subject subset and the k-fold harness.

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "agct/data/dataset.hpp"
#include "agct/gan/attention.hpp"
#include "agct/gan/trainer.hpp"
#include "agct/io/checkpoint.hpp"
#include "agct/metrics/report.hpp"
#include "agct/nn/upsample.hpp"

namespace agct::cli {

struct SynthesisResult {
  data::Volume synct;                                       // HU, -1000 outside the head
  std::vector<std::optional<data::Mask>> masks;             // per slice, from the MR
  std::vector<std::optional<std::vector<float>>> attention;  // per slice, image-sized, [0,1]
};

/// Runs the generator slice by slice over an MR volume.
inline SynthesisResult synthesize_volume(gan::Models<float>& models, const data::Volume& mr,
                                         bool keep_attention = false) {
  if (mr.modality != data::Modality::MR)
    fail(ErrorKind::invalid_argument, "input volume '" + mr.subject_id + "' is not an MR volume");
  if (mr.width != models.config.width || mr.height != models.config.height)
    fail(ErrorKind::shape_mismatch,
         "input slices are " + std::to_string(mr.width) + "x" + std::to_string(mr.height) +
             " but the model expects " + std::to_string(models.config.width) + "x" +
             std::to_string(models.config.height));
  NoGradGuard no_grad;
  models.set_training(false);
  SynthesisResult out;
  out.synct = mr;
  out.synct.modality = data::Modality::CT;
  std::fill(out.synct.voxels.begin(), out.synct.voxels.end(), data::kAirHU);
  out.masks = data::volume_masks(mr);
  out.attention.resize(mr.depth);
  const double p = data::mr_scale(mr);
  const std::size_t n = mr.slice_size();
  for (std::size_t z = 0; z < mr.depth; ++z) {
    if (!out.masks[z]) continue;
    std::vector<double> m = data::normalize_mr(mr.slice(z), p);
    data::apply_mask(m, *out.masks[z]);
    const auto input = data::slice_tensor<float>(m, mr.width, mr.height);
    const auto gen = gan::generate(models, input);
    const auto hu = data::denormalize_ct<float>(gen.synct.values());
    for (std::size_t i = 0; i < n; ++i)
      if (out.masks[z]->bits[i]) out.synct.voxels[z * n + i] = hu[i];
    if (keep_attention && models.config.kind == gan::ModelKind::attention_gan) {
      const auto up = nn::bilinear_upsample(gen.attention.weights, mr.height, mr.width);
      out.attention[z] = std::vector<float>(up.values().begin(), up.values().end());
    }
  }
  return out;
}

/// MR intensities pushed through the CT de-normalization: the reference
/// point a learned mapping has to beat.
inline data::Volume identity_baseline(const data::Volume& mr) {
  data::Volume out = mr;
  out.modality = data::Modality::CT;
  const auto masks = data::volume_masks(mr);
  const double p = data::mr_scale(mr);
  const std::size_t n = mr.slice_size();
  for (std::size_t z = 0; z < mr.depth; ++z) {
    std::vector<double> m = data::normalize_mr(mr.slice(z), p);
    if (masks[z]) data::apply_mask(m, *masks[z]);
    else std::fill(m.begin(), m.end(), -1.0);
    for (std::size_t i = 0; i < n; ++i)
      out.voxels[z * n + i] = static_cast<float>(data::denormalize_hu(m[i]));
  }
  return out;
}

inline std::vector<data::Mask> dense_masks(const std::vector<std::optional<data::Mask>>& masks) {
  std::vector<data::Mask> out;
  for (const auto& m : masks) out.push_back(m ? *m : data::Mask());
  return out;
}

/// Head mask from a CT slice alone: the air threshold followed by the same
/// morphology as the MR head mask.
inline data::Mask ct_head_mask(std::span<const float> ct, std::size_t w, std::size_t h) {
  data::Mask m(w, h);
  for (std::size_t i = 0; i < ct.size(); ++i) m.bits[i] = ct[i] > metrics::kAirThresholdHU;
  if (m.empty()) return m;
  return data::fill_holes(data::largest_component(data::closing(m, data::kHeadMorphRadius)));
}

inline std::vector<data::Mask> ct_head_masks(const data::Volume& ct) {
  std::vector<data::Mask> out;
  for (std::size_t z = 0; z < ct.depth; ++z) out.push_back(ct_head_mask(ct.slice(z), ct.width, ct.height));
  return out;
}

inline std::size_t evaluation_threads() {
  const char* env = std::getenv("AGCT_THREADS");
  if (!env) return 1;
  try {
    const long v = std::stol(env);
    return v >= 1 ? static_cast<std::size_t>(v) : 1;
  } catch (const std::exception&) {
    return 1;
  }
}

inline std::string describe_epoch(const gan::EpochStats& s) {
  std::string line = "epoch " + std::to_string(s.epoch) + " L1 " + metrics::format_number(s.l1) +
                     " L_F " + metrics::format_number(s.loss_f);
  if (s.loss_d) line += " L_D " + metrics::format_number(*s.loss_d);
  if (s.adv) line += " adv " + metrics::format_number(*s.adv);
  return line + " (" + metrics::format_number(std::round(s.seconds * 100) / 100) + " s)";
}

struct FoldResult {
  std::size_t fold = 0;  // 1-based
  std::vector<std::string> test_subjects;
  std::vector<metrics::MetricsReport> reports;
  gan::TrainHistory history;
};

struct CrossvalResult {
  gan::ModelKind kind;
  std::vector<FoldResult> folds;
};

/// Per-fold summary: the mean of each field over the fold's test subjects.
inline metrics::MetricsReport fold_summary(const FoldResult& f) {
  const auto agg = metrics::aggregate(f.reports);
  metrics::MetricsReport r;
  r.subject_id = "fold" + std::to_string(f.fold);
  auto get = [&](const std::string& k) -> std::optional<double> {
    const auto& s = agg.at(k);
    if (s.count) return s.mean;
    if (s.excluded) return std::numeric_limits<double>::infinity();
    return std::nullopt;
  };
  r.mae_full = get("mae_full").value_or(0);
  r.mae_air = get("mae_air");
  r.mae_bone = get("mae_bone");
  r.mae_tissue = get("mae_tissue");
  r.psnr = get("psnr").value_or(0);
  r.ssim = get("ssim").value_or(0);
  auto count = [&](const std::string& k) { return static_cast<std::size_t>(std::lround(agg.at(k).mean)); };
  r.voxels_head = count("voxels_head");
  r.voxels_air = count("voxels_air");
  r.voxels_bone = count("voxels_bone");
  r.voxels_tissue = count("voxels_tissue");
  return r;
}

/// Evaluates one trained model on the given subjects; with AGCT_THREADS > 1
/// the subjects are split across workers, each with its own model copy.
inline std::vector<metrics::MetricsReport> evaluate_subjects(
    gan::Models<float>& models, const std::map<std::string, data::SubjectFiles>& files,
    const std::vector<std::string>& ids, metrics::RegionSource source) {
  std::vector<metrics::MetricsReport> reports(ids.size());
  auto work = [&](gan::Models<float>& m, std::size_t begin, std::size_t step) {
    for (std::size_t i = begin; i < ids.size(); i += step) {
      const auto& f = files.at(ids[i]);
      const data::Volume mr = data::read_volume(f.mr), ct = data::read_volume(f.ct);
      const auto syn = synthesize_volume(m, mr);
      reports[i] = metrics::evaluate(ct, syn.synct, dense_masks(syn.masks), source);
    }
  };
  const std::size_t threads = std::min(evaluation_threads(), std::max<std::size_t>(ids.size(), 1));
  if (threads <= 1) {
    work(models, 0, 1);
    return reports;
  }
  std::vector<gan::Models<float>> copies;
  for (std::size_t t = 0; t < threads; ++t) copies.push_back(models.clone());
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t)
    pool.emplace_back([&, t] {
      try {
        work(copies[t], t, threads);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return reports;
}

/// k-fold cross validation of one model kind over the dataset in `root`.
/// Every fold trains a fresh model from the same seed.
inline CrossvalResult crossval(const std::filesystem::path& root, std::size_t k,
                               const gan::ModelConfig& base_model, const gan::TrainConfig& base_train,
                               metrics::RegionSource source = metrics::RegionSource::real,
                               const data::Logger& log = data::log_to_stderr) {
  const auto files = data::discover_subjects(root);
  std::vector<std::string> ids;
  for (const auto& [id, f] : files) ids.push_back(id);
  const metrics::FoldSpec spec = metrics::kfold(ids, k, base_train.seed);
  CrossvalResult result{base_model.kind, {}};
  for (std::size_t fold = 0; fold < k; ++fold) {
    std::set<std::string> train_ids;
    for (std::size_t j = 0; j < k; ++j)
      if (j != fold) train_ids.insert(spec.folds[j].begin(), spec.folds[j].end());
    if (train_ids.empty())
      fail(ErrorKind::invalid_argument, "cross validation needs at least two folds");
    const auto pairs = data::dataset_slices<float>(root, train_ids, log);
    gan::Trainer<float> trainer(base_model, base_train);
    FoldResult fr;
    fr.fold = fold + 1;
    fr.test_subjects = spec.folds[fold];
    const std::string tag = std::string(gan::to_string(base_model.kind)) + " fold " + std::to_string(fold + 1);
    fr.history = gan::train<float>(trainer, pairs, [&](const gan::EpochStats& s, gan::Trainer<float>&) {
      if (log) log(tag + ": " + describe_epoch(s));
    });
    fr.reports = evaluate_subjects(trainer.models(), files, fr.test_subjects, source);
    result.folds.push_back(std::move(fr));
  }
  return result;
}

/// Table-style summary over models: per model one row per fold plus mean
/// and sd rows, with the MAE, PSNR and SSIM columns.
inline std::string crossval_summary_csv(const std::vector<CrossvalResult>& results) {
  static const std::vector<std::string> cols = {"mae_full", "mae_air", "mae_bone", "mae_tissue", "psnr", "ssim"};
  std::string out = "model,row";
  for (const auto& c : cols) out += "," + c;
  out += "\n";
  for (const auto& r : results) {
    std::vector<metrics::MetricsReport> folds;
    for (const auto& f : r.folds) folds.push_back(fold_summary(f));
    const std::string model(gan::to_string(r.kind));
    for (const auto& f : folds) {
      out += model + "," + f.subject_id;
      for (const auto& c : cols) out += "," + metrics::format_field(metrics::report_field(f, c));
      out += "\n";
    }
    const auto agg = metrics::aggregate(folds);
    for (const char* row : {"mean", "sd"}) {
      out += model + "," + row;
      for (const auto& c : cols) {
        const auto& s = agg.at(c);
        out += "," + (s.count ? metrics::format_number(row[0] == 'm' ? s.mean : s.sd) : std::string());
      }
      out += "\n";
    }
  }
  return out;
}

inline nlohmann::json crossval_summary_json(const std::vector<CrossvalResult>& results) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& r : results) {
    std::vector<metrics::MetricsReport> folds;
    nlohmann::json per_fold = nlohmann::json::array();
    for (const auto& f : r.folds) {
      folds.push_back(fold_summary(f));
      nlohmann::json fj = metrics::report_json(folds.back());
      fj["test_subjects"] = f.test_subjects;
      per_fold.push_back(fj);
    }
    nlohmann::json m = metrics::aggregate_json(metrics::aggregate(folds));
    m["folds"] = per_fold;
    j[std::string(gan::to_string(r.kind))] = m;
  }
  return j;
}

}  // namespace agct::cli
