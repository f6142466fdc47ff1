#pragma once

// Subcommands of the `agct` tool. Exit codes: 0 success, 2 usage error,
// 1 runtime error.

#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "agct/cli/pipeline.hpp"
#include "agct/data/phantom.hpp"
#include "agct/io/pgm.hpp"

namespace agct::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

struct PhantomOptions {
  data::PhantomParams params;
  std::string out;
};

struct TrainOptions {
  std::string data, out, model = "attention-gan", inference_norm = "batch";
  std::string resume, history;
  std::vector<std::string> subjects;
  std::size_t epochs = 200, base_width = 64, residual_blocks = 4, attention_layer = 3;
  std::size_t checkpoint_every = 0;
  double lr = 2e-4, lambda = 10.0;
  std::uint64_t seed = 0;
};

struct InferOptions {
  std::string ckpt, input, out, dump_attention, panels, ref;
};

struct EvalOptions {
  std::string pred, ref, report, format = "csv", mr, region_source = "real";
};

struct CrossvalOptions {
  TrainOptions train;
  std::size_t folds = 5;
  std::vector<std::string> models{"attention-gan", "gan", "cnn"};
  std::string region_source = "real";
};

namespace internal {

inline void add_model_flags(CLI::App* c, TrainOptions& o) {
  c->add_option("--epochs", o.epochs, "Training epochs")->capture_default_str()->check(CLI::PositiveNumber);
  c->add_option("--lr", o.lr, "ADAM learning rate")->capture_default_str()->check(CLI::PositiveNumber);
  c->add_option("--lambda", o.lambda, "Weight of the L1 term")->capture_default_str()->check(CLI::NonNegativeNumber);
  c->add_option("--seed", o.seed, "Seed for initialization and shuffling")->capture_default_str();
  c->add_option("--base-width", o.base_width, "Channels of the first layer of G and D")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  c->add_option("--residual-blocks", o.residual_blocks, "Residual blocks in each of encoder and decoder")
      ->capture_default_str();
  c->add_option("--attention-layer", o.attention_layer, "Discriminator layer the attention map is read from")
      ->capture_default_str()
      ->check(CLI::Range(1, 6));
  c->add_option("--inference-norm", o.inference_norm,
                "Batch-norm statistics at inference: batch (per slice) or running")
      ->capture_default_str()
      ->check(CLI::IsMember({"batch", "running"}));
}

inline std::pair<gan::ModelConfig, gan::TrainConfig> configs(const TrainOptions& o, gan::ModelKind kind,
                                                             std::size_t h, std::size_t w) {
  gan::ModelConfig m;
  m.kind = kind;
  m.height = h;
  m.width = w;
  m.base_width = o.base_width;
  m.residual_blocks = o.residual_blocks;
  m.attention_layer = o.attention_layer;
  m.inference_norm = gan::parse_inference_norm(o.inference_norm);
  m.validate();
  gan::TrainConfig t;
  t.kind = kind;
  t.epochs = o.epochs;
  t.learning_rate = o.lr;
  t.lambda = o.lambda;
  t.seed = o.seed;
  t.checkpoint_every = o.checkpoint_every;
  t.validate();
  return {m, t};
}

inline std::optional<std::set<std::string>> subject_filter(const std::vector<std::string>& ids) {
  if (ids.empty()) return std::nullopt;
  return std::set<std::string>(ids.begin(), ids.end());
}

inline std::string slice_tag(const std::string& subject, std::size_t z) {
  std::string digits = std::to_string(z);
  if (digits.size() < 3) digits.insert(0, 3 - digits.size(), '0');
  return subject + "_z" + digits;
}

}  // namespace internal

inline void run_phantom(const PhantomOptions& o, std::ostream& out) {
  const auto subjects = data::generate_phantom(o.params);
  data::write_phantom_dataset(subjects, o.out);
  out << "wrote " << subjects.size() * 2 << " volumes (" << subjects.size() << " subjects, "
      << o.params.slices << " slices of " << o.params.size << "x" << o.params.size << ") to "
      << o.out << '\n';
}

inline void run_train(const TrainOptions& o, std::ostream& out) {
  const auto pairs = data::dataset_slices<float>(o.data, internal::subject_filter(o.subjects));
  if (pairs.empty()) fail(ErrorKind::empty_input, "no usable slices in '" + o.data + "'");
  const std::size_t h = pairs.front().mr.dim(2), w = pairs.front().mr.dim(3);
  std::optional<gan::Trainer<float>> trainer;
  if (!o.resume.empty()) {
    trainer.emplace(io::restore_trainer(io::read_checkpoint(o.resume), o.epochs));
    if (trainer->models().config.height != h || trainer->models().config.width != w)
      fail(ErrorKind::shape_mismatch, "checkpoint '" + o.resume + "' was trained on a different slice size");
    out << "resuming from epoch " << trainer->epochs_completed() << '\n';
  } else {
    const auto kind = gan::parse_model_kind(o.model);
    auto [m, t] = internal::configs(o, kind, h, w);
    trainer.emplace(m, t);
  }
  std::string history = "epoch,loss_d,adv,loss_f,l1,seconds\n";
  auto on_epoch = [&](const gan::EpochStats& s, gan::Trainer<float>& tr) {
    out << describe_epoch(s) << std::endl;
    history += std::to_string(s.epoch) + "," + metrics::format_field(s.loss_d) + "," +
               metrics::format_field(s.adv) + "," + metrics::format_number(s.loss_f) + "," +
               metrics::format_number(s.l1) + "," + metrics::format_number(s.seconds) + "\n";
    const std::size_t every = tr.config().checkpoint_every;
    if (every && s.epoch % every == 0 && s.epoch != tr.config().epochs)
      io::write_checkpoint(io::make_checkpoint(tr), o.out);
  };
  gan::train<float>(*trainer, pairs, on_epoch);
  io::write_checkpoint(io::make_checkpoint(*trainer), o.out);
  if (!o.history.empty()) io::write_text_file(o.history, history);
  out << "trained " << gan::to_string(trainer->models().config.kind) << " on " << pairs.size()
      << " slices for " << trainer->epochs_completed() << " epochs; checkpoint " << o.out << '\n';
}

inline void run_infer(const InferOptions& o, std::ostream& out) {
  gan::Models<float> models = io::restore_models(io::read_checkpoint(o.ckpt));
  if (!o.dump_attention.empty() && models.config.kind != gan::ModelKind::attention_gan)
    fail(ErrorKind::usage, "--dump-attention needs an attention-gan checkpoint, but '" + o.ckpt +
                               "' holds a " + std::string(gan::to_string(models.config.kind)) +
                               " model, which has no attention map");
  const data::Volume mr = data::read_volume(o.input);
  const bool want_attention = !o.dump_attention.empty() || !o.panels.empty();
  const SynthesisResult syn = synthesize_volume(models, mr, want_attention);
  data::write_volume(syn.synct, o.out);
  out << "wrote synthetic CT " << data::volume_paths(o.out).header.string() << '\n';

  std::optional<data::Volume> ref;
  if (!o.ref.empty()) {
    ref = data::read_volume(o.ref);
    if (ref->width != mr.width || ref->height != mr.height || ref->depth != mr.depth)
      fail(ErrorKind::shape_mismatch, "dimension mismatch between --input and --ref");
  }
  std::size_t dumped = 0;
  for (std::size_t z = 0; z < mr.depth; ++z) {
    const std::string tag = internal::slice_tag(mr.subject_id, z);
    if (!o.dump_attention.empty() && syn.attention[z]) {
      io::write_pgm(io::unit_panel(*syn.attention[z], mr.width, mr.height),
                    std::filesystem::path(o.dump_attention) / (tag + "_attention.pgm"));
      ++dumped;
    }
    if (!o.panels.empty() && syn.masks[z]) {
      io::PanelSet p;
      p.width = mr.width;
      p.height = mr.height;
      std::vector<double> m = data::normalize_mr(mr.slice(z), data::mr_scale(mr));
      data::apply_mask(m, *syn.masks[z]);
      p.mr.assign(m.begin(), m.end());
      const auto s = syn.synct.slice(z);
      p.synct.assign(s.begin(), s.end());
      if (ref) p.real_ct = std::vector<float>(ref->slice(z).begin(), ref->slice(z).end());
      p.attention = syn.attention[z];
      io::emit_panels(p, o.panels, tag);
    }
  }
  if (!o.dump_attention.empty()) out << "wrote " << dumped << " attention maps to " << o.dump_attention << '\n';
}

inline void run_eval(const EvalOptions& o, std::ostream& out) {
  const data::Volume pred = data::read_volume(o.pred), ref = data::read_volume(o.ref);
  const auto source = metrics::parse_region_source(o.region_source);
  std::vector<data::Mask> masks;
  if (!o.mr.empty()) {
    const data::Volume mr = data::read_volume(o.mr);
    if (mr.width != ref.width || mr.height != ref.height || mr.depth != ref.depth)
      fail(ErrorKind::shape_mismatch, "dimension mismatch between --mr and --ref");
    masks = dense_masks(data::volume_masks(mr));
  } else {
    masks = ct_head_masks(ref);
  }
  const metrics::MetricsReport rep = metrics::evaluate(ref, pred, masks, source);
  if (o.format == "json") io::write_text_file(o.report, metrics::reports_json({rep}).dump(2) + "\n");
  else io::write_text_file(o.report, metrics::report_csv({rep}));
  out << rep.subject_id << ": MAE " << metrics::format_number(rep.mae_full) << " HU, PSNR "
      << metrics::format_number(rep.psnr) << " dB, SSIM " << metrics::format_number(rep.ssim) << '\n';
}

inline void run_crossval(const CrossvalOptions& o, std::ostream& out) {
  const auto source = metrics::parse_region_source(o.region_source);
  const auto files = data::discover_subjects(o.train.data);
  const auto first = data::read_volume_header(files.begin()->second.mr);
  std::vector<CrossvalResult> results;
  const std::filesystem::path dir = o.train.out;
  for (const auto& name : o.models) {
    const auto kind = gan::parse_model_kind(name);
    auto [m, t] = internal::configs(o.train, kind, first.height, first.width);
    CrossvalResult r = crossval(o.train.data, o.folds, m, t, source,
                                [&](const std::string& msg) { out << msg << std::endl; });
    for (const auto& f : r.folds) {
      const auto base = dir / std::string(gan::to_string(kind)) / ("fold" + std::to_string(f.fold));
      io::write_text_file(base.string() + ".csv", metrics::report_csv(f.reports));
      io::write_text_file(base.string() + ".json", metrics::reports_json(f.reports).dump(2) + "\n");
    }
    results.push_back(std::move(r));
  }
  io::write_text_file(dir / "summary.csv", crossval_summary_csv(results));
  io::write_text_file(dir / "summary.json", crossval_summary_json(results).dump(2) + "\n");
  out << crossval_summary_csv(results);
}

/// Parses and runs one command. Messages go to `out`, diagnostics to `err`.
inline int dispatch(int argc, const char* const* argv, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
  CLI::App app{"Attention-guided MR-to-CT synthesis on procedural head phantoms", "agct"};
  app.require_subcommand(1);
  app.fallthrough(false);

  PhantomOptions ph;
  auto* phantom = app.add_subcommand("phantom", "Procedural phantom data");
  phantom->require_subcommand(1);
  auto* gen = phantom->add_subcommand("gen", "Generate paired MR/CT phantom volumes");
  gen->add_option("--subjects", ph.params.subjects, "Number of subjects")->capture_default_str()->check(CLI::PositiveNumber);
  gen->add_option("--slices", ph.params.slices, "Slices per volume")->capture_default_str()->check(CLI::PositiveNumber);
  gen->add_option("--size", ph.params.size, "Slice width and height (multiple of 8)")->capture_default_str();
  gen->add_option("--seed", ph.params.seed, "Generator seed")->capture_default_str();
  gen->add_option("--anomaly-rate", ph.params.anomaly_rate, "Probability of a skull defect per subject")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  gen->add_option("--noise", ph.params.noise, "MR noise std relative to brain signal")->capture_default_str();
  gen->add_option("--bias", ph.params.bias, "Amplitude of the MR bias field")->capture_default_str();
  gen->add_option("--out", ph.out, "Output directory")->required();

  TrainOptions tr;
  auto* train = app.add_subcommand("train", "Train a model on a phantom dataset");
  train->add_option("--data", tr.data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  train->add_option("--model", tr.model, "Model kind")->capture_default_str()->check(
      CLI::IsMember({"attention-gan", "gan", "cnn"}));
  train->add_option("--out", tr.out, "Checkpoint path")->required();
  internal::add_model_flags(train, tr);
  train->add_option("--checkpoint-every", tr.checkpoint_every, "Also checkpoint every N epochs (0: only at the end)")
      ->capture_default_str();
  train->add_option("--resume", tr.resume, "Continue from this checkpoint")->check(CLI::ExistingFile);
  train->add_option("--history", tr.history, "Write per-epoch losses as CSV");
  train->add_option("--subjects", tr.subjects, "Train on these subject ids only")->delimiter(',');

  InferOptions in;
  auto* infer = app.add_subcommand("infer", "Synthesize a CT volume from an MR volume");
  infer->add_option("--ckpt", in.ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  infer->add_option("--input", in.input, "MR volume (.vol.json)")->required();
  infer->add_option("--out", in.out, "Output CT volume name")->required();
  infer->add_option("--dump-attention", in.dump_attention, "Write per-slice attention maps (PGM) here");
  infer->add_option("--panels", in.panels, "Write per-slice MR/synCT panels (PGM) here");
  infer->add_option("--ref", in.ref, "Reference CT for the ct and diff panels");

  EvalOptions ev;
  auto* eval = app.add_subcommand("eval", "Compare a synthetic CT with a reference CT");
  eval->add_option("--pred", ev.pred, "Synthetic CT volume")->required();
  eval->add_option("--ref", ev.ref, "Reference CT volume")->required();
  eval->add_option("--report", ev.report, "Report path")->required();
  eval->add_option("--format", ev.format, "Report format")->capture_default_str()->check(CLI::IsMember({"csv", "json"}));
  eval->add_option("--mr", ev.mr, "MR volume for the head mask (default: derived from the reference CT)");
  eval->add_option("--region-source", ev.region_source, "CT defining the air/bone regions: real or union")
      ->capture_default_str()
      ->check(CLI::IsMember({"real", "union"}));

  CrossvalOptions cv;
  auto* cross = app.add_subcommand("crossval", "k-fold cross validation of one or more model kinds");
  cross->add_option("--data", cv.train.data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  cross->add_option("--folds", cv.folds, "Number of folds")->capture_default_str()->check(CLI::PositiveNumber);
  cross->add_option("--model", cv.models, "Comma-separated model kinds")
      ->delimiter(',')
      ->capture_default_str()
      ->check(CLI::IsMember({"attention-gan", "gan", "cnn"}));
  cross->add_option("--out", cv.train.out, "Output directory for reports")->required();
  cross->add_option("--region-source", cv.region_source, "CT defining the air/bone regions: real or union")
      ->capture_default_str()
      ->check(CLI::IsMember({"real", "union"}));
  internal::add_model_flags(cross, cv.train);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen->parsed()) run_phantom(ph, out);
    else if (train->parsed()) run_train(tr, out);
    else if (infer->parsed()) run_infer(in, out);
    else if (eval->parsed()) run_eval(ev, out);
    else if (cross->parsed()) run_crossval(cv, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.kind() == ErrorKind::usage ? kExitUsage : kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

inline int dispatch(const std::vector<std::string>& args, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
  std::vector<const char*> argv{"agct"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace agct::cli
