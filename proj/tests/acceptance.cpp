// Acceptance suite: one pass/fail line per criterion. Pass criterion numbers
// as arguments to run a subset, e.g. `agct_acceptance 1 4`.

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "agct/cli/commands.hpp"
#include "agct/cli/pipeline.hpp"
#include "agct/grad_check.hpp"
#include "agct/nn/activation.hpp"
#include "agct/nn/batch_norm.hpp"
#include "agct/nn/conv.hpp"
#include "agct/nn/residual.hpp"
#include "agct/nn/upsample.hpp"
#include "test_util.hpp"

namespace {

using agct::Tensor;
using agct::make_tensor;
using agct::testing::random_tensor;
using agct::testing::random_values;
using agct::testing::TempDir;
namespace gan = agct::gan;
namespace data = agct::data;
namespace metrics = agct::metrics;
namespace nn = agct::nn;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
  void note(const std::string& s) { detail += (detail.empty() ? "" : "; ") + s; }
};

std::string num(double x) { return metrics::format_number(x); }

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

template <class T>
std::vector<Tensor<T>> tensors_of(const agct::ParameterSet<T>& ps) {
  std::vector<Tensor<T>> out;
  for (const auto& p : ps) out.push_back(p.tensor);
  return out;
}

gan::ModelConfig model_config(gan::ModelKind kind, std::size_t size, std::size_t base,
                              std::size_t blocks = 4) {
  gan::ModelConfig c;
  c.kind = kind;
  c.height = c.width = size;
  c.base_width = base;
  c.residual_blocks = blocks;
  return c;
}

// ---------------------------------------------------------------------------
// 1. Finite-difference checks of every layer and of both loss pipelines.

Outcome gradient_correctness() {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  double worst = 0;
  auto check = [&](const std::string& name, const std::function<Tensor<double>()>& f,
                   std::vector<Tensor<double>> inputs, std::size_t per_input = 0) {
    agct::GradCheckOptions opt;
    opt.eps = 1e-4;
    opt.max_elements_per_input = per_input;
    const auto r = agct::grad_check<double>(f, std::move(inputs), opt);
    worst = std::max(worst, r.max_relative_error);
    o.require(r.max_relative_error < 1e-4 && r.checked > 0,
              name + " relative error " + num(r.max_relative_error));
  };

  auto conv = [](agct::Shape ws, std::size_t cout, std::size_t stride, std::size_t pad, std::uint64_t seed) {
    std::size_t n = 1;
    for (auto d : ws) n *= d;
    return nn::Conv2dParams<double>{make_tensor<double>(ws, random_values<double>(n, seed), true),
                                    make_tensor<double>({cout}, random_values<double>(cout, seed + 1), true),
                                    stride, pad};
  };
  {
    auto x = random_tensor<double>({2, 2, 6, 6}, 11, -1, 1, true);
    auto p = conv({3, 2, 4, 4}, 3, 2, 1, 12);
    check("conv2d", [&] { return agct::mean(agct::square(nn::conv2d(x, p))); }, {x, p.weight, p.bias});
  }
  {
    auto x = random_tensor<double>({1, 3, 4, 4}, 21, -1, 1, true);
    auto p = conv({3, 2, 4, 4}, 2, 2, 1, 22);
    check("conv_transpose2d", [&] { return agct::mean(agct::square(nn::conv_transpose2d(x, p))); },
          {x, p.weight, p.bias});
  }
  {
    auto bn = nn::make_batch_norm<double>(2);
    bn.scale = make_tensor<double>({2}, {1.3, -0.7}, true);
    bn.shift = make_tensor<double>({2}, {0.2, 0.1}, true);
    auto x = random_tensor<double>({1, 2, 3, 3}, 41, -1, 1, true);
    auto w = random_tensor<double>({1, 2, 3, 3}, 42);
    check("batch_norm (batch statistics)", [&] { return agct::sum(agct::mul(nn::batch_norm(x, bn), w)); },
          {x, bn.scale, bn.shift});
    bn.mode = nn::NormMode::eval;
    bn.running_mean = {0.3, -0.2};
    bn.running_var = {0.5, 2.0};
    check("batch_norm (running statistics)", [&] { return agct::sum(agct::square(nn::batch_norm(x, bn))); },
          {x, bn.scale, bn.shift});
  }
  {
    auto x = random_tensor<double>({1, 2, 5, 5}, 51, -1, 1, true);
    auto w = random_tensor<double>({1, 2, 5, 5}, 52);
    check("relu", [&] { return agct::sum(agct::mul(nn::relu(x), w)); }, {x});
    check("tanh", [&] { return agct::sum(agct::mul(nn::tanh(x), w)); }, {x});
  }
  {
    auto x = random_tensor<double>({1, 2, 3, 3}, 53, -1, 1, true);
    auto w = random_tensor<double>({1, 2, 7, 5}, 54);
    check("bilinear_upsample", [&] { return agct::sum(agct::mul(nn::bilinear_upsample(x, 7, 5), w)); }, {x});
  }
  {
    auto x = random_tensor<double>({1, 1, 4, 4}, 55, -1, 1, true);
    auto a = random_tensor<double>({1, 1, 4, 4}, 56, 0, 1);
    check("attention product", [&] { return agct::sum(agct::square(agct::mul(x, a))); }, {x});
  }
  {
    nn::Rng rng(4);
    auto block = nn::make_residual_block<double>(4, 3, rng);
    for (auto* c : {&block.conv1, &block.conv2}) {
      auto v = random_values<double>(c->weight.numel(), 70 + c->weight.numel(), -0.3, 0.3);
      std::copy(v.begin(), v.end(), c->weight.mutable_values().begin());
    }
    auto x = random_tensor<double>({1, 4, 8, 8}, 71, -1, 1, true);
    auto w = random_tensor<double>({1, 4, 8, 8}, 72);
    check("residual block", [&] { return agct::mean(agct::mul(nn::residual_block(x, block), w)); },
          {x, block.conv1.weight, block.conv1.bias, block.norm1.scale, block.norm1.shift,
           block.conv2.weight, block.conv2.bias, block.norm2.scale, block.norm2.shift},
          60);
  }

  // Pipelines. Loss values are scaled by 1e-2: biases feeding a batch norm
  // in training mode have exactly zero gradient, and one ulp of an O(1) loss
  // over 2*eps would otherwise exceed the 1e-8 relative-error floor.
  constexpr double s = 1e-2;
  {
    auto m = gan::build_models<double>(model_config(gan::ModelKind::gan, 64, 2), 13);
    m.set_training(true);
    auto ct = random_tensor<double>({1, 1, 64, 64}, 6), syn = random_tensor<double>({1, 1, 64, 64}, 7);
    check("discriminator loss pipeline",
          [&] { return agct::scale(gan::loss_d(*m.discriminator, ct, syn), s); },
          tensors_of(m.discriminator->parameters()), 16);
  }
  {
    auto m = gan::build_models<double>(model_config(gan::ModelKind::attention_gan, 64, 2), 13);
    m.set_training(true);
    auto mr = random_tensor<double>({1, 1, 64, 64}, 5), ct = random_tensor<double>({1, 1, 64, 64}, 6);
    const auto att = gan::generate(m, mr).attention;
    m.discriminator->set_requires_grad(false);
    check("generator loss pipeline (attention, adversarial + L1)",
          [&] {
            auto syn = m.generator.forward(mr, &att.weights);
            return agct::scale(gan::loss_g(*m.discriminator, syn, ct, 10.0).total, s);
          },
          tensors_of(m.generator.parameters()), 16);
  }
  {
    auto m = gan::build_models<double>(model_config(gan::ModelKind::cnn, 32, 2), 13);
    m.set_training(true);
    auto mr = random_tensor<double>({1, 1, 32, 32}, 5), ct = random_tensor<double>({1, 1, 32, 32}, 6);
    check("generator L1 pipeline", [&] { return agct::scale(gan::l1_loss(ct, m.generator.forward(mr)), s); },
          tensors_of(m.generator.parameters()), 16);
  }
  const double t = seconds_since(start);
  o.require(t < 300, "runtime " + num(t) + " s exceeds 5 min");
  o.note("worst relative error " + num(worst) + ", " + num(std::round(t)) + " s");
  return o;
}

// ---------------------------------------------------------------------------
// 2. Attention against an explicit per-pixel channel loop.

Outcome attention_oracle() {
  Outcome o;
  std::mt19937_64 rng(2024);
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng() % 2, c = 1 + rng() % 32, h = 2 + rng() % 9, w = 2 + rng() % 9;
    auto a = random_tensor<double>({n, c, h, w}, 1000 + trial, -2, 2);
    const auto att = gan::extract_attention<double>({a}, 1, h, w);
    const auto v = a.values();
    for (std::size_t b = 0; b < n; ++b) {
      std::vector<double> raw(h * w, 0.0);
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
          for (std::size_t ch = 0; ch < c; ++ch) raw[y * w + x] += std::fabs(v[((b * c + ch) * h + y) * w + x]);
      const double mn = *std::min_element(raw.begin(), raw.end()), mx = *std::max_element(raw.begin(), raw.end());
      for (std::size_t p = 0; p < h * w; ++p) {
        const double got = att.weights[b * h * w + p];
        worst = std::max(worst, std::fabs(got - (raw[p] - mn) / (mx - mn)));
        if (!(got >= 0 && got <= 1)) o.require(false, "weight outside [0,1] in trial " + std::to_string(trial));
      }
    }
    const auto up = gan::extract_attention<double>({a}, 1, 2 * h + 1, 3 * w);
    for (double x : up.weights.values())
      if (!(x >= 0 && x <= 1)) o.require(false, "upsampled weight outside [0,1]");
  }
  o.require(worst <= 1e-6, "max deviation " + num(worst));
  const auto constant = gan::extract_attention<double>({agct::full<double>({1, 8, 4, 4}, 0.7)}, 1, 8, 8);
  bool ones = constant.fallback[0];
  for (double x : constant.weights.values()) ones = ones && x == 1.0;
  o.require(ones, "constant activations did not fall back to ones");
  o.note("100 sets, max deviation " + num(worst));
  return o;
}

// ---------------------------------------------------------------------------
// 3. Closed-form loss values with a scripted discriminator.

Outcome loss_identities() {
  Outcome o;
  double worst = 0;
  auto expect = [&](double got, double want, const std::string& what) {
    worst = std::max(worst, std::fabs(got - want));
    o.require(std::fabs(got - want) <= 1e-7, what + " = " + num(got) + ", expected " + num(want));
  };
  auto scores = [](std::vector<double> v) { const std::size_t n = v.size(); return make_tensor<double>({n}, std::move(v)); };
  expect(gan::lsgan_discriminator(scores({1}), scores({0})).item(), 0.0, "L_D(1,0)");
  expect(gan::lsgan_discriminator(scores({0}), scores({1})).item(), 1.0, "L_D(0,1)");
  expect(gan::lsgan_discriminator(scores({0.5}), scores({0.5})).item(), 0.25, "L_D(0.5,0.5)");
  expect(gan::lsgan_discriminator(scores({0.9, 0.7}), scores({0.2, -0.4})).item(),
         0.5 * ((0.01 + 0.09) / 2 + (0.04 + 0.16) / 2), "L_D batch");
  expect(gan::lsgan_generator(scores({0})).item(), 0.5, "L_adv(0)");
  expect(gan::lsgan_generator(scores({1})).item(), 0.0, "L_adv(1)");

  // A discriminator whose last layer is zero with bias c scores every image c.
  auto m = gan::build_models<double>(model_config(gan::ModelKind::gan, 48, 2), 3);
  m.set_training(true);
  for (const double c : {0.3, -0.6, 1.4}) {
    for (auto& p : m.discriminator->parameters()) {
      if (p.name == "D.layer6.weight") for (double& v : p.tensor.mutable_values()) v = 0;
      if (p.name == "D.layer6.bias") p.tensor.mutable_values()[0] = c;
    }
    auto ct = random_tensor<double>({1, 1, 48, 48}, 31), syn = random_tensor<double>({1, 1, 48, 48}, 32);
    double l1 = 0;
    for (std::size_t i = 0; i < ct.numel(); ++i) l1 += std::fabs(ct[i] - syn[i]);
    l1 /= static_cast<double>(ct.numel());
    expect(gan::loss_d(*m.discriminator, ct, syn).item(), 0.5 * ((c - 1) * (c - 1) + c * c), "loss_d, c=" + num(c));
    const auto lg = gan::loss_g(*m.discriminator, syn, ct, 10.0);
    expect(lg.adv.item(), 0.5 * (c - 1) * (c - 1), "adversarial term, c=" + num(c));
    expect(lg.l1.item(), l1, "L1 term");
    expect(lg.total.item(), 0.5 * (c - 1) * (c - 1) + 10.0 * l1, "L_F with lambda 10, c=" + num(c));
  }
  o.note("max deviation " + num(worst));
  return o;
}

// ---------------------------------------------------------------------------
// 4. Metrics against brute-force loops.

Outcome metric_oracles() {
  Outcome o;
  double worst = 0;
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<float> hu(-1000, 2000), noise(-200, 200);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t w = 32, h = 32;
    std::vector<float> a(w * h), b(w * h);
    data::Mask m(w, h);
    for (std::size_t i = 0; i < w * h; ++i) {
      a[i] = hu(rng);
      b[i] = a[i] + noise(rng);
      m.bits[i] = rng() % 3 != 0;
    }
    m.bits[0] = 1;
    std::vector<std::pair<double, double>> v;
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        if (m(x, y)) v.emplace_back(a[y * w + x], b[y * w + x]);
    const double n = static_cast<double>(v.size());
    double sa = 0, sd = 0, q = -1e300, ma = 0, mb = 0;
    for (auto [x, y] : v) {
      sa += std::fabs(x - y);
      sd += (x - y) * (x - y);
      q = std::max({q, x, y});
      ma += x;
      mb += y;
    }
    ma /= n;
    mb /= n;
    double va = 0, vb = 0, cv = 0;
    for (auto [x, y] : v) {
      va += (x - ma) * (x - ma);
      vb += (y - mb) * (y - mb);
      cv += (x - ma) * (y - mb);
    }
    va /= n;
    vb /= n;
    cv /= n;
    const double c1 = (0.01 * q) * (0.01 * q), c2 = (0.02 * q) * (0.02 * q);
    const double want_mae = sa / n, want_psnr = 10 * std::log10(q * q / (sd / n));
    const double want_ssim = (2 * ma * mb + c1) * (2 * cv + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    worst = std::max({worst, std::fabs(metrics::mae(a, b, m) - want_mae),
                      std::fabs(metrics::psnr(a, b, m) - want_psnr),
                      std::fabs(metrics::ssim(a, b, m) - want_ssim)});
    if (trial < 10) {
      o.require(metrics::mae(a, a, m) == 0.0, "MAE(a,a) != 0");
      o.require(metrics::ssim(a, a, m) == 1.0, "SSIM(a,a) != 1");
      o.require(std::isinf(metrics::psnr(a, a, m)) && metrics::format_number(metrics::psnr(a, a, m)) == "inf",
                "PSNR(a,a) is not the inf sentinel");
    }
  }
  o.require(worst <= 1e-9, "max deviation " + num(worst));
  o.note("100 pairs, max deviation " + num(worst));
  return o;
}

// ---------------------------------------------------------------------------
// 5. Regions on phantoms.

Outcome region_partition() {
  Outcome o;
  std::size_t slices = 0, noisy_slices = 0;
  for (double noise : {0.0, 0.05}) {
    data::PhantomParams p;
    p.subjects = 10;
    p.slices = 8;
    p.noise = noise;
    p.bias = noise > 0 ? 0.2 : 0.0;
    p.anomaly_rate = 0.5;
    p.seed = 5;
    for (const auto& s : data::generate_phantom(p))
      for (std::size_t z = 0; z < s.ct.depth; ++z) {
        const auto head = data::head_mask(s.mr.slice(z), s.mr.width, s.mr.height);
        const auto r = metrics::region_masks(s.ct.slice(z), head);
        o.require(r.air.count() + r.bone.count() + r.tissue.count() == head.count(),
                  "partition broken for " + s.ct.subject_id);
        if (noise > 0) {
          ++noisy_slices;
          continue;
        }
        ++slices;
        const std::size_t n = s.ct.slice_size();
        bool exact = head.bits == s.head_raster(z);
        for (std::size_t i = 0; i < n; ++i) {
          const auto t = s.labels[z * n + i];
          exact = exact && r.air.bits[i] == (t == data::Tissue::cavity) && r.bone.bits[i] == (t == data::Tissue::skull);
        }
        o.require(exact, "regions differ from rasters in " + s.ct.subject_id + " slice " + std::to_string(z));
      }
  }
  o.note(std::to_string(slices) + " noiseless slices exact, partition on " +
         std::to_string(slices + noisy_slices) + " slices");
  return o;
}

// ---------------------------------------------------------------------------
// 6. Smoke training on phantoms.

Outcome smoke_training() {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  data::PhantomParams p;
  p.subjects = 12;  // 10 for training, 2 held out
  p.slices = 8;
  p.size = 64;
  p.seed = 1;
  const auto subjects = data::generate_phantom(p);
  std::vector<data::SlicePair<float>> pairs;
  for (std::size_t i = 0; i < 10; ++i)
    for (auto& sp : data::subject_slices<float>(subjects[i].mr, subjects[i].ct, {})) pairs.push_back(std::move(sp));

  gan::ModelConfig mc = model_config(gan::ModelKind::attention_gan, 64, 64);
  gan::TrainConfig tc;
  tc.kind = mc.kind;
  tc.epochs = 30;
  tc.learning_rate = 2e-4;
  tc.lambda = 10.0;
  tc.batch_size = 1;
  tc.seed = 1;
  gan::Trainer<float> trainer(mc, tc);
  const auto history = gan::train<float>(trainer, pairs, [](const gan::EpochStats& s, gan::Trainer<float>&) {
    if (s.epoch == 1 || s.epoch % 5 == 0) std::cerr << "  [6] " << agct::cli::describe_epoch(s) << '\n';
  });
  const double l1_first = history.front().l1, l1_last = history.back().l1;
  o.require(l1_last <= 0.5 * l1_first, "epoch-30 L1 " + num(l1_last) + " > 50% of epoch-1 L1 " + num(l1_first));

  double model_mae = 0, identity_mae = 0;
  for (std::size_t i = 10; i < 12; ++i) {
    const auto& s = subjects[i];
    const auto syn = agct::cli::synthesize_volume(trainer.models(), s.mr);
    const auto masks = agct::cli::dense_masks(syn.masks);
    model_mae += metrics::evaluate(s.ct, syn.synct, masks).mae_full / 2;
    identity_mae += metrics::evaluate(s.ct, agct::cli::identity_baseline(s.mr), masks).mae_full / 2;
  }
  o.require(model_mae < identity_mae,
            "held-out MAE " + num(model_mae) + " HU not below identity baseline " + num(identity_mae));
  const double t = seconds_since(start);
  o.require(t < 1800, "runtime " + num(t) + " s exceeds 30 min");
  o.note("L1 " + num(l1_first) + " -> " + num(l1_last) + ", held-out MAE " + num(std::round(model_mae * 100) / 100) +
         " HU vs identity " + num(std::round(identity_mae * 100) / 100) + " HU, " + num(std::round(t)) + " s");
  return o;
}

// ---------------------------------------------------------------------------
// 7. Five-fold comparison of the three model kinds through the CLI.

Outcome comparative_harness() {
  Outcome o;
  TempDir dir("acceptance-crossval");
  std::ostringstream out, err;
  auto run = [&](const std::vector<std::string>& args) { return agct::cli::dispatch(args, out, err); };
  o.require(run({"phantom", "gen", "--subjects", "15", "--slices", "8", "--size", "64", "--seed", "3",
                 "--out", (dir / "data").string()}) == 0,
            "phantom gen failed: " + err.str());
  const int code = run({"crossval", "--data", (dir / "data").string(), "--folds", "5", "--model",
                        "attention-gan,gan,cnn", "--epochs", "5", "--base-width", "16", "--residual-blocks", "2",
                        "--seed", "3", "--out", (dir / "cv").string()});
  o.require(code == 0, "crossval exited " + std::to_string(code) + ": " + err.str());
  if (!o.pass) return o;
  const std::string summary = agct::io::read_text_file(dir / "cv/summary.csv");
  std::istringstream is(summary);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(is, line)) lines.push_back(line);
  o.require(!lines.empty() && lines[0] == "model,row,mae_full,mae_air,mae_bone,mae_tissue,psnr,ssim",
            "unexpected summary header");
  std::map<std::string, std::vector<std::string>> mean_rows;
  for (const auto& l : lines) {
    std::vector<std::string> cells;
    std::stringstream ss(l);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() >= 2 && cells[1] == "mean") mean_rows[cells[0]] = cells;
  }
  for (const char* m : {"attention-gan", "gan", "cnn"}) {
    o.require(mean_rows.count(m) == 1, std::string("no mean row for ") + m);
    for (int f = 1; f <= 5; ++f)
      o.require(std::filesystem::exists(dir / "cv" / m / ("fold" + std::to_string(f) + ".csv")),
                std::string("missing fold report for ") + m);
  }
  o.require(lines.size() == 1 + 3 * 7, "expected 7 rows per model");
  if (o.pass) {
    std::string table;
    for (const char* m : {"attention-gan", "gan", "cnn"}) {
      const auto& r = mean_rows[m];
      table += std::string(table.empty() ? "" : ", ") + m + " MAE " + num(std::round(std::stod(r[2]) * 10) / 10) +
               " (air " + (r[3].empty() ? "-" : num(std::round(std::stod(r[3]) * 10) / 10)) + ", bone " +
               (r[4].empty() ? "-" : num(std::round(std::stod(r[4]) * 10) / 10)) + ")";
    }
    o.note(table);
  }
  return o;
}

// ---------------------------------------------------------------------------
// 8. Determinism and persistence.

Outcome determinism_and_persistence() {
  Outcome o;
  auto trained = [] {
    data::PhantomParams p;
    p.subjects = 2;
    p.slices = 2;
    p.size = 48;
    p.seed = 4;
    std::vector<data::SlicePair<float>> pairs;
    for (const auto& s : data::generate_phantom(p))
      for (auto& sp : data::subject_slices<float>(s.mr, s.ct, {})) pairs.push_back(std::move(sp));
    gan::TrainConfig tc;
    tc.kind = gan::ModelKind::attention_gan;
    tc.epochs = 2;
    tc.seed = 11;
    gan::Trainer<float> t(model_config(tc.kind, 48, 8, 2), tc);
    gan::train<float>(t, pairs);
    return t;
  };
  auto a = trained(), b = trained();
  const auto bytes_a = agct::io::encode_checkpoint(agct::io::make_checkpoint(a));
  o.require(bytes_a == agct::io::encode_checkpoint(agct::io::make_checkpoint(b)),
            "identical seeds gave different checkpoints");

  TempDir dir("acceptance-persist");
  agct::io::write_checkpoint(agct::io::make_checkpoint(a), dir / "m.agck");
  o.require(agct::io::read_file(dir / "m.agck") == bytes_a, "checkpoint file differs from its encoding");
  const auto ck = agct::io::read_checkpoint(dir / "m.agck");
  o.require(agct::io::encode_checkpoint(ck) == bytes_a, "checkpoint does not round-trip bit-exactly");
  auto restored = agct::io::restore_models(ck);

  data::PhantomParams p;
  p.subjects = 1;
  p.slices = 3;
  p.size = 48;
  p.seed = 77;
  const auto s = data::generate_phantom(p)[0];
  const auto before = agct::cli::synthesize_volume(a.models(), s.mr).synct;
  const auto after = agct::cli::synthesize_volume(restored, s.mr).synct;
  o.require(std::memcmp(before.voxels.data(), after.voxels.data(), before.voxels.size() * 4) == 0,
            "inference after save/load is not bit-identical");

  data::write_volume(s.ct, dir / "v");
  const auto v = data::read_volume(dir / "v");
  o.require(v == s.ct && std::memcmp(v.voxels.data(), s.ct.voxels.data(), v.voxels.size() * 4) == 0,
            "volume does not round-trip bit-exactly");
  o.note("checkpoint " + std::to_string(bytes_a.size()) + " bytes, identical across runs");
  return o;
}

// ---------------------------------------------------------------------------
// 9. Shape contract.

Outcome shape_contract() {
  Outcome o;
  for (std::size_t size : {32u, 48u, 64u, 96u}) {
    // The discriminator needs at least 48x48, so 32 is checked on the cnn kind.
    const auto kind = size < 48 ? gan::ModelKind::cnn : gan::ModelKind::attention_gan;
    auto m = gan::build_models<float>(model_config(kind, size, 8, 1), 1);
    agct::NoGradGuard guard;
    const auto out = gan::generate(m, random_tensor<float>({1, 1, size, size}, 2, -1, 1)).synct;
    o.require(out.shape() == agct::Shape({1, 1, size, size}), "generator output at " + std::to_string(size));
    if (!m.discriminator) continue;
    const auto d = m.discriminator->discriminate(out);
    std::size_t h = size;
    for (std::size_t layer = 0; layer < 3; ++layer) h = (h + 2 * 1 - 4) / gan::kDiscriminatorStrides[layer] + 1;
    const agct::Shape expected{1, 4 * 8, h, h};
    o.require(d.activations[2].shape() == expected,
              "layer-3 activation " + agct::shape_string(d.activations[2].shape()) + " at " + std::to_string(size));
  }
  auto dflt = gan::build_models<float>(model_config(gan::ModelKind::attention_gan, 64, 64), 1);
  agct::NoGradGuard guard;
  const auto d = dflt.discriminator->discriminate(random_tensor<float>({1, 1, 64, 64}, 3, -1, 1));
  o.require(d.activations[2].shape() == agct::Shape({1, 256, 8, 8}), "default layer-3 shape");
  o.note("G preserves 32/48/64/96; D layer 3 is 256x8x8 at 64");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient correctness", gradient_correctness},
      {"attention oracle", attention_oracle},
      {"loss identities", loss_identities},
      {"metric oracles", metric_oracles},
      {"region partition", region_partition},
      {"smoke training", smoke_training},
      {"comparative harness", comparative_harness},
      {"determinism and persistence", determinism_and_persistence},
      {"shape contract", shape_contract},
  };
  std::set<std::size_t> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::stoul(argv[i]));
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!selected.empty() && !selected.count(i + 1)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failures += !o.pass;
    std::cout << "criterion " << i + 1 << " " << (o.pass ? "PASS" : "FAIL") << "  " << criteria[i].first
              << ": " << o.detail << std::endl;
  }
  return failures ? 1 : 0;
}
