#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "agct/grad_check.hpp"
#include "agct/nn/activation.hpp"
#include "agct/nn/batch_norm.hpp"
#include "agct/nn/conv.hpp"
#include "agct/nn/init.hpp"
#include "agct/nn/residual.hpp"
#include "agct/nn/upsample.hpp"
#include "agct/ops.hpp"

namespace {

using agct::Tensor;
using agct::make_tensor;
namespace nn = agct::nn;

template <class T>
std::vector<T> random_values(std::size_t n, std::uint64_t seed, double lo = -1, double hi = 1) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<T> v(n);
  for (T& x : v) x = static_cast<T>(d(rng));
  return v;
}

template <class T>
nn::Conv2dParams<T> conv_params(agct::Shape wshape, std::vector<T> w, std::vector<T> b,
                                std::size_t stride, std::size_t pad, bool grad = false) {
  const std::size_t nb = b.size();
  return {make_tensor<T>(std::move(wshape), std::move(w), grad),
          make_tensor<T>({nb}, std::move(b), grad), stride, pad};
}

// Direct sliding-window cross-correlation.
std::vector<double> brute_conv(const std::vector<double>& x, std::size_t c, std::size_t h,
                               std::size_t w, const std::vector<double>& k, std::size_t cout,
                               std::size_t kh, std::size_t kw, std::size_t s, std::size_t p,
                               std::size_t& oh, std::size_t& ow) {
  oh = (h + 2 * p - kh) / s + 1;
  ow = (w + 2 * p - kw) / s + 1;
  std::vector<double> out(cout * oh * ow, 0.0);
  for (std::size_t o = 0; o < cout; ++o)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t xx = 0; xx < ow; ++xx) {
        double acc = 0;
        for (std::size_t ci = 0; ci < c; ++ci)
          for (std::size_t i = 0; i < kh; ++i)
            for (std::size_t j = 0; j < kw; ++j) {
              const long iy = static_cast<long>(y * s + i) - static_cast<long>(p);
              const long ix = static_cast<long>(xx * s + j) - static_cast<long>(p);
              if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(w))
                continue;
              acc += x[(ci * h + iy) * w + ix] * k[((o * c + ci) * kh + i) * kw + j];
            }
        out[(o * oh + y) * ow + xx] = acc;
      }
  return out;
}

TEST(Conv2d, IdentityKernel) {
  auto x = make_tensor<float>({1, 1, 1, 1}, {3.25f});
  auto y = nn::conv2d(x, conv_params<float>({1, 1, 1, 1}, {1}, {0}, 1, 0));
  EXPECT_EQ(y.shape(), (agct::Shape{1, 1, 1, 1}));
  EXPECT_EQ(y.item(), 3.25f);
}

TEST(Conv2d, AllOnesTwoByTwo) {
  auto x = make_tensor<float>({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  auto y = nn::conv2d(x, conv_params<float>({1, 1, 2, 2}, {1, 1, 1, 1}, {0}, 1, 0));
  EXPECT_EQ(std::vector<float>(y.values().begin(), y.values().end()),
            (std::vector<float>{12, 16, 24, 28}));
}

TEST(Conv2d, ZeroKernelGivesBias) {
  auto x = make_tensor<float>({1, 2, 5, 5}, random_values<float>(50, 1));
  auto y = nn::conv2d(x, conv_params<float>({3, 2, 3, 3}, std::vector<float>(54, 0.0f),
                                            {0.5f, -1.0f, 2.0f}, 2, 1));
  ASSERT_EQ(y.shape(), (agct::Shape{1, 3, 3, 3}));
  for (std::size_t i = 0; i < 27; ++i) EXPECT_EQ(y[i], (std::vector<float>{0.5f, -1, 2})[i / 9]);
}

TEST(Conv2d, MatchesBruteForceOracle) {
  for (auto [k, s, p] : {std::tuple{4, 2, 1}, std::tuple{3, 1, 1}, std::tuple{4, 1, 1}}) {
    const auto xv = random_values<double>(2 * 3 * 9 * 7, 7);
    const auto wv = random_values<double>(5 * 3 * k * k, 8);
    auto x = make_tensor<double>({2, 3, 9, 7}, xv);
    auto y = nn::conv2d(x, conv_params<double>({5, 3, std::size_t(k), std::size_t(k)}, wv,
                                               std::vector<double>(5, 0.0), s, p));
    for (std::size_t b = 0; b < 2; ++b) {
      std::vector<double> xb(xv.begin() + b * 189, xv.begin() + (b + 1) * 189);
      std::size_t oh, ow;
      auto ref = brute_conv(xb, 3, 9, 7, wv, 5, k, k, s, p, oh, ow);
      ASSERT_EQ(y.dim(2), oh);
      ASSERT_EQ(y.dim(3), ow);
      for (std::size_t i = 0; i < ref.size(); ++i)
        EXPECT_NEAR(y[b * ref.size() + i], ref[i], 1e-12);
    }
  }
}

TEST(Conv2d, ChannelMismatchAndTooSmall) {
  auto x = make_tensor<float>({1, 2, 3, 3}, std::vector<float>(18, 1));
  EXPECT_THROW(nn::conv2d(x, conv_params<float>({1, 3, 1, 1}, {1, 1, 1}, {0}, 1, 0)),
               agct::Error);
  auto tiny = make_tensor<float>({1, 1, 2, 2}, {1, 2, 3, 4});
  EXPECT_THROW(nn::conv2d(tiny, conv_params<float>({1, 1, 4, 4}, std::vector<float>(16, 1),
                                                   {0}, 1, 0)),
               agct::Error);
}

TEST(Conv2d, GradCheck) {
  auto x = make_tensor<double>({2, 2, 6, 6}, random_values<double>(144, 11), true);
  auto p = conv_params<double>({3, 2, 4, 4}, random_values<double>(96, 12),
                               random_values<double>(3, 13), 2, 1, true);
  auto r = agct::grad_check<double>(
      [&] { return agct::mean(agct::square(nn::conv2d(x, p))); }, {x, p.weight, p.bias});
  EXPECT_LT(r.max_relative_error, 1e-6);
}

TEST(ConvTranspose2d, ShapeFormula) {
  auto x = make_tensor<float>({1, 2, 8, 8}, std::vector<float>(128, 1));
  auto p = conv_params<float>({2, 3, 4, 4}, std::vector<float>(96, 0.1f), {0, 0, 0}, 2, 1);
  auto y = nn::conv_transpose2d(x, p);
  EXPECT_EQ(y.shape(), (agct::Shape{1, 3, 16, 16}));
}

TEST(ConvTranspose2d, SingleSiteScatter) {
  auto x = make_tensor<float>({1, 1, 1, 1}, {1});
  auto y = nn::conv_transpose2d(x, conv_params<float>({1, 1, 2, 2}, {2, 3, 5, 7}, {0}, 1, 0));
  EXPECT_EQ(std::vector<float>(y.values().begin(), y.values().end()),
            (std::vector<float>{2, 3, 5, 7}));
}

TEST(ConvTranspose2d, AdjointOfConv2d) {
  // <conv(x), y> == <x, conv^T(y)> with the same kernel, float precision.
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto kernel = random_values<float>(4 * 3 * 4 * 4, 100 + seed);
    auto conv = conv_params<float>({4, 3, 4, 4}, kernel, std::vector<float>(4, 0), 2, 1);
    auto tconv = conv_params<float>({4, 3, 4, 4}, kernel, std::vector<float>(3, 0), 2, 1);
    auto x = make_tensor<float>({1, 3, 8, 8}, random_values<float>(192, 200 + seed));
    auto y = make_tensor<float>({1, 4, 4, 4}, random_values<float>(64, 300 + seed));
    auto cx = nn::conv2d(x, conv);
    auto ty = nn::conv_transpose2d(y, tconv);
    ASSERT_EQ(ty.shape(), x.shape());
    double lhs = 0, rhs = 0;
    for (std::size_t i = 0; i < cx.numel(); ++i) lhs += double(cx[i]) * y[i];
    for (std::size_t i = 0; i < x.numel(); ++i) rhs += double(x[i]) * ty[i];
    EXPECT_NEAR(lhs, rhs, 1e-5);
  }
}

TEST(ConvTranspose2d, GradCheck) {
  auto x = make_tensor<double>({1, 3, 4, 4}, random_values<double>(48, 21), true);
  auto p = conv_params<double>({3, 2, 4, 4}, random_values<double>(96, 22),
                               random_values<double>(2, 23), 2, 1, true);
  auto r = agct::grad_check<double>(
      [&] { return agct::mean(agct::square(nn::conv_transpose2d(x, p))); },
      {x, p.weight, p.bias});
  EXPECT_LT(r.max_relative_error, 1e-6);
}

TEST(BatchNorm, TrainModeStandardizes) {
  auto bn = nn::make_batch_norm<double>(2);
  auto x = make_tensor<double>({2, 2, 3, 3}, random_values<double>(36, 31, -3, 5));
  auto y = nn::batch_norm(x, bn);
  for (std::size_t c = 0; c < 2; ++c) {
    double s = 0, ss = 0;
    for (std::size_t b = 0; b < 2; ++b)
      for (std::size_t i = 0; i < 9; ++i) s += y[(b * 2 + c) * 9 + i];
    const double mu = s / 18;
    for (std::size_t b = 0; b < 2; ++b)
      for (std::size_t i = 0; i < 9; ++i) ss += std::pow(y[(b * 2 + c) * 9 + i] - mu, 2);
    EXPECT_NEAR(mu, 0.0, 1e-12);
    EXPECT_NEAR(ss / 18, 1.0, 1e-4);
  }
  // running stats moved toward the batch statistics
  EXPECT_NE(bn.running_mean[0], 0.0);
  EXPECT_GE(bn.running_var[0], 0.0);
}

TEST(BatchNorm, EvalModeConstantInput) {
  auto bn = nn::make_batch_norm<double>(1);
  bn.running_mean = {2.5};
  bn.running_var = {4.0};
  bn.scale.mutable_values()[0] = 3.0;
  bn.shift.mutable_values()[0] = -0.75;
  bn.mode = nn::NormMode::eval;
  auto y = nn::batch_norm(agct::full<double>({1, 1, 4, 4}, 2.5), bn);
  for (double v : y.values()) EXPECT_EQ(v, -0.75);
}

TEST(BatchNorm, BatchStatsModeLeavesRunningStats) {
  auto bn = nn::make_batch_norm<float>(1);
  bn.mode = nn::NormMode::batch_stats;
  nn::batch_norm(make_tensor<float>({1, 1, 2, 2}, {1, 2, 3, 4}), bn);
  EXPECT_EQ(bn.running_mean[0], 0.0f);
  EXPECT_EQ(bn.running_var[0], 1.0f);
}

TEST(BatchNorm, ChannelMismatch) {
  auto bn = nn::make_batch_norm<float>(3);
  EXPECT_THROW(nn::batch_norm(make_tensor<float>({1, 2, 2, 2}, std::vector<float>(8, 1)), bn),
               agct::Error);
}

TEST(BatchNorm, GradCheckTrainMode) {
  auto bn = nn::make_batch_norm<double>(2);
  bn.scale = make_tensor<double>({2}, {1.3, -0.7}, true);
  bn.shift = make_tensor<double>({2}, {0.2, 0.1}, true);
  auto x = make_tensor<double>({1, 2, 3, 3}, random_values<double>(18, 41), true);
  auto w = make_tensor<double>({1, 2, 3, 3}, random_values<double>(18, 42));
  auto r = agct::grad_check<double>(
      [&] { return agct::sum(agct::mul(nn::batch_norm(x, bn), w)); }, {x, bn.scale, bn.shift});
  EXPECT_LT(r.max_relative_error, 1e-4);
  EXPECT_EQ(r.excluded, 0u);
}

TEST(BatchNorm, GradCheckEvalMode) {
  auto bn = nn::make_batch_norm<double>(2);
  bn.mode = nn::NormMode::eval;
  bn.running_mean = {0.3, -0.2};
  bn.running_var = {0.5, 2.0};
  auto x = make_tensor<double>({1, 2, 3, 3}, random_values<double>(18, 43), true);
  auto r = agct::grad_check<double>(
      [&] { return agct::sum(agct::square(nn::batch_norm(x, bn))); }, {x, bn.scale, bn.shift});
  EXPECT_LT(r.max_relative_error, 1e-6);
}

TEST(Activation, Relu) {
  auto y = nn::relu(make_tensor<float>({3}, {-1, 0, 2}));
  EXPECT_EQ(std::vector<float>(y.values().begin(), y.values().end()),
            (std::vector<float>{0, 0, 2}));
}

TEST(Activation, TanhRangeAndDerivative) {
  auto x = make_tensor<double>({1}, {0.0}, true);
  auto y = nn::tanh(x);
  EXPECT_EQ(y.item(), 0.0);
  EXPECT_DOUBLE_EQ(agct::backward(agct::sum(y)).get(x)[0], 1.0);
  auto big = nn::tanh(make_tensor<float>({4}, {-5, -0.5f, 0.5f, 5}));
  for (float v : big.values()) {
    EXPECT_GT(v, -1.0f);
    EXPECT_LT(v, 1.0f);
  }
}

TEST(Activation, ReluSubgradientAtZero) {
  auto x = make_tensor<double>({3}, {-1, 0, 1}, true);
  auto g = agct::backward(agct::sum(nn::relu(x))).get(x);
  EXPECT_EQ(g, (std::vector<double>{0, 0, 1}));
}

TEST(Upsample, ConstantStaysConstant) {
  auto y = nn::bilinear_upsample(agct::full<float>({1, 2, 3, 5}, 0.37f), 7, 11);
  for (float v : y.values()) EXPECT_EQ(v, 0.37f);
}

TEST(Upsample, CornerAlignedRows) {
  auto x = make_tensor<double>({1, 1, 2, 2}, {0, 1, 0, 1});
  auto y = nn::bilinear_upsample(x, 2, 4);
  const double expect[] = {0, 1.0 / 3, 2.0 / 3, 1};
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(y[r * 4 + c], expect[c], 1e-15);
}

TEST(Upsample, IdentityAndRangeAndDownscale) {
  const auto v = random_values<float>(48, 51);
  auto x = make_tensor<float>({1, 3, 4, 4}, v);
  auto same = nn::bilinear_upsample(x, 4, 4);
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(same[i], v[i]);
  auto up = nn::bilinear_upsample(x, 13, 9);
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  for (float y : up.values()) {
    EXPECT_GE(y, *lo);
    EXPECT_LE(y, *hi);
  }
  EXPECT_THROW(nn::bilinear_upsample(x, 3, 4), agct::Error);
}

TEST(Upsample, GradCheck) {
  auto x = make_tensor<double>({1, 2, 3, 3}, random_values<double>(18, 52), true);
  auto w = make_tensor<double>({1, 2, 7, 5}, random_values<double>(70, 53));
  auto r = agct::grad_check<double>(
      [&] { return agct::sum(agct::mul(nn::bilinear_upsample(x, 7, 5), w)); }, {x});
  EXPECT_LT(r.max_relative_error, 1e-8);
}

TEST(Residual, ZeroInnerPathIsIdentity) {
  nn::Rng rng(1);
  auto block = nn::make_residual_block<float>(4, 3, rng);
  for (auto* conv : {&block.conv1, &block.conv2})
    for (float& v : conv->weight.mutable_values()) v = 0;
  auto x = make_tensor<float>({1, 4, 5, 5}, random_values<float>(100, 61));
  auto y = nn::residual_block(x, block);
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y[i], x[i]);
}

TEST(Residual, ZeroFinalScaleIsIdentity) {
  nn::Rng rng(2);
  auto block = nn::make_residual_block<float>(4, 3, rng);
  for (float& v : block.norm2.scale.mutable_values()) v = 0;
  auto x = make_tensor<float>({1, 4, 6, 6}, random_values<float>(144, 62));
  auto y = nn::residual_block(x, block);
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y[i], x[i]);
}

TEST(Residual, ShapePreserved) {
  nn::Rng rng(3);
  auto block = nn::make_residual_block<float>(64, 3, rng);
  auto x = make_tensor<float>({1, 64, 16, 16}, random_values<float>(64 * 256, 63));
  EXPECT_EQ(nn::residual_block(x, block).shape(), x.shape());
  auto bad = make_tensor<float>({1, 8, 16, 16}, std::vector<float>(8 * 256, 0));
  EXPECT_THROW(nn::residual_block(bad, block), agct::Error);
}

TEST(Residual, GradCheck) {
  nn::Rng rng(4);
  auto block = nn::make_residual_block<double>(4, 3, rng);
  for (auto* conv : {&block.conv1, &block.conv2}) {
    auto v = random_values<double>(conv->weight.numel(), 70 + conv->weight.numel(), -0.3, 0.3);
    std::copy(v.begin(), v.end(), conv->weight.mutable_values().begin());
  }
  auto x = make_tensor<double>({1, 4, 8, 8}, random_values<double>(256, 71), true);
  auto w = make_tensor<double>({1, 4, 8, 8}, random_values<double>(256, 72));
  auto r = agct::grad_check<double>(
      [&] { return agct::mean(agct::mul(nn::residual_block(x, block), w)); },
      {x, block.conv1.weight, block.conv1.bias, block.norm1.scale, block.norm1.shift,
       block.conv2.weight, block.conv2.bias, block.norm2.scale, block.norm2.shift},
      {.eps = 1e-4, .max_elements_per_input = 60, .seed = 5});
  EXPECT_LT(r.max_relative_error, 1e-4) << "input " << r.worst_input << " element "
                                        << r.worst_element << " analytic " << r.worst_analytic
                                        << " numeric " << r.worst_numeric;
  EXPECT_GT(r.checked, 200u);
}

TEST(Init, DeterministicPerSeed) {
  nn::Rng a(42), b(42);
  EXPECT_EQ(nn::init_params<float>({8, 4, 3, 3}, a), nn::init_params<float>({8, 4, 3, 3}, b));
}

TEST(Init, SampleStatistics) {
  nn::Rng rng(7);
  auto v = nn::init_params<double>({100000}, rng);
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  double ss = 0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / v.size());
  EXPECT_LT(std::abs(mean), 0.001);
  EXPECT_GE(sd, 0.0195);
  EXPECT_LE(sd, 0.0205);
}

TEST(Init, BiasesAndNormParams) {
  nn::Rng rng(9);
  auto conv = nn::make_conv<float>(3, 8, 4, 2, 1, rng);
  for (float v : conv.bias.values()) EXPECT_EQ(v, 0.0f);
  auto bn = nn::make_batch_norm<float>(8);
  for (float v : bn.scale.values()) EXPECT_EQ(v, 1.0f);
  for (float v : bn.shift.values()) EXPECT_EQ(v, 0.0f);
}

}  // namespace
