#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "agct/gan/models.hpp"
#include "agct/nn/upsample.hpp"

namespace agct::gan {

inline constexpr double kAttentionFallbackRange = 1e-8;

template <class T>
struct AttentionMap {
  Tensor<T> weights;  // [N,1,H,W] constant, values in [0,1]
  std::size_t source_layer = 0;  // 1-based; 0 when no discriminator was consulted
  std::vector<double> raw_min;   // per sample, before normalization
  std::vector<double> raw_max;
  std::vector<bool> fallback;    // per sample, true when the map was forced to ones

  std::size_t height() const { return weights.dim(2); }
  std::size_t width() const { return weights.dim(3); }
};

/// Map of ones, the neutral element of attention injection.
template <class T>
AttentionMap<T> neutral_attention(std::size_t batch, std::size_t h, std::size_t w) {
  AttentionMap<T> a;
  a.weights = full<T>({batch, 1, h, w}, T(1));
  a.raw_min.assign(batch, 1.0);
  a.raw_max.assign(batch, 1.0);
  a.fallback.assign(batch, true);
  return a;
}

/// Channel-wise sum of |A| over one activation [N,C,h,w], min-max normalized
/// per sample, then bilinearly upsampled to target size. The result carries no
/// gradient path back into the activation.
template <class T>
AttentionMap<T> attention_from_activation(const Tensor<T>& activation, std::size_t target_h,
                                          std::size_t target_w) {
  if (activation.rank() != 4)
    fail(ErrorKind::shape_mismatch,
         "attention source must be [N,C,H,W], got " + shape_string(activation.shape()));
  const std::size_t n = activation.dim(0), c = activation.dim(1);
  const std::size_t h = activation.dim(2), w = activation.dim(3);
  const std::size_t hw = h * w;
  const auto a = activation.values();

  AttentionMap<T> out;
  std::vector<T> grid(n * hw);
  std::vector<double> raw(hw);
  for (std::size_t s = 0; s < n; ++s) {
    std::fill(raw.begin(), raw.end(), 0.0);
    for (std::size_t ch = 0; ch < c; ++ch) {
      const T* src = a.data() + (s * c + ch) * hw;
      for (std::size_t p = 0; p < hw; ++p) raw[p] += std::abs(static_cast<double>(src[p]));
    }
    const auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
    const double mn = *lo, mx = *hi;
    const bool degenerate = !(mx - mn >= kAttentionFallbackRange);
    out.raw_min.push_back(mn);
    out.raw_max.push_back(mx);
    out.fallback.push_back(degenerate);
    T* dst = grid.data() + s * hw;
    for (std::size_t p = 0; p < hw; ++p)
      dst[p] = degenerate ? T(1) : static_cast<T>((raw[p] - mn) / (mx - mn));
  }

  NoGradGuard no_grad;
  const Tensor<T> small = make_tensor<T>({n, 1, h, w}, std::move(grid));
  out.weights = (target_h == h && target_w == w) ? small
                                                 : nn::bilinear_upsample(small, target_h, target_w);
  return out;
}

template <class T>
AttentionMap<T> extract_attention(const std::vector<Tensor<T>>& activations,
                                  std::size_t layer_index, std::size_t target_h,
                                  std::size_t target_w) {
  if (layer_index < 1 || layer_index > activations.size())
    fail(ErrorKind::invalid_argument, "attention layer index " + std::to_string(layer_index) +
                                          " outside 1.." + std::to_string(activations.size()));
  AttentionMap<T> out =
      attention_from_activation(activations[layer_index - 1], target_h, target_w);
  out.source_layer = layer_index;
  return out;
}

template <class T>
struct GenerateResult {
  Tensor<T> synct;
  AttentionMap<T> attention;
  Tensor<T> provisional;  // pass-1 output (attention_gan only)
};

/// Produces a synthetic CT. For attention_gan this is two passes: a plain
/// pass gives a provisional image, the discriminator's view of that image
/// yields the attention map, and the second pass is run with it injected into
/// the first encoder feature map. Pass 1 and the discriminator run without
/// graph recording, so gradients reach only the generator's second pass.
template <class T>
GenerateResult<T> generate(Models<T>& models, const Tensor<T>& mr) {
  if (mr.rank() != 4)
    fail(ErrorKind::shape_mismatch, "generate expects [N,1,H,W], got " + shape_string(mr.shape()));
  const auto [fh, fw] = Generator<T>::first_feature_size(mr.dim(2), mr.dim(3));
  GenerateResult<T> out;
  if (models.config.kind != ModelKind::attention_gan || !models.discriminator) {
    out.synct = models.generator.forward(mr);
    out.attention = neutral_attention<T>(mr.dim(0), fh, fw);
    return out;
  }
  {
    NoGradGuard no_grad;
    out.provisional = models.generator.forward(mr);
    const auto d = models.discriminator->discriminate(out.provisional);
    out.attention = extract_attention(d.activations, models.config.attention_layer, fh, fw);
  }
  out.synct = models.generator.forward(mr, &out.attention.weights);
  return out;
}

}  // namespace agct::gan
