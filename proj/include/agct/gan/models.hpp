#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "agct/adam.hpp"
#include "agct/gan/config.hpp"
#include "agct/nn/activation.hpp"
#include "agct/nn/batch_norm.hpp"
#include "agct/nn/conv.hpp"
#include "agct/nn/init.hpp"
#include "agct/nn/residual.hpp"
#include "agct/ops.hpp"

namespace agct::gan {

/// Non-trainable state (batch-norm running statistics) addressed by name.
template <class T>
struct NamedBuffer {
  std::string name;
  std::vector<T>* data;
};

namespace internal {

template <class T>
void add_conv(ParameterSet<T>& out, const std::string& prefix, const nn::Conv2dParams<T>& c) {
  out.push_back({prefix + ".weight", c.weight});
  out.push_back({prefix + ".bias", c.bias});
}

template <class T>
void add_norm(ParameterSet<T>& out, const std::string& prefix, const nn::BatchNormParams<T>& n) {
  out.push_back({prefix + ".scale", n.scale});
  out.push_back({prefix + ".shift", n.shift});
}

template <class T>
void add_norm_buffers(std::vector<NamedBuffer<T>>& out, const std::string& prefix,
                      nn::BatchNormParams<T>& n) {
  out.push_back({prefix + ".running_mean", &n.running_mean});
  out.push_back({prefix + ".running_var", &n.running_var});
}

template <class T>
void add_residual(ParameterSet<T>& out, const std::string& prefix,
                  const nn::ResidualBlockParams<T>& r) {
  add_conv(out, prefix + ".conv1", r.conv1);
  add_norm(out, prefix + ".norm1", r.norm1);
  add_conv(out, prefix + ".conv2", r.conv2);
  add_norm(out, prefix + ".norm2", r.norm2);
}

template <class T>
void add_residual_buffers(std::vector<NamedBuffer<T>>& out, const std::string& prefix,
                          nn::ResidualBlockParams<T>& r) {
  add_norm_buffers(out, prefix + ".norm1", r.norm1);
  add_norm_buffers(out, prefix + ".norm2", r.norm2);
}

template <class Dst, class Src>
void copy_values(ParameterSet<Dst>& dst, const ParameterSet<Src>& src) {
  if (dst.size() != src.size())
    fail(ErrorKind::shape_mismatch, "parameter count mismatch while copying model state");
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (dst[i].name != src[i].name || dst[i].tensor.shape() != src[i].tensor.shape())
      fail(ErrorKind::shape_mismatch, "parameter '" + src[i].name + "' does not match");
    auto out = dst[i].tensor.mutable_values();
    auto in = src[i].tensor.values();
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = static_cast<Dst>(in[k]);
  }
}

template <class Dst, class Src>
void copy_buffers(const std::vector<NamedBuffer<Dst>>& dst,
                  const std::vector<NamedBuffer<Src>>& src) {
  if (dst.size() != src.size())
    fail(ErrorKind::shape_mismatch, "buffer count mismatch while copying model state");
  for (std::size_t i = 0; i < dst.size(); ++i)
    dst[i].data->assign(src[i].data->begin(), src[i].data->end());
}

}  // namespace internal

/// Encoder E (three stride-2 convolutions, residual blocks) followed by
/// decoder G (residual blocks, three stride-2 transposed convolutions, tanh).
/// Every resampling layer except the last is followed by batch norm + ReLU.
template <class T>
class Generator {
 public:
  Generator(const ModelConfig& cfg, nn::Rng& rng) : cfg_(cfg) {
    const std::size_t b = cfg.base_width;
    const std::array<std::size_t, 4> enc{1, b, 2 * b, 4 * b};
    for (std::size_t i = 0; i < 3; ++i) {
      down_[i] = nn::make_conv<T>(enc[i], enc[i + 1], kResamplingKernel, 2, kResamplingPadding,
                                  rng);
      down_norm_[i] = nn::make_batch_norm<T>(enc[i + 1]);
    }
    for (std::size_t i = 0; i < cfg.residual_blocks; ++i)
      encoder_res_.push_back(nn::make_residual_block<T>(4 * b, cfg.residual_kernel, rng));
    for (std::size_t i = 0; i < cfg.residual_blocks; ++i)
      decoder_res_.push_back(nn::make_residual_block<T>(4 * b, cfg.residual_kernel, rng));
    const std::array<std::size_t, 4> dec{4 * b, 2 * b, b, 1};
    for (std::size_t i = 0; i < 3; ++i) {
      up_[i] = nn::make_conv_transpose<T>(dec[i], dec[i + 1], kResamplingKernel, 2,
                                          kResamplingPadding, rng);
      if (i < 2) up_norm_[i] = nn::make_batch_norm<T>(dec[i + 1]);
    }
  }

  Generator(Generator&&) noexcept = default;
  Generator& operator=(Generator&&) noexcept = default;
  Generator(const Generator&) = delete;
  Generator& operator=(const Generator&) = delete;

  const ModelConfig& config() const { return cfg_; }

  /// Spatial size of the first encoder feature map for an HxW input.
  static std::array<std::size_t, 2> first_feature_size(std::size_t h, std::size_t w) {
    return {nn::conv_output_size(h, kResamplingKernel, 2, kResamplingPadding),
            nn::conv_output_size(w, kResamplingKernel, 2, kResamplingPadding)};
  }

  /// First encoder layer: conv, norm, ReLU.
  Tensor<T> first_layer(const Tensor<T>& mr) {
    check_input(mr);
    return nn::relu(nn::batch_norm(nn::conv2d(mr, down_[0]), down_norm_[0]));
  }

  /// Everything after the first encoder layer.
  Tensor<T> rest(const Tensor<T>& features) {
    Tensor<T> h = features;
    for (std::size_t i = 1; i < 3; ++i)
      h = nn::relu(nn::batch_norm(nn::conv2d(h, down_[i]), down_norm_[i]));
    for (auto& r : encoder_res_) h = nn::residual_block(h, r);
    for (auto& r : decoder_res_) h = nn::residual_block(h, r);
    for (std::size_t i = 0; i < 2; ++i)
      h = nn::relu(nn::batch_norm(nn::conv_transpose2d(h, up_[i]), up_norm_[i]));
    return nn::tanh(nn::conv_transpose2d(h, up_[2]));
  }

  /// Full pass. `attention`, when given, is [N,1,h1,w1] and scales the first
  /// encoder feature map across all channels.
  Tensor<T> forward(const Tensor<T>& mr, const Tensor<T>* attention = nullptr) {
    Tensor<T> h = first_layer(mr);
    if (attention) {
      const Shape& a = attention->shape();
      if (a.size() != 4 || a[0] != h.dim(0) || a[1] != 1 || a[2] != h.dim(2) ||
          a[3] != h.dim(3))
        fail(ErrorKind::shape_mismatch, "attention map " + shape_string(a) +
                                            " does not match first feature map " +
                                            shape_string(h.shape()));
      h = mul(h, *attention);
    }
    return rest(h);
  }

  ParameterSet<T> parameters() const {
    ParameterSet<T> out;
    for (std::size_t i = 0; i < 3; ++i) {
      const std::string p = "G.down" + std::to_string(i + 1);
      internal::add_conv(out, p, down_[i]);
      internal::add_norm(out, p + ".norm", down_norm_[i]);
    }
    for (std::size_t i = 0; i < encoder_res_.size(); ++i)
      internal::add_residual(out, "G.enc_res" + std::to_string(i + 1), encoder_res_[i]);
    for (std::size_t i = 0; i < decoder_res_.size(); ++i)
      internal::add_residual(out, "G.dec_res" + std::to_string(i + 1), decoder_res_[i]);
    for (std::size_t i = 0; i < 3; ++i) {
      const std::string p = "G.up" + std::to_string(i + 1);
      internal::add_conv(out, p, up_[i]);
      if (i < 2) internal::add_norm(out, p + ".norm", up_norm_[i]);
    }
    return out;
  }

  std::vector<NamedBuffer<T>> buffers() {
    std::vector<NamedBuffer<T>> out;
    for (std::size_t i = 0; i < 3; ++i)
      internal::add_norm_buffers(out, "G.down" + std::to_string(i + 1) + ".norm", down_norm_[i]);
    for (std::size_t i = 0; i < encoder_res_.size(); ++i)
      internal::add_residual_buffers(out, "G.enc_res" + std::to_string(i + 1), encoder_res_[i]);
    for (std::size_t i = 0; i < decoder_res_.size(); ++i)
      internal::add_residual_buffers(out, "G.dec_res" + std::to_string(i + 1), decoder_res_[i]);
    for (std::size_t i = 0; i < 2; ++i)
      internal::add_norm_buffers(out, "G.up" + std::to_string(i + 1) + ".norm", up_norm_[i]);
    return out;
  }

  void set_norm_mode(nn::NormMode mode) {
    for (auto& n : down_norm_) n.mode = mode;
    for (auto& n : up_norm_) n.mode = mode;
    for (auto* blocks : {&encoder_res_, &decoder_res_})
      for (auto& r : *blocks) r.norm1.mode = r.norm2.mode = mode;
  }

 private:
  void check_input(const Tensor<T>& mr) const {
    const Shape& s = mr.shape();
    if (s.size() != 4 || s[1] != 1 || s[2] % 8 != 0 || s[3] % 8 != 0)
      fail(ErrorKind::shape_mismatch,
           "generator expects [N,1,H,W] with H,W divisible by 8, got " + shape_string(s));
  }

  ModelConfig cfg_;
  std::array<nn::Conv2dParams<T>, 3> down_;
  std::array<nn::BatchNormParams<T>, 3> down_norm_;
  std::vector<nn::ResidualBlockParams<T>> encoder_res_;
  std::vector<nn::ResidualBlockParams<T>> decoder_res_;
  std::array<nn::Conv2dParams<T>, 3> up_;
  std::array<nn::BatchNormParams<T>, 2> up_norm_;
};

template <class T>
struct DiscriminatorOutput {
  Tensor<T> score;                     // [N], spatial mean of the final map
  std::vector<Tensor<T>> activations;  // one per layer, post-activation
};

template <class T>
class Discriminator {
 public:
  Discriminator(const ModelConfig& cfg, nn::Rng& rng) : cfg_(cfg) {
    std::size_t in = 1;
    for (std::size_t i = 0; i < kDiscriminatorLayers; ++i) {
      const std::size_t out = cfg.discriminator_channels(i);
      layers_[i] = nn::make_conv<T>(in, out, kResamplingKernel, kDiscriminatorStrides[i],
                                    kResamplingPadding, rng);
      if (i + 1 < kDiscriminatorLayers) norms_[i] = nn::make_batch_norm<T>(out);
      in = out;
    }
  }

  Discriminator(Discriminator&&) noexcept = default;
  Discriminator& operator=(Discriminator&&) noexcept = default;
  Discriminator(const Discriminator&) = delete;
  Discriminator& operator=(const Discriminator&) = delete;

  const ModelConfig& config() const { return cfg_; }

  DiscriminatorOutput<T> discriminate(const Tensor<T>& image) {
    const Shape& s = image.shape();
    if (s.size() != 4 || s[1] != 1 || s[2] != cfg_.height || s[3] != cfg_.width)
      fail(ErrorKind::shape_mismatch, "discriminator expects [N,1," + std::to_string(cfg_.height) +
                                          "," + std::to_string(cfg_.width) + "], got " +
                                          shape_string(s));
    DiscriminatorOutput<T> out;
    Tensor<T> h = image;
    for (std::size_t i = 0; i < kDiscriminatorLayers; ++i) {
      h = nn::conv2d(h, layers_[i]);
      if (i + 1 < kDiscriminatorLayers) h = nn::relu(nn::batch_norm(h, norms_[i]));
      out.activations.push_back(h);
    }
    out.score = mean(h, {1, 2, 3});
    return out;
  }

  Tensor<T> score(const Tensor<T>& image) { return discriminate(image).score; }

  ParameterSet<T> parameters() const {
    ParameterSet<T> out;
    for (std::size_t i = 0; i < kDiscriminatorLayers; ++i) {
      const std::string p = "D.layer" + std::to_string(i + 1);
      internal::add_conv(out, p, layers_[i]);
      if (i + 1 < kDiscriminatorLayers) internal::add_norm(out, p + ".norm", norms_[i]);
    }
    return out;
  }

  std::vector<NamedBuffer<T>> buffers() {
    std::vector<NamedBuffer<T>> out;
    for (std::size_t i = 0; i + 1 < kDiscriminatorLayers; ++i)
      internal::add_norm_buffers(out, "D.layer" + std::to_string(i + 1) + ".norm", norms_[i]);
    return out;
  }

  void set_norm_mode(nn::NormMode mode) {
    for (auto& n : norms_) n.mode = mode;
  }

  void set_requires_grad(bool flag) {
    for (auto& p : parameters()) p.tensor.set_requires_grad(flag);
  }

 private:
  ModelConfig cfg_;
  std::array<nn::Conv2dParams<T>, kDiscriminatorLayers> layers_;
  std::array<nn::BatchNormParams<T>, kDiscriminatorLayers - 1> norms_;
};

template <class T>
struct Models {
  ModelConfig config;
  Generator<T> generator;
  std::optional<Discriminator<T>> discriminator;

  /// Training uses batch statistics and updates running ones; otherwise the
  /// configured inference normalization applies.
  void set_training(bool training) {
    const nn::NormMode mode = training ? nn::NormMode::train : config.inference_norm;
    generator.set_norm_mode(mode);
    if (discriminator) discriminator->set_norm_mode(mode);
  }

  ParameterSet<T> parameters() const {
    ParameterSet<T> out = generator.parameters();
    if (discriminator)
      for (auto& p : discriminator->parameters()) out.push_back(std::move(p));
    return out;
  }

  std::vector<NamedBuffer<T>> buffers() {
    auto out = generator.buffers();
    if (discriminator)
      for (auto& b : discriminator->buffers()) out.push_back(b);
    return out;
  }

  /// Deep copy in precision U (U == T gives an independent clone).
  template <class U = T>
  Models<U> copy_as() const;

  Models clone() const { return copy_as<T>(); }
};

/// Builds from a single seeded stream: generator parameters first, then the
/// discriminator. The cnn kind has no discriminator.
template <class T>
Models<T> build_models(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  nn::Rng rng(seed);
  Generator<T> g(cfg, rng);
  std::optional<Discriminator<T>> d;
  if (has_discriminator(cfg.kind)) d.emplace(cfg, rng);
  Models<T> m{cfg, std::move(g), std::move(d)};
  m.set_training(false);
  return m;
}

template <class T>
template <class U>
Models<U> Models<T>::copy_as() const {
  Models<U> out = build_models<U>(config, 0);
  auto dst = out.parameters();
  const auto src = parameters();
  internal::copy_values(dst, src);
  for (std::size_t i = 0; i < dst.size(); ++i)
    dst[i].tensor.set_requires_grad(src[i].tensor.requires_grad());
  // buffers() hands out mutable pointers; reading through them is safe here
  auto& self = const_cast<Models<T>&>(*this);
  internal::copy_buffers(out.buffers(), self.buffers());
  return out;
}

}  // namespace agct::gan
