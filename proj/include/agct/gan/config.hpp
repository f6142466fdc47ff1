#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

#include "agct/error.hpp"
#include "agct/nn/batch_norm.hpp"
#include "agct/nn/conv.hpp"
#include "json.hpp"

namespace agct::gan {

enum class ModelKind { attention_gan, gan, cnn };

inline std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::attention_gan: return "attention-gan";
    case ModelKind::gan: return "gan";
    case ModelKind::cnn: return "cnn";
  }
  return "unknown";
}

inline ModelKind parse_model_kind(std::string_view name) {
  if (name == "attention-gan" || name == "attention_gan") return ModelKind::attention_gan;
  if (name == "gan") return ModelKind::gan;
  if (name == "cnn") return ModelKind::cnn;
  fail(ErrorKind::invalid_argument, "unknown model kind '" + std::string(name) + "'");
}

inline bool has_discriminator(ModelKind kind) { return kind != ModelKind::cnn; }

inline constexpr std::size_t kDiscriminatorLayers = 6;
inline constexpr std::size_t kResamplingKernel = 4;
inline constexpr std::size_t kResamplingPadding = 1;
inline constexpr std::array<std::size_t, kDiscriminatorLayers> kDiscriminatorStrides{2, 2, 2, 2,
                                                                                       1, 1};
inline constexpr std::array<std::size_t, kDiscriminatorLayers> kDiscriminatorWidthFactor{
    1, 2, 4, 8, 8, 0};  // 0: single output channel

/// Architecture. Channel widths scale with `base_width` (64 gives the
/// 64/128/256 encoder and 64..512 discriminator).
struct ModelConfig {
  ModelKind kind = ModelKind::attention_gan;
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t base_width = 64;
  std::size_t residual_blocks = 4;  // per encoder and per decoder
  std::size_t residual_kernel = 3;
  std::size_t attention_layer = 3;  // 1-based discriminator layer
  nn::NormMode inference_norm = nn::NormMode::batch_stats;

  std::size_t discriminator_channels(std::size_t layer) const {
    const std::size_t f = kDiscriminatorWidthFactor.at(layer);
    return f == 0 ? 1 : f * base_width;
  }

  /// Spatial size of each discriminator layer output for an HxW input.
  std::array<std::array<std::size_t, 2>, kDiscriminatorLayers> discriminator_shapes() const {
    std::array<std::array<std::size_t, 2>, kDiscriminatorLayers> out{};
    std::size_t h = height, w = width;
    for (std::size_t i = 0; i < kDiscriminatorLayers; ++i) {
      h = h ? nn::conv_output_size(h, kResamplingKernel, kDiscriminatorStrides[i],
                                   kResamplingPadding)
            : 0;
      w = w ? nn::conv_output_size(w, kResamplingKernel, kDiscriminatorStrides[i],
                                   kResamplingPadding)
            : 0;
      out[i] = {h, w};
    }
    return out;
  }

  void validate() const {
    if (height == 0 || width == 0 || height % 8 != 0 || width % 8 != 0)
      fail(ErrorKind::invalid_argument, "input size " + std::to_string(height) + "x" +
                                            std::to_string(width) + " must be divisible by 8");
    if (base_width == 0) fail(ErrorKind::invalid_argument, "base width must be >= 1");
    if (residual_kernel % 2 == 0)
      fail(ErrorKind::invalid_argument, "residual kernel must be odd");
    if (attention_layer < 1 || attention_layer > kDiscriminatorLayers)
      fail(ErrorKind::invalid_argument, "attention layer must be within 1..6");
    if (has_discriminator(kind)) {
      const auto shapes = discriminator_shapes();
      if (shapes.back()[0] < 1 || shapes.back()[1] < 1)
        fail(ErrorKind::invalid_argument,
             "input size " + std::to_string(height) + "x" + std::to_string(width) +
                 " is too small for the 6-layer discriminator (minimum 48x48)");
    }
  }
};

inline std::string_view to_string(nn::NormMode mode) {
  switch (mode) {
    case nn::NormMode::train: return "train";
    case nn::NormMode::eval: return "running";
    case nn::NormMode::batch_stats: return "batch";
  }
  return "batch";
}

inline nn::NormMode parse_inference_norm(std::string_view name) {
  if (name == "batch") return nn::NormMode::batch_stats;
  if (name == "running") return nn::NormMode::eval;
  fail(ErrorKind::invalid_argument, "unknown inference norm '" + std::string(name) + "'");
}

inline nlohmann::json to_json(const ModelConfig& c) {
  nlohmann::json strides = nlohmann::json::array();
  nlohmann::json channels = nlohmann::json::array();
  for (std::size_t i = 0; i < kDiscriminatorLayers; ++i) {
    strides.push_back(kDiscriminatorStrides[i]);
    channels.push_back(c.discriminator_channels(i));
  }
  return {
      {"model_kind", std::string(to_string(c.kind))},
      {"height", c.height},
      {"width", c.width},
      {"base_width", c.base_width},
      {"residual_blocks", c.residual_blocks},
      {"residual_kernel", c.residual_kernel},
      {"attention_layer", c.attention_layer},
      {"inference_norm", std::string(to_string(c.inference_norm))},
      {"normalization", "batch_norm"},
      {"generator",
       {{"encoder_channels", {c.base_width, 2 * c.base_width, 4 * c.base_width}},
        {"kernel", kResamplingKernel},
        {"stride", 2},
        {"padding", kResamplingPadding},
        {"output_activation", "tanh"}}},
      {"discriminator",
       {{"channels", channels},
        {"strides", strides},
        {"kernel", kResamplingKernel},
        {"padding", kResamplingPadding},
        {"score", "spatial_mean"}}},
  };
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.kind = parse_model_kind(j.at("model_kind").get<std::string>());
  c.height = j.at("height").get<std::size_t>();
  c.width = j.at("width").get<std::size_t>();
  c.base_width = j.at("base_width").get<std::size_t>();
  c.residual_blocks = j.at("residual_blocks").get<std::size_t>();
  c.residual_kernel = j.at("residual_kernel").get<std::size_t>();
  c.attention_layer = j.at("attention_layer").get<std::size_t>();
  c.inference_norm = parse_inference_norm(j.at("inference_norm").get<std::string>());
  c.validate();
  return c;
}

}  // namespace agct::gan
