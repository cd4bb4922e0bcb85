#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <torch/torch.h>

#include "wst/image.hpp"

namespace wst {

/// The canonical VGG19 layers used for style and content terms.
enum class Layer { conv1_1, conv2_1, conv3_1, conv4_1, conv5_1 };

inline constexpr std::array<Layer, 5> kCanonicalLayers = {
    Layer::conv1_1, Layer::conv2_1, Layer::conv3_1, Layer::conv4_1, Layer::conv5_1};

std::string_view layer_name(Layer layer);

/// Throws ConfigError for anything outside conv1_1..conv5_1.
Layer parse_layer(std::string_view name);

/// 1 for conv1_1 ... 5 for conv5_1.
inline int layer_depth(Layer layer) { return static_cast<int>(layer) + 1; }

/// Number of channels produced at `layer`.
int64_t layer_channels(Layer layer);

/// Features of one layer laid out as N×M: row i is channel i, column j is the
/// activation vector at one spatial position of the feature map.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::string layer, torch::Tensor values);

  const std::string& layer() const { return layer_; }
  const torch::Tensor& values() const { return values_; }
  int64_t channels() const { return values_.size(0); }
  int64_t positions() const { return values_.size(1); }

 private:
  std::string layer_;
  torch::Tensor values_;
};

using FeatureSet = std::map<Layer, FeatureMatrix>;

/// Frozen VGG19-BN convolutional trunk up to conv5_1, inference mode only.
///
/// Cheap to copy (weights are shared, never written after load). Extraction
/// is a pure function of the input, so one instance may serve several threads.
class Backbone {
 public:
  /// Loads a torchvision `vgg19_bn` state dict saved with `torch.save`.
  /// Throws LoadError naming the expected layout when the file is missing,
  /// truncated, or does not contain the VGG19-BN feature tensors.
  static Backbone load(const std::filesystem::path& weights);

  /// Differentiable extraction. `pixels` is 1×3×H×W (or 3×H×W) in [0, 1];
  /// gradients flow back to it when it requires grad.
  FeatureSet extract(const torch::Tensor& pixels, std::span<const Layer> layers) const;
  FeatureSet extract(const Image& image, std::span<const Layer> layers) const;

  /// Per-channel ImageNet normalization applied before the first convolution.
  static constexpr std::array<float, 3> kMean = {0.485f, 0.456f, 0.406f};
  static constexpr std::array<float, 3> kStd = {0.229f, 0.224f, 0.225f};

  /// Smallest accepted input side.
  static constexpr int64_t kMinSide = 32;

 private:
  struct Stage {
    torch::Tensor conv_weight, conv_bias;
    torch::Tensor bn_weight, bn_bias, bn_mean, bn_var;
    bool pool_before = false;
    int tap = -1;  // index into kCanonicalLayers, or -1
  };

  std::vector<Stage> stages_;
  torch::Tensor mean_, std_;
};

inline Backbone load_backbone(const std::filesystem::path& weights) {
  return Backbone::load(weights);
}

inline FeatureSet extract_features(const Backbone& backbone, const torch::Tensor& pixels,
                                   std::span<const Layer> layers) {
  return backbone.extract(pixels, layers);
}

/// 3×(H·W) matrix whose columns are the RGB values of each pixel (row-major
/// pixel order). Differentiable when `pixels` requires grad.
FeatureMatrix raw_pixel_features(const torch::Tensor& pixels);
FeatureMatrix raw_pixel_features(const Image& image);

/// Inverse of raw_pixel_features for an image of the given size.
Image image_from_pixel_features(const FeatureMatrix& features, int64_t height, int64_t width);

/// Writes a randomly initialised VGG19-BN checkpoint with the torchvision key
/// layout (`features.<i>.weight`, ...). Batch-norm running statistics are
/// calibrated on procedural images so that activations stay normalised.
void write_surrogate_checkpoint(const std::filesystem::path& path, uint64_t seed);

}  // namespace wst
