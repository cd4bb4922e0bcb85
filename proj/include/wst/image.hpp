#pragma once

#include <cstdint>

#include <torch/torch.h>

namespace wst {

/// An RGB image stored as a 3×H×W float32 tensor with values in [0, 1].
class Image {
 public:
  Image() = default;

  /// Takes a 3×H×W (or 1×3×H×W) tensor. Throws DimensionError on a bad shape
  /// and std::invalid_argument on values outside [0, 1] or non-finite values.
  explicit Image(torch::Tensor pixels);

  /// Uniform noise in [0, 1), reproducible from `seed`.
  static Image uniform_noise(int64_t height, int64_t width, uint64_t seed);

  /// Every pixel set to the same colour.
  static Image constant(int64_t height, int64_t width, float r, float g, float b);

  int64_t height() const { return pixels_.size(1); }
  int64_t width() const { return pixels_.size(2); }
  bool empty() const { return !pixels_.defined(); }

  const torch::Tensor& pixels() const { return pixels_; }

  /// A fresh 1×3×H×W copy, detached from this image's storage.
  torch::Tensor batch() const { return pixels_.unsqueeze(0).clone(); }

  bool operator==(const Image& other) const;

 private:
  torch::Tensor pixels_;
};

}  // namespace wst
