#include "wst/image.hpp"

#include <sstream>
#include <stdexcept>

#include "wst/errors.hpp"

namespace wst {

Image::Image(torch::Tensor pixels) {
  if (pixels.dim() == 4 && pixels.size(0) == 1) pixels = pixels.squeeze(0);
  if (pixels.dim() != 3 || pixels.size(0) != 3 || pixels.size(1) < 1 || pixels.size(2) < 1) {
    std::ostringstream msg;
    msg << "image must be 3xHxW, got " << pixels.sizes();
    throw DimensionError(msg.str());
  }
  pixels = pixels.detach().to(torch::kFloat32).contiguous();
  if (!torch::isfinite(pixels).all().item<bool>())
    throw std::invalid_argument("image contains non-finite values");
  if (pixels.min().item<float>() < 0.0f || pixels.max().item<float>() > 1.0f)
    throw std::invalid_argument("image values must lie in [0, 1]");
  pixels_ = std::move(pixels);
}

Image Image::uniform_noise(int64_t height, int64_t width, uint64_t seed) {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
  return Image(torch::rand({3, height, width}, gen, torch::kFloat32));
}

Image Image::constant(int64_t height, int64_t width, float r, float g, float b) {
  auto rgb = torch::tensor({r, g, b}, torch::kFloat32).view({3, 1, 1});
  return Image(rgb.expand({3, height, width}).clone());
}

bool Image::operator==(const Image& other) const {
  if (empty() || other.empty()) return empty() == other.empty();
  return pixels_.sizes() == other.pixels_.sizes() && torch::equal(pixels_, other.pixels_);
}

}  // namespace wst
