#include "wst/backbone.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <sstream>

#include "wst/errors.hpp"

namespace wst {

namespace {

// torchvision vgg19_bn `features` indices of the 16 convolutions; each is
// followed by BatchNorm2d at index+1 and ReLU at index+2.
constexpr std::array<int, 16> kConvIndices = {0,  3,  7,  10, 14, 17, 20, 23,
                                              27, 30, 33, 36, 40, 43, 46, 49};
constexpr std::array<int64_t, 16> kConvChannels = {64,  64,  128, 128, 256, 256, 256, 256,
                                                   512, 512, 512, 512, 512, 512, 512, 512};
// conv positions (0-based among the 16) preceded by a 2×2 max-pool.
constexpr std::array<int, 4> kPoolBefore = {2, 4, 8, 12};
// conv positions of conv1_1 .. conv5_1.
constexpr std::array<int, 5> kTapPositions = {0, 2, 4, 8, 12};
// The trunk is only evaluated up to conv5_1.
constexpr int kStagesKept = 13;

constexpr double kBnEps = 1e-5;

const char* kLayoutHint =
    "expected a torchvision vgg19_bn state dict saved with torch.save: "
    "features.<i>.weight/bias for convolutions i in {0,3,7,10,14,17,20,23,27,30,33,36,40,43,46,49} "
    "and features.<i+1>.weight/bias/running_mean/running_var for their batch norms";

bool is_pool_before(int position) {
  return std::find(kPoolBefore.begin(), kPoolBefore.end(), position) != kPoolBefore.end();
}

int64_t in_channels(int position) { return position == 0 ? 3 : kConvChannels[position - 1]; }

std::string key(int index, const char* field) {
  return "features." + std::to_string(index) + "." + field;
}

torch::Tensor fetch(const c10::impl::GenericDict& dict, const std::string& name,
                    at::IntArrayRef expected) {
  auto it = dict.find(name);
  if (it == dict.end()) throw LoadError("missing tensor '" + name + "'; " + kLayoutHint);
  if (!it->value().isTensor()) throw LoadError("'" + name + "' is not a tensor; " + kLayoutHint);
  auto t = it->value().toTensor();
  if (t.sizes() != expected) {
    std::ostringstream msg;
    msg << "tensor '" << name << "' has shape " << t.sizes() << ", expected " << expected << "; "
        << kLayoutHint;
    throw LoadError(msg.str());
  }
  t = t.detach().to(torch::kFloat32).contiguous().clone();
  if (!torch::isfinite(t).all().item<bool>())
    throw LoadError("tensor '" + name + "' contains non-finite values");
  return t;
}

// Smooth random fields plus a few stripe patterns, used only to calibrate the
// surrogate batch-norm statistics.
torch::Tensor calibration_images(at::Generator& gen) {
  const int64_t side = 64;
  std::vector<torch::Tensor> images;
  for (int64_t coarse : {4, 8, 16, 32}) {
    for (int rep = 0; rep < 2; ++rep) {
      auto base = torch::rand({1, 3, coarse, coarse}, gen);
      auto up = torch::upsample_bilinear2d(base, {side, side}, false);
      images.push_back(up);
    }
  }
  auto ramp = torch::linspace(0, 1, side).view({1, 1, 1, side});
  for (double freq : {2.0, 5.0, 11.0}) {
    auto phase = torch::rand({1, 3, 1, 1}, gen) * 6.2831853;
    auto rows = torch::linspace(0, 1, side).view({1, 1, side, 1});
    images.push_back(0.5 + 0.5 * torch::sin(freq * 6.2831853 * (ramp + 0.5 * rows) + phase));
  }
  return torch::cat(images, 0).clamp(0.0, 1.0).to(torch::kFloat32);
}

}  // namespace

std::string_view layer_name(Layer layer) {
  switch (layer) {
    case Layer::conv1_1: return "conv1_1";
    case Layer::conv2_1: return "conv2_1";
    case Layer::conv3_1: return "conv3_1";
    case Layer::conv4_1: return "conv4_1";
    case Layer::conv5_1: return "conv5_1";
  }
  return "?";
}

Layer parse_layer(std::string_view name) {
  for (Layer layer : kCanonicalLayers)
    if (layer_name(layer) == name) return layer;
  throw ConfigError("unknown layer '" + std::string(name) +
                    "'; expected one of conv1_1, conv2_1, conv3_1, conv4_1, conv5_1");
}

int64_t layer_channels(Layer layer) {
  return kConvChannels[kTapPositions[static_cast<int>(layer)]];
}

FeatureMatrix::FeatureMatrix(std::string layer, torch::Tensor values)
    : layer_(std::move(layer)), values_(std::move(values)) {
  if (values_.dim() != 2 || values_.size(1) < 1)
    throw DimensionError("feature matrix must be N x M with M >= 1");
}

Backbone Backbone::load(const std::filesystem::path& weights) {
  std::ifstream in(weights, std::ios::binary);
  if (!in) throw LoadError("cannot open weights file '" + weights.string() + "'; " + kLayoutHint);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  c10::IValue root;
  try {
    root = torch::pickle_load(bytes);
  } catch (const std::exception& e) {
    throw LoadError("cannot deserialize '" + weights.string() + "' (" +
                    std::string(e.what()).substr(0, 200) + "); " + kLayoutHint);
  }
  if (!root.isGenericDict())
    throw LoadError("'" + weights.string() + "' does not hold a state dict; " + kLayoutHint);
  const auto dict = root.toGenericDict();

  Backbone backbone;
  for (int pos = 0; pos < static_cast<int>(kConvIndices.size()); ++pos) {
    const int conv = kConvIndices[pos];
    const int bn = conv + 1;
    const int64_t out = kConvChannels[pos];
    Stage stage;
    stage.conv_weight = fetch(dict, key(conv, "weight"), {out, in_channels(pos), 3, 3});
    stage.conv_bias = fetch(dict, key(conv, "bias"), {out});
    stage.bn_weight = fetch(dict, key(bn, "weight"), {out});
    stage.bn_bias = fetch(dict, key(bn, "bias"), {out});
    stage.bn_mean = fetch(dict, key(bn, "running_mean"), {out});
    stage.bn_var = fetch(dict, key(bn, "running_var"), {out});
    if ((stage.bn_var < 0).any().item<bool>())
      throw LoadError("negative running_var in '" + key(bn, "running_var") + "'");
    stage.pool_before = is_pool_before(pos);
    auto tap = std::find(kTapPositions.begin(), kTapPositions.end(), pos);
    stage.tap = tap == kTapPositions.end() ? -1 : static_cast<int>(tap - kTapPositions.begin());
    if (pos < kStagesKept) backbone.stages_.push_back(std::move(stage));
  }
  backbone.mean_ = torch::tensor({kMean[0], kMean[1], kMean[2]}).view({1, 3, 1, 1});
  backbone.std_ = torch::tensor({kStd[0], kStd[1], kStd[2]}).view({1, 3, 1, 1});
  return backbone;
}

FeatureSet Backbone::extract(const torch::Tensor& pixels, std::span<const Layer> layers) const {
  if (layers.empty()) return {};
  torch::Tensor x = pixels;
  if (x.dim() == 3) x = x.unsqueeze(0);
  if (x.dim() != 4 || x.size(0) != 1 || x.size(1) != 3) {
    std::ostringstream msg;
    msg << "backbone input must be 1x3xHxW, got " << pixels.sizes();
    throw DimensionError(msg.str());
  }
  if (x.size(2) < kMinSide || x.size(3) < kMinSide) {
    std::ostringstream msg;
    msg << "image " << x.size(2) << "x" << x.size(3) << " is too small; each side must be at least "
        << kMinSide << " pixels";
    throw DimensionError(msg.str());
  }

  std::array<bool, 5> wanted{};
  int deepest = -1;
  for (Layer layer : layers) {
    const int idx = static_cast<int>(layer);
    if (idx < 0 || idx >= 5) throw ConfigError("unknown layer requested from backbone");
    wanted[idx] = true;
    deepest = std::max(deepest, idx);
  }

  FeatureSet out;
  x = (x.to(torch::kFloat32) - mean_) / std_;
  for (const Stage& stage : stages_) {
    if (stage.pool_before) {
      if (x.size(2) < 2 || x.size(3) < 2)
        throw DimensionError("image too small for the requested layer depth");
      x = torch::max_pool2d(x, {2, 2}, {2, 2});
    }
    x = torch::conv2d(x, stage.conv_weight, stage.conv_bias, 1, 1);
    x = torch::batch_norm(x, stage.bn_weight, stage.bn_bias, stage.bn_mean, stage.bn_var,
                          /*training=*/false, /*momentum=*/0.0, kBnEps, /*cudnn_enabled=*/false);
    if (stage.tap >= 0 && wanted[stage.tap]) {
      const Layer layer = kCanonicalLayers[stage.tap];
      out.emplace(layer, FeatureMatrix(std::string(layer_name(layer)),
                                       x.reshape({x.size(1), x.size(2) * x.size(3)})));
      if (stage.tap == deepest) break;
    }
    x = torch::relu(x);
  }
  return out;
}

FeatureSet Backbone::extract(const Image& image, std::span<const Layer> layers) const {
  return extract(image.pixels().unsqueeze(0), layers);
}

FeatureMatrix raw_pixel_features(const torch::Tensor& pixels) {
  torch::Tensor x = pixels.dim() == 4 ? pixels.squeeze(0) : pixels;
  if (x.dim() != 3 || x.size(0) != 3) throw DimensionError("raw pixel features need a 3xHxW image");
  return FeatureMatrix("raw_pixels", x.reshape({3, x.size(1) * x.size(2)}));
}

FeatureMatrix raw_pixel_features(const Image& image) { return raw_pixel_features(image.pixels()); }

Image image_from_pixel_features(const FeatureMatrix& features, int64_t height, int64_t width) {
  if (features.channels() != 3 || features.positions() != height * width)
    throw DimensionError("pixel feature matrix does not match the requested image size");
  return Image(features.values().reshape({3, height, width}));
}

void write_surrogate_checkpoint(const std::filesystem::path& path, uint64_t seed) {
  torch::NoGradGuard no_grad;
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
  c10::Dict<std::string, at::Tensor> state;

  auto x = calibration_images(gen);
  x = (x - torch::tensor({Backbone::kMean[0], Backbone::kMean[1], Backbone::kMean[2]}).view({1, 3, 1, 1})) /
      torch::tensor({Backbone::kStd[0], Backbone::kStd[1], Backbone::kStd[2]}).view({1, 3, 1, 1});

  for (int pos = 0; pos < static_cast<int>(kConvIndices.size()); ++pos) {
    const int conv = kConvIndices[pos];
    const int bn = conv + 1;
    const int64_t out = kConvChannels[pos];
    const int64_t in = in_channels(pos);

    // kaiming-normal, fan_out mode, as torchvision initialises VGG
    const double std = std::sqrt(2.0 / static_cast<double>(out * 9));
    auto weight = torch::randn({out, in, 3, 3}, gen) * std;
    auto bias = torch::zeros({out});
    auto gamma = 0.5 + torch::rand({out}, gen);
    auto beta = 0.5 * torch::randn({out}, gen);

    if (is_pool_before(pos)) x = torch::max_pool2d(x, {2, 2}, {2, 2});
    auto y = torch::conv2d(x, weight, bias, 1, 1);
    auto running_mean = y.mean({0, 2, 3});
    auto running_var = y.var({0, 2, 3}, /*unbiased=*/true);
    x = torch::relu(torch::batch_norm(y, gamma, beta, running_mean, running_var, false, 0.0, kBnEps,
                                      false));

    state.insert(key(conv, "weight"), weight.contiguous());
    state.insert(key(conv, "bias"), bias);
    state.insert(key(bn, "weight"), gamma.contiguous());
    state.insert(key(bn, "bias"), beta.contiguous());
    state.insert(key(bn, "running_mean"), running_mean.contiguous());
    state.insert(key(bn, "running_var"), running_var.contiguous());
    state.insert(key(bn, "num_batches_tracked"), torch::tensor(int64_t{1}));
  }

  const auto bytes = torch::pickle_save(c10::IValue(state));
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw LoadError("cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw LoadError("short write to '" + path.string() + "'");
}

}  // namespace wst
