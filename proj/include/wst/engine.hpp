#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <torch/torch.h>

#include "wst/backbone.hpp"
#include "wst/critic.hpp"
#include "wst/image.hpp"

namespace wst {

/// Which distribution distance serves as the style layer loss.
enum class Backend { wasserstein, gram_mmd, bn_matching };

std::string_view backend_name(Backend backend);  // "wasserstein" | "gram" | "bn"
Backend parse_backend(std::string_view name);    // also accepts "gram_mmd", "bn_matching"

enum class InitMode { content, noise };

std::string_view init_mode_name(InitMode mode);
InitMode parse_init_mode(std::string_view name);

struct StyleLayer {
  Layer layer;
  double weight;
};

/// Style layers conv1_1 .. conv<max_layer>_1, each weighted 1/max_layer.
std::vector<StyleLayer> uniform_style_layers(int max_layer);

struct TransferConfig {
  double alpha = 0.85;
  std::vector<StyleLayer> style_layers = uniform_style_layers(5);
  Layer content_layer = Layer::conv4_1;
  Backend backend = Backend::wasserstein;
  double image_lr = 2e-2;
  int64_t steps = 500;
  uint64_t seed = 0;
  int64_t snapshot_every = 50;
  InitMode init = InitMode::content;
  CriticConfig critic;

  /// Throws ConfigError when any invariant is violated.
  void validate() const;
};

/// One style source: a backbone layer, or the raw RGB pixels.
struct StyleSlot {
  std::optional<Layer> layer;  // empty means raw pixels
  double weight = 1.0;

  std::string name() const { return layer ? std::string(layer_name(*layer)) : "raw_pixels"; }
};

struct StepRecord {
  int64_t step = 0;
  double total = 0.0;
  double content = 0.0;
  // indexed by layer depth − 1; empty when the layer is not in use
  std::array<std::optional<double>, 5> style{}, critic_gap{}, penalty{};
  std::optional<double> style_raw, critic_gap_raw, penalty_raw;
  double seconds = 0.0;
};

class LossTrace {
 public:
  void append(StepRecord record);
  const std::vector<StepRecord>& records() const { return records_; }
  size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  /// Mean of `total` over the `window` records ending at 1-based `step`.
  double moving_average_total(int64_t step, int64_t window) const;

  static std::string csv_header(bool with_raw_pixels);
  static std::string csv_row(const StepRecord& record, bool with_raw_pixels);
  /// `step,total,content,style_l1..l5,critic_gap_l1..l5,gp_l1..l5`, plus
  /// `style_raw,critic_gap_raw,gp_raw` when raw pixels are in use. Unused
  /// layers are left blank. Wall-clock time is not written.
  void write_csv(std::ostream& out) const;

  bool uses_raw_pixels() const;

 private:
  std::vector<StepRecord> records_;
};

/// Per-layer style loss, dispatched on the backend. For `wasserstein` the
/// critic must be present and `real_batch` holds squashed style columns; the
/// generated features are squashed here. For the other backends the critic
/// must be absent. Throws ConfigError on a backend/critic mismatch.
torch::Tensor style_layer_loss(Backend backend, const torch::Tensor& generated,
                               const torch::Tensor& style, const Critic* critic = nullptr,
                               const torch::Tensor& real_batch = {});

struct LossBreakdown {
  torch::Tensor total;
  double content = 0.0;
  std::vector<double> style;  // one per slot, unweighted
};

/// α·Σ w_l·L_s^l + (1 − α)·L_c with precomputed per-slot style losses.
/// The content term is skipped entirely when α = 1.
LossBreakdown combine_losses(double alpha, const std::vector<StyleSlot>& slots,
                             const std::vector<torch::Tensor>& style_losses,
                             const torch::Tensor& content_loss_value);

/// Combined content + style objective over extracted features. `critics` is indexed
/// like cfg.style_layers and must be empty unless the backend is wasserstein;
/// `real_batches` likewise. Throws ConfigError when a needed layer is missing.
LossBreakdown total_loss(const TransferConfig& cfg, const FeatureSet& generated,
                         const FeatureSet& content, const FeatureSet& style,
                         const std::vector<const Critic*>& critics = {},
                         const std::vector<torch::Tensor>& real_batches = {});

struct Snapshot {
  int64_t step;
  Image image;
};

struct RunObserver {
  std::function<void(const StepRecord&)> on_step;
  std::function<void(const Snapshot&)> on_snapshot;
};

struct RunResult {
  Image image;
  LossTrace trace;
  std::vector<Snapshot> snapshots;
};

/// Optimises the generated image against the combined objective. Critics
/// (wasserstein only) are created fresh from cfg.seed and trained n_critic
/// times per layer per step on squashed, sampled batches before each image
/// step. Pixels are clamped to [0, 1] after every step. Throws
/// NumericalError with the step index and loss breakdown on a non-finite loss.
RunResult run_transfer(const TransferConfig& cfg, const Image& content, const Image& style,
                       const Backbone& backbone, const RunObserver& observer = {});

/// Style-only synthesis from noise (α must be 1, init must be noise) using
/// layers conv1_1 .. conv<max_layer>_1, or the raw pixels when max_layer is 0.
RunResult run_style_representation(const TransferConfig& cfg, const Image& style,
                                   const Backbone& backbone, int max_layer,
                                   const RunObserver& observer = {});

}  // namespace wst
