#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <torch/torch.h>

namespace wst {

struct CriticConfig {
  double lambda_gp = 10.0;
  double learning_rate = 5e-4;
  int64_t batch_size = 1024;
  int n_critic = 1;

  /// Throws ConfigError on λ_gp < 0, batch_size < 2, n_critic < 1 or a
  /// non-positive learning rate.
  void validate() const;
};

struct CriticStepRecord {
  double gap = 0.0;      // mean c(real) − mean c(fake) before the step
  double penalty = 0.0;  // gradient penalty before the step
  double loss = 0.0;     // −gap + λ·penalty
};

/// Scalar-output MLP critic for one style layer: input width N, three ReLU
/// hidden layers of width 256, linear output. Owns its Adam state and the
/// random stream used for batch sampling and penalty interpolation.
///
/// Single owner; move-only.
class Critic {
 public:
  static constexpr int64_t kHiddenWidth = 256;
  static constexpr int kHiddenLayers = 3;

  Critic(int64_t input_width, std::string layer, uint64_t seed, double learning_rate);

  Critic(Critic&&) noexcept;
  Critic& operator=(Critic&&) noexcept;
  Critic(const Critic&) = delete;
  Critic& operator=(const Critic&) = delete;
  ~Critic();

  /// Scores each column of an N×B batch; returns a length-B vector.
  torch::Tensor operator()(const torch::Tensor& columns) const;

  int64_t input_width() const { return input_width_; }
  const std::string& layer() const { return layer_; }
  int64_t steps_taken() const { return steps_; }
  at::Generator& rng() { return rng_; }

  std::vector<torch::Tensor> parameters() const;

 private:
  friend CriticStepRecord critic_update(Critic&, const CriticConfig&, const torch::Tensor&,
                                        const torch::Tensor&);

  struct Net;
  int64_t input_width_;
  std::string layer_;
  at::Generator rng_;
  std::shared_ptr<Net> net_;
  std::unique_ptr<torch::optim::Adam> optimizer_;
  int64_t steps_ = 0;
};

/// Any differentiable map from an N×B batch to B scores.
using CriticFn = std::function<torch::Tensor(const torch::Tensor&)>;

/// Elementwise tanh; keeps critic inputs bounded.
torch::Tensor squash_features(const torch::Tensor& features);

/// `batch_size` columns drawn uniformly with replacement.
torch::Tensor sample_feature_batch(const torch::Tensor& features, int64_t batch_size,
                                   at::Generator& rng);

/// mean c(real) − mean c(fake): the critic's Wasserstein-1 estimate.
/// Differentiable with respect to both batches.
torch::Tensor critic_value_gap(const Critic& critic, const torch::Tensor& real,
                               const torch::Tensor& fake);

/// mean over columns of (‖∇c(x̂)‖₂ − 1)² at x̂ = u·real + (1−u)·fake, one
/// u ~ U[0,1) per column pair. The graph is kept so the result can be
/// differentiated again with respect to the critic's parameters.
torch::Tensor gradient_penalty(const CriticFn& critic, const torch::Tensor& real,
                               const torch::Tensor& fake, at::Generator& rng);
torch::Tensor gradient_penalty(const Critic& critic, const torch::Tensor& real,
                               const torch::Tensor& fake, at::Generator& rng);

/// One Adam step on  mean c(fake) − mean c(real) + λ·penalty.
/// Both batches are detached first, so no gradient reaches whatever produced
/// them. Throws NumericalError (carrying the critic's step index) when the
/// loss or the updated parameters are non-finite.
CriticStepRecord critic_update(Critic& critic, const CriticConfig& config,
                               const torch::Tensor& real_batch, const torch::Tensor& fake_batch);

}  // namespace wst
