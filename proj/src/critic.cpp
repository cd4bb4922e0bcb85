#include "wst/critic.hpp"

#include <cmath>
#include <sstream>

#include "wst/errors.hpp"

namespace wst {

struct Critic::Net : torch::nn::Module {
  Net(int64_t input_width, at::Generator& gen)
      : hidden1(register_module("hidden1", torch::nn::Linear(input_width, kHiddenWidth))),
        hidden2(register_module("hidden2", torch::nn::Linear(kHiddenWidth, kHiddenWidth))),
        hidden3(register_module("hidden3", torch::nn::Linear(kHiddenWidth, kHiddenWidth))),
        output(register_module("output", torch::nn::Linear(kHiddenWidth, 1))) {
    // Same U(±1/√fan_in) scheme as torch's Linear default, but drawn from the
    // critic's own stream so runs do not depend on the global RNG.
    torch::NoGradGuard no_grad;
    for (auto* linear : {&hidden1, &hidden2, &hidden3, &output}) {
      const double bound = 1.0 / std::sqrt(static_cast<double>((*linear)->weight.size(1)));
      (*linear)->weight.uniform_(-bound, bound, gen);
      (*linear)->bias.uniform_(-bound, bound, gen);
    }
  }

  torch::Tensor forward(const torch::Tensor& rows) {
    auto h = torch::relu(hidden1(rows));
    h = torch::relu(hidden2(h));
    h = torch::relu(hidden3(h));
    return output(h).squeeze(1);
  }

  torch::nn::Linear hidden1, hidden2, hidden3, output;
};

void CriticConfig::validate() const {
  if (!(lambda_gp >= 0.0) || !std::isfinite(lambda_gp))
    throw ConfigError("lambda_gp must be finite and >= 0");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw ConfigError("critic_lr must be finite and > 0");
  if (batch_size < 2) throw ConfigError("critic_batch must be >= 2");
  if (n_critic < 1) throw ConfigError("n_critic must be >= 1");
}

Critic::Critic(int64_t input_width, std::string layer, uint64_t seed, double learning_rate)
    : input_width_(input_width),
      layer_(std::move(layer)),
      rng_(at::make_generator<at::CPUGeneratorImpl>(seed)) {
  if (input_width < 1) throw DimensionError("critic input width must be >= 1");
  net_ = std::make_shared<Net>(input_width, rng_);
  optimizer_ = std::make_unique<torch::optim::Adam>(net_->parameters(),
                                                    torch::optim::AdamOptions(learning_rate));
}

Critic::Critic(Critic&&) noexcept = default;
Critic& Critic::operator=(Critic&&) noexcept = default;
Critic::~Critic() = default;

torch::Tensor Critic::operator()(const torch::Tensor& columns) const {
  if (columns.dim() != 2 || columns.size(0) != input_width_) {
    std::ostringstream msg;
    msg << "critic for " << layer_ << " expects " << input_width_ << " x B input, got "
        << columns.sizes();
    throw DimensionError(msg.str());
  }
  return net_->forward(columns.t().to(torch::kFloat32));
}

std::vector<torch::Tensor> Critic::parameters() const { return net_->parameters(); }

torch::Tensor squash_features(const torch::Tensor& features) { return torch::tanh(features); }

torch::Tensor sample_feature_batch(const torch::Tensor& features, int64_t batch_size,
                                   at::Generator& rng) {
  if (features.dim() != 2 || features.size(1) < 1)
    throw DimensionError("cannot sample from an empty feature matrix");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  auto index = torch::randint(features.size(1), {batch_size}, rng, torch::kLong);
  return features.index_select(1, index);
}

torch::Tensor critic_value_gap(const Critic& critic, const torch::Tensor& real,
                               const torch::Tensor& fake) {
  return critic(real).mean() - critic(fake).mean();
}

torch::Tensor gradient_penalty(const CriticFn& critic, const torch::Tensor& real,
                               const torch::Tensor& fake, at::Generator& rng) {
  if (real.sizes() != fake.sizes() || real.dim() != 2)
    throw DimensionError("gradient penalty needs two batches of identical N x B shape");
  auto u = torch::rand({1, real.size(1)}, rng, real.scalar_type());
  auto mixed = (u * real.detach() + (1 - u) * fake.detach()).requires_grad_(true);
  auto scores = critic(mixed);
  torch::Tensor grads;
  // a critic that ignores its input has no graph back to it: gradient zero
  if (scores.requires_grad())
    grads = torch::autograd::grad({scores.sum()}, {mixed}, {}, /*retain_graph=*/true,
                                  /*create_graph=*/true, /*allow_unused=*/true)[0];
  if (!grads.defined()) grads = torch::zeros_like(mixed);
  auto norms = grads.square().sum(0).sqrt();
  return (norms - 1).square().mean();
}

torch::Tensor gradient_penalty(const Critic& critic, const torch::Tensor& real,
                               const torch::Tensor& fake, at::Generator& rng) {
  return gradient_penalty([&critic](const torch::Tensor& x) { return critic(x); }, real, fake,
                          rng);
}

CriticStepRecord critic_update(Critic& critic, const CriticConfig& config,
                               const torch::Tensor& real_batch, const torch::Tensor& fake_batch) {
  auto real = real_batch.detach().to(torch::kFloat32);
  auto fake = fake_batch.detach().to(torch::kFloat32);

  auto gap = critic_value_gap(critic, real, fake);
  auto penalty = config.lambda_gp > 0.0 ? gradient_penalty(critic, real, fake, critic.rng())
                                        : torch::zeros({});
  auto loss = -gap + config.lambda_gp * penalty;

  CriticStepRecord record{gap.item<double>(), penalty.item<double>(), loss.item<double>()};
  if (!std::isfinite(record.loss)) {
    std::ostringstream msg;
    msg << "critic " << critic.layer() << ": non-finite loss at critic step " << critic.steps_
        << " (gap " << record.gap << ", penalty " << record.penalty << ")";
    throw NumericalError(msg.str(), critic.steps_);
  }

  critic.optimizer_->zero_grad();
  loss.backward();
  critic.optimizer_->step();
  for (const auto& p : critic.parameters()) {
    if (!torch::isfinite(p).all().item<bool>()) {
      std::ostringstream msg;
      msg << "critic " << critic.layer() << ": non-finite parameters after critic step "
          << critic.steps_;
      throw NumericalError(msg.str(), critic.steps_);
    }
  }
  ++critic.steps_;
  return record;
}

}  // namespace wst
