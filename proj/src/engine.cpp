#include "wst/engine.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "wst/distances.hpp"
#include "wst/errors.hpp"

namespace wst {

namespace {

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent stream per critic slot so layer order never couples their draws.
uint64_t critic_seed(uint64_t run_seed, size_t slot) {
  return splitmix64(splitmix64(run_seed) + 0x51ed2701ULL * (slot + 1));
}

std::string format_number(double v) {
  std::ostringstream out;
  out << std::setprecision(10) << v;
  return out.str();
}

std::string breakdown_message(int64_t step, const std::vector<StyleSlot>& slots,
                              const LossBreakdown& parts) {
  std::ostringstream msg;
  msg << "non-finite loss at step " << step << ": total "
      << (parts.total.defined() ? parts.total.item<double>() : NAN) << ", content " << parts.content;
  for (size_t k = 0; k < slots.size() && k < parts.style.size(); ++k)
    msg << ", style[" << slots[k].name() << "] " << parts.style[k];
  return msg.str();
}

torch::Tensor slot_features(const StyleSlot& slot, const FeatureSet& features,
                            const torch::Tensor& pixels) {
  if (!slot.layer) return raw_pixel_features(pixels).values();
  auto it = features.find(*slot.layer);
  if (it == features.end())
    throw ConfigError("features for layer " + slot.name() + " were not extracted");
  return it->second.values();
}

struct RunSetup {
  TransferConfig cfg;
  std::vector<StyleSlot> slots;
  Image init;
  const Image* content = nullptr;  // null when α = 1
  const Image* style = nullptr;
};

RunResult optimize(const RunSetup& setup, const Backbone& backbone, const RunObserver& observer) {
  const TransferConfig& cfg = setup.cfg;
  const auto& slots = setup.slots;
  const bool use_content = cfg.alpha < 1.0;
  const bool wasserstein = cfg.backend == Backend::wasserstein;

  std::vector<Layer> layers;
  for (const auto& slot : slots)
    if (slot.layer) layers.push_back(*slot.layer);
  if (use_content) layers.push_back(cfg.content_layer);

  // Targets are computed once; the style and content images never change.
  std::vector<torch::Tensor> style_targets, style_squashed;
  torch::Tensor content_target;
  {
    torch::NoGradGuard no_grad;
    const auto style_pixels = setup.style->pixels().unsqueeze(0);
    const auto style_features = backbone.extract(style_pixels, layers);
    for (const auto& slot : slots) {
      style_targets.push_back(slot_features(slot, style_features, style_pixels).clone());
      if (wasserstein) style_squashed.push_back(squash_features(style_targets.back()));
    }
    if (use_content) {
      const Layer content_layer[] = {cfg.content_layer};
      content_target =
          backbone.extract(*setup.content, content_layer).at(cfg.content_layer).values().clone();
    }
  }
  if (cfg.backend == Backend::gram_mmd) {
    if (setup.style->height() != setup.init.height() || setup.style->width() != setup.init.width())
      throw DimensionError("the gram backend needs style and generated images of the same size");
  }

  std::vector<Critic> critics;
  if (wasserstein) {
    for (size_t k = 0; k < slots.size(); ++k)
      critics.emplace_back(style_targets[k].size(0), slots[k].name(), critic_seed(cfg.seed, k),
                           cfg.critic.learning_rate);
  }

  torch::Tensor pixels = setup.init.batch().requires_grad_(true);
  torch::optim::Adam optimizer({pixels}, torch::optim::AdamOptions(cfg.image_lr));

  RunResult result;
  for (int64_t step = 1; step <= cfg.steps; ++step) {
    const auto started = std::chrono::steady_clock::now();
    StepRecord record;
    record.step = step;

    const auto features = backbone.extract(pixels, layers);
    std::vector<torch::Tensor> generated;
    for (const auto& slot : slots) generated.push_back(slot_features(slot, features, pixels));

    std::vector<torch::Tensor> real_batches(slots.size());
    std::vector<CriticStepRecord> critic_records(slots.size());
    if (wasserstein) {
      for (size_t k = 0; k < slots.size(); ++k) {
        Critic& critic = critics[k];
        const auto fake_all = squash_features(generated[k].detach());
        for (int r = 0; r < cfg.critic.n_critic; ++r) {
          auto real = sample_feature_batch(style_squashed[k], cfg.critic.batch_size, critic.rng());
          auto fake = sample_feature_batch(fake_all, cfg.critic.batch_size, critic.rng());
          try {
            critic_records[k] = critic_update(critic, cfg.critic, real, fake);
          } catch (const NumericalError& e) {
            throw NumericalError(std::string(e.what()) + " during image step " + std::to_string(step),
                                 step);
          }
          real_batches[k] = std::move(real);
        }
      }
    }

    std::vector<torch::Tensor> style_losses;
    for (size_t k = 0; k < slots.size(); ++k) {
      style_losses.push_back(style_layer_loss(cfg.backend, generated[k], style_targets[k],
                                              wasserstein ? &critics[k] : nullptr,
                                              wasserstein ? real_batches[k] : torch::Tensor()));
    }
    torch::Tensor content_value;
    if (use_content) {
      const auto& f = features.at(cfg.content_layer).values();
      content_value = content_loss(f, content_target);
    }
    auto parts = combine_losses(cfg.alpha, slots, style_losses, content_value);

    bool finite = std::isfinite(parts.total.item<double>()) && std::isfinite(parts.content);
    for (double s : parts.style) finite = finite && std::isfinite(s);
    if (!finite) throw NumericalError(breakdown_message(step, slots, parts), step);

    optimizer.zero_grad();
    parts.total.backward({}, std::nullopt, false, std::vector<torch::Tensor>{pixels});
    optimizer.step();
    {
      torch::NoGradGuard no_grad;
      pixels.clamp_(0.0, 1.0);
    }

    record.total = parts.total.item<double>();
    record.content = parts.content;
    for (size_t k = 0; k < slots.size(); ++k) {
      std::optional<double> gap, penalty;
      if (wasserstein) gap = critic_records[k].gap, penalty = critic_records[k].penalty;
      if (slots[k].layer) {
        const int idx = layer_depth(*slots[k].layer) - 1;
        record.style[idx] = parts.style[k];
        record.critic_gap[idx] = gap;
        record.penalty[idx] = penalty;
      } else {
        record.style_raw = parts.style[k];
        record.critic_gap_raw = gap;
        record.penalty_raw = penalty;
      }
    }
    record.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.trace.append(record);
    if (observer.on_step) observer.on_step(record);

    if (cfg.snapshot_every > 0 && step % cfg.snapshot_every == 0) {
      Snapshot snap{step, Image(pixels.detach().squeeze(0).clone())};
      if (observer.on_snapshot) observer.on_snapshot(snap);
      result.snapshots.push_back(std::move(snap));
    }
  }
  result.image = Image(pixels.detach().squeeze(0).clone());
  return result;
}

}  // namespace

std::string_view backend_name(Backend backend) {
  switch (backend) {
    case Backend::wasserstein: return "wasserstein";
    case Backend::gram_mmd: return "gram";
    case Backend::bn_matching: return "bn";
  }
  return "?";
}

Backend parse_backend(std::string_view name) {
  if (name == "wasserstein") return Backend::wasserstein;
  if (name == "gram" || name == "gram_mmd") return Backend::gram_mmd;
  if (name == "bn" || name == "bn_matching") return Backend::bn_matching;
  throw ConfigError("unknown backend '" + std::string(name) + "'; expected wasserstein, gram or bn");
}

std::string_view init_mode_name(InitMode mode) {
  return mode == InitMode::content ? "content" : "noise";
}

InitMode parse_init_mode(std::string_view name) {
  if (name == "content") return InitMode::content;
  if (name == "noise") return InitMode::noise;
  throw ConfigError("unknown init mode '" + std::string(name) + "'; expected content or noise");
}

std::vector<StyleLayer> uniform_style_layers(int max_layer) {
  if (max_layer < 1 || max_layer > 5) throw ConfigError("layer depth must be between 1 and 5");
  std::vector<StyleLayer> layers;
  for (int k = 0; k < max_layer; ++k) layers.push_back({kCanonicalLayers[k], 1.0 / max_layer});
  return layers;
}

void TransferConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
  if (steps < 1) throw ConfigError("steps must be >= 1");
  if (!(image_lr > 0.0) || !std::isfinite(image_lr)) throw ConfigError("image_lr must be > 0");
  if (snapshot_every < 0) throw ConfigError("snapshot_every must be >= 0");
  double weight_sum = 0.0;
  for (size_t i = 0; i < style_layers.size(); ++i) {
    const auto& sl = style_layers[i];
    if (static_cast<int>(sl.layer) < 0 || static_cast<int>(sl.layer) > 4)
      throw ConfigError("style layer outside conv1_1..conv5_1");
    if (!(sl.weight >= 0.0) || !std::isfinite(sl.weight))
      throw ConfigError("style layer weights must be finite and >= 0");
    for (size_t j = 0; j < i; ++j)
      if (style_layers[j].layer == sl.layer)
        throw ConfigError("style layer " + std::string(layer_name(sl.layer)) + " listed twice");
    weight_sum += sl.weight;
  }
  if (alpha > 0.0 && !(weight_sum > 0.0))
    throw ConfigError("style layer weights must sum to > 0 when alpha > 0");
  if (backend == Backend::wasserstein) critic.validate();
}

void LossTrace::append(StepRecord record) {
  if (!records_.empty() && record.step != records_.back().step + 1)
    throw std::logic_error("loss trace steps must be consecutive");
  records_.push_back(std::move(record));
}

double LossTrace::moving_average_total(int64_t step, int64_t window) const {
  if (window < 1 || step < 1 || step > static_cast<int64_t>(records_.size()))
    throw std::out_of_range("moving average window outside the trace");
  const int64_t first = std::max<int64_t>(1, step - window + 1);
  double sum = 0.0;
  for (int64_t s = first; s <= step; ++s) sum += records_[s - 1].total;
  return sum / static_cast<double>(step - first + 1);
}

bool LossTrace::uses_raw_pixels() const {
  for (const auto& r : records_)
    if (r.style_raw) return true;
  return false;
}

std::string LossTrace::csv_header(bool with_raw_pixels) {
  std::string header = "step,total,content";
  for (const char* prefix : {"style_l", "critic_gap_l", "gp_l"})
    for (int k = 1; k <= 5; ++k) header += "," + std::string(prefix) + std::to_string(k);
  if (with_raw_pixels) header += ",style_raw,critic_gap_raw,gp_raw";
  return header;
}

std::string LossTrace::csv_row(const StepRecord& r, bool with_raw_pixels) {
  auto cell = [](const std::optional<double>& v) { return v ? format_number(*v) : std::string(); };
  std::string row =
      std::to_string(r.step) + "," + format_number(r.total) + "," + format_number(r.content);
  for (const auto* column : {&r.style, &r.critic_gap, &r.penalty})
    for (const auto& v : *column) row += "," + cell(v);
  if (with_raw_pixels)
    row += "," + cell(r.style_raw) + "," + cell(r.critic_gap_raw) + "," + cell(r.penalty_raw);
  return row;
}

void LossTrace::write_csv(std::ostream& out) const {
  const bool raw = uses_raw_pixels();
  out << csv_header(raw) << "\n";
  for (const auto& r : records_) out << csv_row(r, raw) << "\n";
}

torch::Tensor style_layer_loss(Backend backend, const torch::Tensor& generated,
                               const torch::Tensor& style, const Critic* critic,
                               const torch::Tensor& real_batch) {
  switch (backend) {
    case Backend::wasserstein: {
      if (critic == nullptr) throw ConfigError("the wasserstein backend needs a critic per layer");
      const auto& real = real_batch.defined() ? real_batch : squash_features(style);
      return critic_value_gap(*critic, real, squash_features(generated));
    }
    case Backend::gram_mmd:
      if (critic != nullptr) throw ConfigError("the gram backend takes no critic");
      return gram_style_loss(generated, style);
    case Backend::bn_matching:
      if (critic != nullptr) throw ConfigError("the bn backend takes no critic");
      return bn_matching_loss(generated, style);
  }
  throw ConfigError("unknown backend");
}

LossBreakdown combine_losses(double alpha, const std::vector<StyleSlot>& slots,
                             const std::vector<torch::Tensor>& style_losses,
                             const torch::Tensor& content_loss_value) {
  if (slots.size() != style_losses.size())
    throw ConfigError("one style loss is required per style slot");
  LossBreakdown parts;
  torch::Tensor style_sum;
  for (size_t k = 0; k < slots.size(); ++k) {
    parts.style.push_back(style_losses[k].item<double>());
    auto term = slots[k].weight * style_losses[k];
    style_sum = style_sum.defined() ? style_sum + term : term;
  }
  torch::Tensor total;
  if (alpha > 0.0 && style_sum.defined()) total = alpha * style_sum;
  if (alpha < 1.0) {
    if (!content_loss_value.defined()) throw ConfigError("content loss required when alpha < 1");
    parts.content = content_loss_value.item<double>();
    auto term = (1.0 - alpha) * content_loss_value;
    total = total.defined() ? total + term : term;
  }
  parts.total = total.defined() ? total : torch::zeros({});
  return parts;
}

LossBreakdown total_loss(const TransferConfig& cfg, const FeatureSet& generated,
                         const FeatureSet& content, const FeatureSet& style,
                         const std::vector<const Critic*>& critics,
                         const std::vector<torch::Tensor>& real_batches) {
  auto lookup = [](const FeatureSet& set, Layer layer, const char* which) -> const torch::Tensor& {
    auto it = set.find(layer);
    if (it == set.end())
      throw ConfigError(std::string(which) + " features lack layer " + std::string(layer_name(layer)));
    return it->second.values();
  };
  const bool wasserstein = cfg.backend == Backend::wasserstein;
  if (wasserstein && critics.size() != cfg.style_layers.size())
    throw ConfigError("one critic per style layer is required by the wasserstein backend");
  if (!wasserstein && !critics.empty()) throw ConfigError("critics given to a closed-form backend");

  std::vector<StyleSlot> slots;
  std::vector<torch::Tensor> losses;
  for (size_t k = 0; k < cfg.style_layers.size(); ++k) {
    const auto& sl = cfg.style_layers[k];
    slots.push_back({sl.layer, sl.weight});
    const torch::Tensor real = k < real_batches.size() ? real_batches[k] : torch::Tensor();
    losses.push_back(style_layer_loss(cfg.backend, lookup(generated, sl.layer, "generated"),
                                      lookup(style, sl.layer, "style"),
                                      wasserstein ? critics[k] : nullptr, real));
  }
  torch::Tensor content_value;
  if (cfg.alpha < 1.0)
    content_value = content_loss(lookup(generated, cfg.content_layer, "generated"),
                                 lookup(content, cfg.content_layer, "content"));
  return combine_losses(cfg.alpha, slots, losses, content_value);
}

RunResult run_transfer(const TransferConfig& cfg, const Image& content, const Image& style,
                       const Backbone& backbone, const RunObserver& observer) {
  cfg.validate();
  if (content.empty() || style.empty()) throw ConfigError("content and style images are required");
  RunSetup setup;
  setup.cfg = cfg;
  for (const auto& sl : cfg.style_layers) setup.slots.push_back({sl.layer, sl.weight});
  setup.content = &content;
  setup.style = &style;
  setup.init = cfg.init == InitMode::content
                   ? content
                   : Image::uniform_noise(content.height(), content.width(), cfg.seed);
  return optimize(setup, backbone, observer);
}

RunResult run_style_representation(const TransferConfig& cfg, const Image& style,
                                   const Backbone& backbone, int max_layer,
                                   const RunObserver& observer) {
  if (cfg.alpha != 1.0) throw ConfigError("style representation needs alpha = 1");
  if (cfg.init != InitMode::noise) throw ConfigError("style representation starts from noise");
  if (max_layer < 0 || max_layer > 5)
    throw ConfigError("style representation depth must be 0 (raw pixels) or 1..5");
  if (style.empty()) throw ConfigError("a style image is required");

  RunSetup setup;
  setup.cfg = cfg;
  if (max_layer == 0) {
    setup.slots.push_back({std::nullopt, 1.0});
    setup.cfg.style_layers.clear();
  } else {
    setup.cfg.style_layers = uniform_style_layers(max_layer);
    for (const auto& sl : setup.cfg.style_layers) setup.slots.push_back({sl.layer, sl.weight});
  }
  if (max_layer != 0) setup.cfg.validate();
  else {
    TransferConfig check = setup.cfg;
    check.style_layers = uniform_style_layers(1);
    check.validate();
  }
  setup.style = &style;
  setup.init = Image::uniform_noise(style.height(), style.width(), cfg.seed);
  return optimize(setup, backbone, observer);
}

}  // namespace wst
