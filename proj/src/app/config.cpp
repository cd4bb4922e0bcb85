#include "wst/app/config.hpp"

#include <unistd.h>

#include <atomic>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <CLI11.hpp>

#include "wst/errors.hpp"

namespace wst::app {

namespace {

// key -> command-line flag
const std::vector<std::pair<std::string, std::string>> kKeys = {
    {"mode", "--mode"},
    {"style", "--style"},
    {"content", "--content"},
    {"weights", "--weights"},
    {"points_a", ""},
    {"points_b", ""},
    {"alpha", "--alpha"},
    {"steps", "--steps"},
    {"backend", "--backend"},
    {"layers", "--layers"},
    {"content_layer", "--content-layer"},
    {"image_lr", "--image-lr"},
    {"critic_lr", "--critic-lr"},
    {"critic_batch", "--critic-batch"},
    {"lambda_gp", "--lambda-gp"},
    {"n_critic", "--n-critic"},
    {"size", "--size"},
    {"seed", "--seed"},
    {"snapshot_every", "--snapshot-every"},
    {"init", "--init"},
    {"out", "--out"},
};

bool known_key(const std::string& key) {
  for (const auto& [k, flag] : kKeys)
    if (k == key) return true;
  return false;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double parse_double(const std::string& key, const std::string& text) {
  double value = 0.0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value))
    throw UsageError(key, key + ": '" + text + "' is not a finite number");
  return value;
}

int64_t parse_int(const std::string& key, const std::string& text) {
  int64_t value = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) throw UsageError(key, key + ": '" + text + "' is not an integer");
  return value;
}

uint64_t parse_seed(const std::string& key, const std::string& text) {
  uint64_t value = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end)
    throw UsageError(key, key + ": '" + text + "' is not a non-negative integer");
  return value;
}

Mode parse_mode(const std::string& text) {
  if (text == "transfer") return Mode::transfer;
  if (text == "style-repr" || text == "style_repr") return Mode::style_repr;
  if (text == "compare") return Mode::compare;
  if (text == "oracle-check" || text == "oracle_check") return Mode::oracle_check;
  throw UsageError("mode", "mode: '" + text +
                               "' is not one of transfer, style-repr, compare, oracle-check");
}

std::filesystem::path existing_file(const std::string& key, const std::string& text) {
  std::filesystem::path path(text);
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec))
    throw UsageError(key, key + ": file '" + text + "' does not exist");
  return path;
}

std::string make_run_id(Mode mode, uint64_t seed) {
  static std::atomic<int> counter{0};
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream id;
  id << mode_name(mode) << "-" << std::put_time(&tm, "%Y%m%dT%H%M%S") << "-s" << seed << "-p"
     << ::getpid() << "-" << counter++;
  return id.str();
}

template <typename Fn>
auto with_key(const std::string& key, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    throw UsageError(key, key + ": " + e.what());
  }
}

}  // namespace

std::string_view mode_name(Mode mode) {
  switch (mode) {
    case Mode::transfer: return "transfer";
    case Mode::style_repr: return "style-repr";
    case Mode::compare: return "compare";
    case Mode::oracle_check: return "oracle-check";
  }
  return "?";
}

Environment Environment::from_process() {
  Environment env;
  if (const char* v = std::getenv("WST_OUT_DIR"); v && *v) env.out_dir = v;
  if (const char* v = std::getenv("WST_WEIGHTS"); v && *v) env.weights = v;
  return env;
}

std::map<std::string, std::string> read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("config", "config: cannot read '" + path.string() + "'");
  std::map<std::string, std::string> values;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw UsageError("config", path.string() + ":" + std::to_string(line_no) +
                                     ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!known_key(key))
      throw UsageError(key, path.string() + ":" + std::to_string(line_no) + ": unknown key '" +
                                key + "'");
    values[key] = value;
  }
  return values;
}

RunManifest parse_config(const std::vector<std::string>& args, const Environment& env) {
  CLI::App cli{"Neural style transfer with pluggable feature-distribution losses", "wst"};
  std::map<std::string, std::string> flag_values;
  std::map<std::string, CLI::Option*> flag_options;
  for (const auto& [key, flag] : kKeys) {
    if (flag.empty()) continue;
    flag_options[key] = cli.add_option(flag, flag_values[key]);
  }
  flag_options["mode"]->description("transfer | style-repr | compare | oracle-check");
  flag_options["backend"]->description("wasserstein | gram | bn");
  flag_options["layers"]->description("deepest style layer 1..5, or raw (style-repr/compare only)");
  flag_options["out"]->description("output root; runs land in <out>/<run-id>");
  std::vector<std::string> points;
  cli.add_option("--points", points, "two CSV point files for oracle-check")->expected(2);
  std::string config_path;
  cli.add_option("--config", config_path, "flat key = value file");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    cli.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    throw HelpRequested{cli.help()};
  } catch (const CLI::ParseError& e) {
    throw UsageError("", e.what());
  }

  std::map<std::string, std::string> values;
  RunManifest manifest;
  if (!config_path.empty()) {
    manifest.config_file = existing_file("config", config_path);
    values = read_config_file(manifest.config_file);
  }
  for (const auto& [key, option] : flag_options)
    if (option->count() > 0) values[key] = flag_values[key];
  if (!points.empty()) {
    values["points_a"] = points[0];
    values["points_b"] = points[1];
  }

  auto has = [&values](const char* key) { return values.count(key) > 0; };
  auto get = [&values](const char* key) -> const std::string& { return values.at(key); };

  if (!has("mode")) throw UsageError("mode", "mode: required (--mode)");
  manifest.mode = parse_mode(get("mode"));

  TransferConfig& cfg = manifest.config;
  if (has("alpha")) cfg.alpha = parse_double("alpha", get("alpha"));
  if (!(cfg.alpha >= 0.0 && cfg.alpha <= 1.0))
    throw UsageError("alpha", "alpha: " + values["alpha"] + " is outside [0, 1]");
  if (has("steps")) cfg.steps = parse_int("steps", get("steps"));
  if (cfg.steps < 1) throw UsageError("steps", "steps: must be >= 1");
  if (has("backend")) cfg.backend = with_key("backend", [&] { return parse_backend(get("backend")); });
  if (has("content_layer"))
    cfg.content_layer = with_key("content_layer", [&] { return parse_layer(get("content_layer")); });
  if (has("image_lr")) cfg.image_lr = parse_double("image_lr", get("image_lr"));
  if (!(cfg.image_lr > 0.0)) throw UsageError("image_lr", "image_lr: must be > 0");
  if (has("critic_lr")) cfg.critic.learning_rate = parse_double("critic_lr", get("critic_lr"));
  if (!(cfg.critic.learning_rate > 0.0)) throw UsageError("critic_lr", "critic_lr: must be > 0");
  if (has("critic_batch")) cfg.critic.batch_size = parse_int("critic_batch", get("critic_batch"));
  if (cfg.critic.batch_size < 2) throw UsageError("critic_batch", "critic_batch: must be >= 2");
  if (has("lambda_gp")) cfg.critic.lambda_gp = parse_double("lambda_gp", get("lambda_gp"));
  if (cfg.critic.lambda_gp < 0.0) throw UsageError("lambda_gp", "lambda_gp: must be >= 0");
  if (has("n_critic")) cfg.critic.n_critic = static_cast<int>(parse_int("n_critic", get("n_critic")));
  if (cfg.critic.n_critic < 1) throw UsageError("n_critic", "n_critic: must be >= 1");
  if (has("seed")) cfg.seed = parse_seed("seed", get("seed"));
  if (has("snapshot_every")) cfg.snapshot_every = parse_int("snapshot_every", get("snapshot_every"));
  if (cfg.snapshot_every < 0) throw UsageError("snapshot_every", "snapshot_every: must be >= 0");
  if (has("init")) cfg.init = with_key("init", [&] { return parse_init_mode(get("init")); });
  if (has("size")) manifest.size = parse_int("size", get("size"));
  if (manifest.size < Backbone::kMinSide)
    throw UsageError("size", "size: must be >= " + std::to_string(Backbone::kMinSide));

  const bool style_only = manifest.mode == Mode::style_repr ||
                          (manifest.mode == Mode::compare && !has("content"));
  if (has("layers")) {
    const std::string& text = get("layers");
    if (text == "raw" || text == "raw_pixels" || text == "0") {
      if (manifest.mode != Mode::style_repr)
        throw UsageError("layers", "layers: raw pixels are only available in style-repr mode");
      manifest.style_depth = 0;
    } else {
      const int64_t depth = parse_int("layers", text);
      if (depth < 1 || depth > 5) throw UsageError("layers", "layers: must be 1..5 or raw");
      manifest.style_depth = static_cast<int>(depth);
    }
  }
  if (manifest.style_depth > 0) cfg.style_layers = uniform_style_layers(manifest.style_depth);
  if (style_only) {
    cfg.alpha = 1.0;
    cfg.init = InitMode::noise;
  }

  switch (manifest.mode) {
    case Mode::transfer:
      if (!has("content")) throw UsageError("content", "content: required in transfer mode");
      [[fallthrough]];
    case Mode::style_repr:
    case Mode::compare:
      if (!has("style")) throw UsageError("style", "style: required in this mode");
      manifest.style = existing_file("style", get("style"));
      if (has("content")) manifest.content = existing_file("content", get("content"));
      if (has("weights")) manifest.weights = existing_file("weights", get("weights"));
      else if (env.weights) manifest.weights = existing_file("weights", *env.weights);
      else throw UsageError("weights", "weights: a VGG19-BN checkpoint is required (--weights or WST_WEIGHTS)");
      break;
    case Mode::oracle_check:
      if (!has("points_a") || !has("points_b"))
        throw UsageError("points", "points: oracle-check needs --points A.csv B.csv");
      manifest.points_a = existing_file("points", get("points_a"));
      manifest.points_b = existing_file("points", get("points_b"));
      break;
  }

  try {
    TransferConfig check = cfg;
    if (check.style_layers.empty()) check.style_layers = uniform_style_layers(1);
    check.validate();
  } catch (const ConfigError& e) {
    throw UsageError("", e.what());
  }

  std::filesystem::path root = "out";
  if (flag_options["out"]->count() > 0) root = flag_values["out"];
  else if (env.out_dir) root = *env.out_dir;
  else if (has("out")) root = get("out");
  manifest.run_id = make_run_id(manifest.mode, cfg.seed);
  manifest.output_dir = root / manifest.run_id;
  return manifest;
}

std::string RunManifest::resolved_config() const {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "mode = " << mode_name(mode) << "\n";
  if (!style.empty()) out << "style = " << style.string() << "\n";
  if (!content.empty()) out << "content = " << content.string() << "\n";
  if (!weights.empty()) out << "weights = " << weights.string() << "\n";
  if (!points_a.empty()) out << "points_a = " << points_a.string() << "\n";
  if (!points_b.empty()) out << "points_b = " << points_b.string() << "\n";
  out << "alpha = " << config.alpha << "\n";
  out << "steps = " << config.steps << "\n";
  out << "backend = " << backend_name(config.backend) << "\n";
  out << "layers = " << (style_depth == 0 ? std::string("raw") : std::to_string(style_depth)) << "\n";
  out << "content_layer = " << layer_name(config.content_layer) << "\n";
  out << "image_lr = " << config.image_lr << "\n";
  out << "critic_lr = " << config.critic.learning_rate << "\n";
  out << "critic_batch = " << config.critic.batch_size << "\n";
  out << "lambda_gp = " << config.critic.lambda_gp << "\n";
  out << "n_critic = " << config.critic.n_critic << "\n";
  out << "size = " << size << "\n";
  out << "seed = " << config.seed << "\n";
  out << "snapshot_every = " << config.snapshot_every << "\n";
  out << "init = " << init_mode_name(config.init) << "\n";
  return out.str();
}

void write_manifest(const RunManifest& manifest) {
  std::filesystem::create_directories(manifest.output_dir);
  {
    std::ofstream out(manifest.output_dir / "manifest.txt", std::ios::trunc);
    out << "run_id = " << manifest.run_id << "\n";
    out << "mode = " << mode_name(manifest.mode) << "\n";
    if (!manifest.config_file.empty()) out << "config_file = " << manifest.config_file.string() << "\n";
    out << "output_dir = " << manifest.output_dir.string() << "\n";
    if (!out) throw LoadError("cannot write manifest in " + manifest.output_dir.string());
  }
  std::ofstream out(manifest.output_dir / "config.txt", std::ios::trunc);
  out << manifest.resolved_config();
  if (!out) throw LoadError("cannot write config in " + manifest.output_dir.string());
}

}  // namespace wst::app
