#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "wst/engine.hpp"

namespace wst::app {

enum class Mode { transfer, style_repr, compare, oracle_check };

std::string_view mode_name(Mode mode);

/// A rejected command line or config file. `key()` names the offending
/// option (`alpha`, `style`, ...), or is empty for structural problems.
class UsageError : public std::invalid_argument {
 public:
  UsageError(std::string key, const std::string& what)
      : std::invalid_argument(what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

/// Thrown for --help; carries the formatted help text.
struct HelpRequested {
  std::string text;
};

/// Process environment consulted by parse_config.
struct Environment {
  std::optional<std::string> out_dir;  // WST_OUT_DIR
  std::optional<std::string> weights;  // WST_WEIGHTS

  static Environment from_process();
};

struct RunManifest {
  std::string run_id;
  Mode mode = Mode::transfer;
  TransferConfig config;
  int style_depth = 5;  // --layers; 0 selects raw pixels (style representation only)
  int64_t size = 256;
  std::filesystem::path style, content, weights;
  std::filesystem::path points_a, points_b;
  std::filesystem::path config_file;
  std::filesystem::path output_dir;  // <out root>/<run_id>

  /// Resolved settings as `key = value` lines, readable back via --config.
  std::string resolved_config() const;
};

/// Reads a flat `key = value` file. Blank lines and `#` comments are skipped.
/// Throws UsageError for malformed lines or unknown keys.
std::map<std::string, std::string> read_config_file(const std::filesystem::path& path);

/// Resolves a run from command-line arguments (without argv[0]).
/// Precedence: flags, then the --config file, then built-in defaults.
/// Everything is validated here, before any image is loaded or any
/// optimisation begins.
RunManifest parse_config(const std::vector<std::string>& args, const Environment& env = {});

/// Writes manifest.txt and config.txt into manifest.output_dir (created).
void write_manifest(const RunManifest& manifest);

}  // namespace wst::app
