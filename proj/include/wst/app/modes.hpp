#pragma once

#include <ostream>

#include "wst/app/config.hpp"

namespace wst::app {

/// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumerical = 3;

/// Single transfer run: output.png, trace.csv, timings.csv and step_<n>.png
/// snapshots under manifest.output_dir.
void run_mode_transfer(const RunManifest& manifest, std::ostream& log);

/// Noise-initialised synthesis at manifest.style_depth (0 = raw pixels).
void run_mode_style_repr(const RunManifest& manifest, std::ostream& log);

/// Runs all three backends with the shared seed. With a content image this
/// is a transfer comparison (3 outputs, 3×1 grid); otherwise a style
/// representation sweep over raw pixels and layers 1..5 (3×6 grid).
void run_mode_compare(const RunManifest& manifest, std::ostream& log);

/// Prints exact W1, quadratic MMD² and the batch-norm statistics gap between
/// two point clouds, and writes the same report to report.txt.
void run_mode_oracle_check(const RunManifest& manifest, std::ostream& out);

/// Writes the manifest, then dispatches on manifest.mode.
void run(const RunManifest& manifest, std::ostream& log);

/// Full command-line entry: parse, run, map errors to exit codes.
int main_entry(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace wst::app
