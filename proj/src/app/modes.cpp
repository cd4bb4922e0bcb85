#include "wst/app/modes.hpp"

#include <array>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <CLI11.hpp>

#include "wst/app/image_io.hpp"
#include "wst/app/point_csv.hpp"
#include "wst/distances.hpp"
#include "wst/errors.hpp"
#include "wst/transport.hpp"

namespace wst::app {

namespace {

constexpr std::array<Backend, 3> kCompareBackends = {Backend::wasserstein, Backend::gram_mmd,
                                                     Backend::bn_matching};

std::string depth_label(int depth) { return depth == 0 ? "raw_pixels" : "layer" + std::to_string(depth); }

// Streams trace rows to disk as they are produced so an aborted run keeps
// everything up to the failing step.
class TraceFiles {
 public:
  TraceFiles(const std::filesystem::path& dir, const std::string& stem, bool raw_pixels)
      : raw_(raw_pixels) {
    std::filesystem::create_directories(dir);
    trace_.open(dir / (stem + ".csv"), std::ios::trunc);
    timings_.open(dir / (stem + "_timings.csv"), std::ios::trunc);
    if (!trace_ || !timings_) throw LoadError("cannot create trace files in " + dir.string());
    trace_ << LossTrace::csv_header(raw_) << "\n";
    timings_ << "step,seconds\n";
  }

  void operator()(const StepRecord& r) {
    trace_ << LossTrace::csv_row(r, raw_) << "\n";
    trace_.flush();
    timings_ << r.step << "," << std::setprecision(6) << r.seconds << "\n";
  }

 private:
  bool raw_;
  std::ofstream trace_, timings_;
};

RunObserver observer_for(TraceFiles& files, const std::filesystem::path& snapshot_dir) {
  RunObserver observer;
  observer.on_step = [&files](const StepRecord& r) { files(r); };
  observer.on_snapshot = [snapshot_dir](const Snapshot& s) {
    save_png(s.image, snapshot_dir / ("step_" + std::to_string(s.step) + ".png"));
  };
  return observer;
}

void report_run(std::ostream& log, const std::string& what, const RunResult& result) {
  const auto& last = result.trace.records().back();
  log << what << ": " << result.trace.size() << " steps, final total " << last.total << "\n";
}

}  // namespace

void run_mode_transfer(const RunManifest& manifest, std::ostream& log) {
  const Backbone backbone = Backbone::load(manifest.weights);
  const Image content = load_image(manifest.content, manifest.size);
  const Image style = load_image(manifest.style, manifest.size);
  TraceFiles files(manifest.output_dir, "trace", false);
  const auto result = run_transfer(manifest.config, content, style, backbone,
                                   observer_for(files, manifest.output_dir));
  save_png(result.image, manifest.output_dir / "output.png");
  report_run(log, "transfer", result);
}

void run_mode_style_repr(const RunManifest& manifest, std::ostream& log) {
  const Backbone backbone = Backbone::load(manifest.weights);
  const Image style = load_image(manifest.style, manifest.size);
  TraceFiles files(manifest.output_dir, "trace", manifest.style_depth == 0);
  const auto result = run_style_representation(manifest.config, style, backbone, manifest.style_depth,
                                               observer_for(files, manifest.output_dir));
  save_png(result.image, manifest.output_dir / "output.png");
  report_run(log, "style-repr " + depth_label(manifest.style_depth), result);
}

void run_mode_compare(const RunManifest& manifest, std::ostream& log) {
  const Backbone backbone = Backbone::load(manifest.weights);
  const Image style = load_image(manifest.style, manifest.size);
  const bool transfer = !manifest.content.empty();
  const Image content = transfer ? load_image(manifest.content, manifest.size) : Image();

  std::vector<std::vector<Image>> grid;
  std::vector<std::string> row_labels, column_labels;
  for (Backend backend : kCompareBackends) {
    TransferConfig cfg = manifest.config;
    cfg.backend = backend;
    const std::string name(backend_name(backend));
    const auto dir = manifest.output_dir / name;
    row_labels.push_back(name);
    std::vector<Image> row;
    if (transfer) {
      TraceFiles files(dir, "trace", false);
      const auto result = run_transfer(cfg, content, style, backbone, observer_for(files, dir));
      save_png(result.image, dir / "output.png");
      report_run(log, name + " transfer", result);
      row.push_back(result.image);
    } else {
      for (int depth = 0; depth <= 5; ++depth) {
        const std::string label = depth_label(depth);
        TraceFiles files(dir, "trace_" + label, depth == 0);
        const auto result =
            run_style_representation(cfg, style, backbone, depth, observer_for(files, dir / label));
        save_png(result.image, dir / (label + ".png"));
        report_run(log, name + " " + label, result);
        row.push_back(result.image);
      }
    }
    grid.push_back(std::move(row));
  }
  if (transfer) {
    column_labels = {"output"};
  } else {
    column_labels = {"Raw Pixels", "Layer 1", "Layer 2", "Layer 3", "Layer 4", "Layer 5"};
  }
  write_grid_png(grid, row_labels, column_labels, manifest.output_dir / "grid.png");
  log << "grid: " << (manifest.output_dir / "grid.png").string() << "\n";
}

void run_mode_oracle_check(const RunManifest& manifest, std::ostream& out) {
  const PointCloud a = read_point_csv(manifest.points_a);
  const PointCloud b = read_point_csv(manifest.points_b);
  if (a.dim() != b.dim())
    throw DimensionError("point files differ in dimension (" + std::to_string(a.dim()) + " vs " +
                         std::to_string(b.dim()) + ")");
  const double w1 = exact_w1(a, b);
  const auto xa = a.as_feature_columns();
  const auto xb = b.as_feature_columns();
  const double mmd2 = mmd2_quad(xa, xb).item<double>();
  const double bn_gap = bn_matching_loss(xa, xb).item<double>();

  std::ostringstream report;
  report << std::setprecision(12);
  report << "points_a = " << manifest.points_a.string() << " (" << a.size() << " x " << a.dim() << ")\n";
  report << "points_b = " << manifest.points_b.string() << " (" << b.size() << " x " << b.dim() << ")\n";
  report << "exact_w1 = " << w1 << "\n";
  report << "mmd2_quad = " << mmd2 << "\n";
  report << "bn_gap = " << bn_gap << "\n";
  out << report.str();
  std::ofstream file(manifest.output_dir / "report.txt", std::ios::trunc);
  file << report.str();
}

void run(const RunManifest& manifest, std::ostream& log) {
  write_manifest(manifest);
  log << "run " << manifest.run_id << " -> " << manifest.output_dir.string() << "\n";
  switch (manifest.mode) {
    case Mode::transfer: return run_mode_transfer(manifest, log);
    case Mode::style_repr: return run_mode_style_repr(manifest, log);
    case Mode::compare: return run_mode_compare(manifest, log);
    case Mode::oracle_check: return run_mode_oracle_check(manifest, log);
  }
}

int main_entry(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    if (!args.empty() && args.front() == "make-weights") {
      CLI::App cli{"Write a surrogate VGG19-BN checkpoint (torchvision layout)", "wst make-weights"};
      std::string path;
      uint64_t seed = 0;
      cli.add_option("--out", path, "checkpoint path")->required();
      cli.add_option("--seed", seed, "initialisation seed");
      std::vector<std::string> rest(args.rbegin(), args.rend() - 1);
      try {
        cli.parse(rest);
      } catch (const CLI::CallForHelp&) {
        out << cli.help();
        return kExitOk;
      } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
      }
      write_surrogate_checkpoint(path, seed);
      out << "wrote " << path << "\n";
      return kExitOk;
    }
    const RunManifest manifest = parse_config(args, Environment::from_process());
    run(manifest, out);
    return kExitOk;
  } catch (const HelpRequested& help) {
    out << help.text;
    return kExitOk;
  } catch (const UsageError& e) {
    err << "usage error";
    if (!e.key().empty()) err << " [" << e.key() << "]";
    err << ": " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericalError& e) {
    err << "numerical abort: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const CsvError& e) {
    err << "parse error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const LoadError& e) {
    err << "load error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DimensionError& e) {
    err << "dimension error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::length_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace wst::app
