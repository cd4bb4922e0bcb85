// Acceptance suite: one PASS/FAIL line per criterion. Exit status is nonzero
// when any criterion fails. Pass criterion numbers to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include "wst/app/image_io.hpp"
#include "wst/backbone.hpp"
#include "wst/critic.hpp"
#include "wst/distances.hpp"
#include "wst/engine.hpp"
#include "wst/errors.hpp"
#include "wst/transport.hpp"

namespace fs = std::filesystem;
using namespace wst;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double budget_seconds;
  std::function<Outcome()> check;
};

std::string fmt(double v, int precision = 6) {
  std::ostringstream out;
  out << std::setprecision(precision) << v;
  return out.str();
}

const Backbone& backbone() {
  static const Backbone b = Backbone::load(WST_TEST_WEIGHTS);
  return b;
}

Image fixture(const std::string& name) { return app::load_image(std::string(WST_FIXTURES) + "/" + name, 64); }

PointCloud constant_cloud(int64_t n, int64_t d, double value) {
  return PointCloud(n, d, std::vector<double>(static_cast<size_t>(n * d), value));
}

// Exhaustive n! matching.
double brute_force_w1(const PointCloud& x, const PointCloud& y) {
  std::vector<int> perm(static_cast<size_t>(x.size()));
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (int64_t i = 0; i < x.size(); ++i) {
      const auto a = x.point(i), b = y.point(perm[i]);
      double s = 0.0;
      for (size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
      total += std::sqrt(s);
    }
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / static_cast<double>(x.size());
}

double max_rel_grad_error(const std::function<torch::Tensor(const torch::Tensor&)>& loss, const torch::Tensor& f0) {
  auto f = f0.clone().requires_grad_(true);
  loss(f).backward();
  const auto grad = f.grad();
  const double h = 1e-6;
  double worst = 0.0;
  for (int64_t i = 0; i < f0.size(0); ++i)
    for (int64_t j = 0; j < f0.size(1); ++j) {
      auto plus = f0.clone(), minus = f0.clone();
      plus[i][j] += h;
      minus[i][j] -= h;
      const double fd = (loss(plus).item<double>() - loss(minus).item<double>()) / (2 * h);
      const double ad = grad[i][j].item<double>();
      worst = std::max(worst, std::abs(fd - ad) / std::max(std::abs(fd), 1e-8));
    }
  return worst;
}

// 1. The ±1 counterexample.
Outcome negation_counterexample() {
  Outcome o{true, ""};
  for (int64_t n : {1, 4, 16}) {
    const auto ones = constant_cloud(n, n, 1.0), neg = constant_cloud(n, n, -1.0);
    const double w1 = exact_w1(ones, neg);
    const double want = 2.0 * std::sqrt(static_cast<double>(n));
    const auto fo = ones.as_feature_columns(), fn = neg.as_feature_columns();
    const double mmd = mmd2_quad(fo, fn).item<double>();
    const double gram = gram_style_loss(fo, fn).item<double>();
    const bool ok = std::abs(w1 - want) <= 1e-9 * want && std::abs(mmd) <= 1e-9 && std::abs(gram) <= 1e-9;
    o.pass = o.pass && ok;
    o.detail += "n=" + std::to_string(n) + ": W1=" + fmt(w1, 12) + " MMD2=" + fmt(mmd) + " gram=" + fmt(gram) + "; ";
  }
  return o;
}

// 2. ⟨φ(x), φ(y)⟩ = (xᵀy)².
Outcome kernel_identity() {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> dim(1, 32);
  std::normal_distribution<double> normal;
  double worst = 0.0;
  for (int pair = 0; pair < 1000; ++pair) {
    const int n = dim(rng);
    std::vector<double> xs(n), ys(n);
    for (auto& v : xs) v = normal(rng);
    for (auto& v : ys) v = normal(rng);
    const auto x = torch::tensor(xs, torch::kFloat64), y = torch::tensor(ys, torch::kFloat64);
    const double lhs = quad_feature_map(x).dot(quad_feature_map(y)).item<double>();
    const double rhs = std::pow(x.dot(y).item<double>(), 2);
    worst = std::max(worst, std::abs(lhs - rhs) / std::abs(rhs));
  }
  return {worst <= 1e-6, "max relative error " + fmt(worst) + " over 1000 pairs"};
}

// 3. gram_style_loss / mmd2_quad at (N, M) = (8, 16). The constant is
// 1/(4N²) = 1/256, derived by hand: ‖FFᵀ − SSᵀ‖² = M²·MMD² and the Gram loss
// divides that by 4N²M².
Outcome gram_mmd_proportionality() {
  const double pinned = 1.0 / 256.0;
  auto gen = at::make_generator<at::CPUGeneratorImpl>(3);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (int pair = 0; pair < 20; ++pair) {
    auto f = torch::randn({8, 16}, gen, torch::kFloat64), s = torch::randn({8, 16}, gen, torch::kFloat64);
    const double ratio = gram_style_loss(f, s).item<double>() / mmd2_quad(f, s).item<double>();
    lo = std::min(lo, ratio), hi = std::max(hi, ratio);
  }
  const double spread = (hi - lo) / hi;
  const bool ok = spread <= 1e-6 && std::abs(lo - pinned) <= 1e-6 * pinned;
  return {ok, "ratio in [" + fmt(lo, 12) + ", " + fmt(hi, 12) + "], spread " + fmt(spread) + ", pinned 1/256"};
}

// 4. Critic estimate vs exact W1 on unit-separated clusters.
Outcome critic_vs_oracle() {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(4);
  const double sigma = 0.1;
  auto a = torch::randn({2, 256}, gen, torch::kFloat64) * sigma;
  auto b = torch::randn({2, 256}, gen, torch::kFloat64) * sigma;
  b[0] += 1.0;
  const double w1 = exact_w1(PointCloud::from_feature_columns(a), PointCloud::from_feature_columns(b));
  CriticConfig cfg;  // λ = 10, lr 5e-4, batch 1024
  Critic critic(2, "clusters", 4, cfg.learning_rate);
  for (int i = 0; i < 2000; ++i) {
    auto real = sample_feature_batch(b, cfg.batch_size, critic.rng());
    auto fake = sample_feature_batch(a, cfg.batch_size, critic.rng());
    critic_update(critic, cfg, real, fake);
  }
  torch::NoGradGuard guard;
  const double gap = critic_value_gap(critic, b.to(torch::kFloat32), a.to(torch::kFloat32)).item<double>();
  const double rel = std::abs(gap - w1) / w1;
  return {rel <= 0.2, "exact W1 " + fmt(w1) + ", critic gap " + fmt(gap) + " after 2000 updates (rel err " + fmt(rel, 3) + ")"};
}

// 5. exact_w1 vs enumeration and vs the 1-D sorted formula.
Outcome oracle_correctness() {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal;
  double worst_enum = 0.0, worst_1d = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int64_t n = 1 + trial % 7;
    std::vector<double> xs(2 * n), ys(2 * n);
    for (auto& v : xs) v = normal(rng);
    for (auto& v : ys) v = normal(rng) + 0.5;
    PointCloud x(n, 2, xs), y(n, 2, ys);
    worst_enum = std::max(worst_enum, std::abs(exact_w1(x, y) - brute_force_w1(x, y)));
  }
  for (int trial = 0; trial < 50; ++trial) {
    const int64_t n = 1 + trial * 3;
    std::vector<double> xs(n), ys(n);
    for (auto& v : xs) v = normal(rng);
    for (auto& v : ys) v = 2.0 * normal(rng) - 0.3;
    worst_1d = std::max(worst_1d, std::abs(exact_w1(PointCloud(n, 1, xs), PointCloud(n, 1, ys)) - w1_1d(xs, ys)));
  }
  return {worst_enum <= 1e-9 && worst_1d <= 1e-9,
          "max |exact - enumeration| " + fmt(worst_enum) + ", max |exact - w1_1d| " + fmt(worst_1d)};
}

// 6. Autodiff vs central differences on 4×6 inputs.
Outcome gradient_checks() {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(6);
  const auto f0 = torch::randn({4, 6}, gen, torch::kFloat64);
  const auto s = torch::randn({4, 6}, gen, torch::kFloat64);
  const std::vector<std::pair<std::string, std::function<torch::Tensor(const torch::Tensor&)>>> losses = {
      {"content", [&](const torch::Tensor& f) { return content_loss(f, s); }},
      {"gram", [&](const torch::Tensor& f) { return gram_style_loss(f, s); }},
      {"mmd2", [&](const torch::Tensor& f) { return mmd2_quad(f, s); }},
      {"bn", [&](const torch::Tensor& f) { return bn_matching_loss(f, s); }},
  };
  Outcome o{true, ""};
  for (const auto& [name, fn] : losses) {
    const double err = max_rel_grad_error(fn, f0);
    o.pass = o.pass && err <= 1e-4;
    o.detail += name + " " + fmt(err, 3) + "; ";
  }
  return o;
}

// 7. End-to-end transfer with the defaults, all three backends.
Outcome end_to_end_transfer() {
  const Image content = fixture("content_64.png"), style = fixture("style_64.png");
  Outcome o{true, ""};
  for (Backend backend : {Backend::wasserstein, Backend::gram_mmd, Backend::bn_matching}) {
    TransferConfig cfg;
    cfg.backend = backend;
    cfg.snapshot_every = 0;
    try {
      const auto result = run_transfer(cfg, content, style, backbone());
      const double early = result.trace.moving_average_total(50, 50);
      const double late = result.trace.moving_average_total(500, 50);
      const double ratio = late / early;
      o.pass = o.pass && ratio < 0.5;
      o.detail += std::string(backend_name(backend)) + " MA(500)/MA(50) = " + fmt(late, 5) + "/" + fmt(early, 5) +
                  " = " + fmt(ratio, 3) + "; ";
    } catch (const NumericalError& e) {
      o.pass = false;
      o.detail += std::string(backend_name(backend)) + " aborted: " + e.what() + "; ";
    }
  }
  return o;
}

// 8. Raw-pixel style representation pulls the colour distribution onto the style's.
Outcome raw_pixel_colours() {
  const Image style = fixture("style_64.png");
  TransferConfig cfg;  // default backend
  cfg.alpha = 1.0;
  cfg.init = InitMode::noise;
  cfg.snapshot_every = 0;
  const auto result = run_style_representation(cfg, style, backbone(), 0);
  const Image init = Image::uniform_noise(style.height(), style.width(), cfg.seed);

  auto pixels = [](const Image& img) {
    auto cloud = PointCloud::from_tensor_rows(raw_pixel_features(img).values().t().to(torch::kFloat64));
    if (cloud.size() <= 4096) return cloud;
    std::mt19937_64 pick(8);
    std::vector<int64_t> rows(static_cast<size_t>(cloud.size()));
    std::iota(rows.begin(), rows.end(), 0);
    std::shuffle(rows.begin(), rows.end(), pick);
    rows.resize(4096);
    return cloud.subset(rows);
  };
  const auto target = pixels(style);
  std::mt19937_64 rng_before(88), rng_after(88);
  const double before = sliced_w1(pixels(init), target, 64, rng_before);
  const double after = sliced_w1(pixels(result.image), target, 64, rng_after);
  const double drop = 1.0 - after / before;
  return {drop >= 0.9, std::string(backend_name(cfg.backend)) + " backend: sliced W1 " + fmt(before, 4) + " -> " +
                           fmt(after, 4) + " (drop " + fmt(100 * drop, 3) + "%)"};
}

// 9. BN matching at conv1_1 reproduces the style's per-channel statistics.
Outcome bn_fidelity() {
  const Image style = fixture("style_64.png");
  TransferConfig cfg;
  cfg.backend = Backend::bn_matching;
  cfg.alpha = 1.0;
  cfg.init = InitMode::noise;
  cfg.snapshot_every = 0;
  const auto result = run_style_representation(cfg, style, backbone(), 1);
  const Layer l1[] = {Layer::conv1_1};
  torch::NoGradGuard guard;
  const auto fo = backbone().extract(result.image, l1).at(Layer::conv1_1).values().to(torch::kFloat64);
  const auto fs = backbone().extract(style, l1).at(Layer::conv1_1).values().to(torch::kFloat64);
  const auto mo = fo.mean(1), ms = fs.mean(1);
  const auto so = fo.std(1, /*unbiased=*/false), ss = fs.std(1, false);
  const auto mean_rel = ((mo - ms).abs() / ms.abs()), std_rel = ((so - ss).abs() / ss.abs());
  const double worst_mean = mean_rel.max().item<double>(), worst_std = std_rel.max().item<double>();
  const int64_t worst_channel = mean_rel.argmax().item<int64_t>();
  const int64_t bad = (mean_rel > 0.05).sum().item<int64_t>() + (std_rel > 0.05).sum().item<int64_t>();
  return {bad == 0, "max rel err mean " + fmt(worst_mean, 3) + " (channel " + std::to_string(worst_channel) +
                        ", style mean " + fmt(ms[worst_channel].item<double>(), 3) + "), std " + fmt(worst_std, 3) +
                        "; " + std::to_string(bad) + " of 128 statistics outside 5%"};
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(WST_CLI) + " " + args + " >" + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

// Every trace CSV (or report) under a run directory, keyed by relative path.
std::map<std::string, std::string> collect_traces(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    const auto name = entry.path().filename().string();
    const bool trace = entry.path().extension() == ".csv" && name.find("timings") == std::string::npos;
    if (trace || name == "report.txt") {
      auto rel = fs::relative(entry.path(), root);
      // drop the run-id component, which differs per invocation
      fs::path key;
      for (auto it = std::next(rel.begin()); it != rel.end(); ++it) key /= *it;
      files[key.string()] = slurp(entry.path());
    }
  }
  return files;
}

// 10. Identical config and seed give byte-identical traces in every mode.
Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / ("wst_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string fx = WST_FIXTURES;
  const std::string common = " --weights " + std::string(WST_TEST_WEIGHTS) + " --size 32 --critic-batch 128 --seed 3";
  const std::vector<std::pair<std::string, std::string>> modes = {
      {"transfer", "--mode transfer --style " + fx + "/style_64.png --content " + fx + "/content_64.png" + common + " --steps 5"},
      {"style-repr-raw", "--mode style-repr --layers raw --style " + fx + "/style_64.png" + common + " --steps 5"},
      {"style-repr-3", "--mode style-repr --layers 3 --backend gram --style " + fx + "/style_64.png" + common + " --steps 5"},
      {"compare", "--mode compare --style " + fx + "/style_64.png" + common + " --steps 2"},
      {"oracle-check", "--mode oracle-check --points " + fx + "/ones_n4.csv " + fx + "/negones_n4.csv"},
  };
  Outcome o{true, ""};
  for (const auto& [name, args] : modes) {
    std::map<std::string, std::string> runs[2];
    bool ok = true;
    for (int k = 0; k < 2; ++k) {
      const auto dir = root / name / std::to_string(k);
      ok = ok && run_cli(args + " --out " + dir.string(), root / (name + ".log")) == 0;
      if (ok) runs[k] = collect_traces(dir);
    }
    ok = ok && !runs[0].empty() && runs[0] == runs[1];
    o.pass = o.pass && ok;
    o.detail += name + (ok ? " identical (" + std::to_string(runs[0].size()) + " files)" : " DIFFERS") + "; ";
  }
  fs::remove_all(root);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "negation counterexample", 1, negation_counterexample},
      {2, "quadratic-kernel identity", 5, kernel_identity},
      {3, "Gram/MMD proportionality", 5, gram_mmd_proportionality},
      {4, "critic vs exact W1", 180, critic_vs_oracle},
      {5, "oracle correctness", 60, oracle_correctness},
      {6, "gradient checks", 30, gradient_checks},
      {7, "end-to-end transfer", 900, end_to_end_transfer},
      {8, "raw-pixel colour matching", 120, raw_pixel_colours},
      {9, "BN-matching fidelity", 180, bn_fidelity},
      {10, "determinism", 0, determinism},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.check();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::string timing = fmt(seconds, 3) + " s";
    if (c.budget_seconds > 0) {
      timing += " / budget " + fmt(c.budget_seconds, 4) + " s";
      if (seconds > c.budget_seconds) outcome.pass = false, timing += " EXCEEDED";
    }
    failures += outcome.pass ? 0 : 1;
    std::cout << (outcome.pass ? "[PASS] " : "[FAIL] ") << "AC" << c.id << " " << c.name << " (" << timing
              << "): " << outcome.detail << std::endl;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criterion/criteria failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
