#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "wst/distances.hpp"
#include "wst/errors.hpp"

namespace wst {
namespace {

torch::Tensor randn(at::IntArrayRef shape, at::Generator& gen) {
  return torch::randn(shape, gen, torch::kFloat64);
}

// ---- independent scalar-loop oracles -------------------------------------

double loop_content(const torch::Tensor& f, const torch::Tensor& p) {
  auto a = f.accessor<double, 2>();
  auto b = p.accessor<double, 2>();
  double sum = 0.0;
  for (int64_t i = 0; i < f.size(0); ++i)
    for (int64_t j = 0; j < f.size(1); ++j) sum += (a[i][j] - b[i][j]) * (a[i][j] - b[i][j]);
  return 0.5 * sum;
}

double loop_bn(const torch::Tensor& f, const torch::Tensor& s) {
  auto stats = [](const torch::Tensor& t, int64_t row) {
    auto a = t.accessor<double, 2>();
    double mean = 0.0;
    for (int64_t j = 0; j < t.size(1); ++j) mean += a[row][j];
    mean /= static_cast<double>(t.size(1));
    double var = 0.0;
    for (int64_t j = 0; j < t.size(1); ++j) var += (a[row][j] - mean) * (a[row][j] - mean);
    return std::pair{mean, std::sqrt(var / static_cast<double>(t.size(1)))};
  };
  double total = 0.0;
  for (int64_t i = 0; i < f.size(0); ++i) {
    auto [mf, sf] = stats(f, i);
    auto [ms, ss] = stats(s, i);
    total += (mf - ms) * (mf - ms) + (sf - ss) * (sf - ss);
  }
  return total;
}

// ‖mean φ(x_i) − mean φ(y_j)‖² with φ materialised explicitly.
double explicit_mmd2(const torch::Tensor& x, const torch::Tensor& y) {
  auto mean_embedding = [](const torch::Tensor& m) {
    torch::Tensor acc;
    for (int64_t j = 0; j < m.size(1); ++j) {
      auto phi = quad_feature_map(m.select(1, j));
      acc = acc.defined() ? acc + phi : phi;
    }
    return acc / static_cast<double>(m.size(1));
  };
  return (mean_embedding(x) - mean_embedding(y)).square().sum().item<double>();
}

// Central finite differences of a scalar function of one matrix argument.
torch::Tensor finite_difference(const std::function<double(const torch::Tensor&)>& fn,
                                const torch::Tensor& at, double h = 1e-6) {
  auto grad = torch::zeros_like(at);
  auto flat = grad.view(-1);
  for (int64_t k = 0; k < at.numel(); ++k) {
    auto plus = at.clone();
    auto minus = at.clone();
    plus.view(-1)[k] += h;
    minus.view(-1)[k] -= h;
    flat[k] = (fn(plus) - fn(minus)) / (2 * h);
  }
  return grad;
}

void expect_gradient_matches(const std::function<torch::Tensor(const torch::Tensor&)>& loss,
                             const torch::Tensor& at) {
  auto x = at.clone().requires_grad_(true);
  auto autodiff = torch::autograd::grad({loss(x)}, {x})[0];
  auto numeric = finite_difference([&](const torch::Tensor& t) { return loss(t).item<double>(); }, at);
  const double rel = (autodiff - numeric).norm().item<double>() /
                     std::max(numeric.norm().item<double>(), 1e-12);
  EXPECT_LE(rel, 1e-4);
}

// ---- content_loss ---------------------------------------------------------

TEST(ContentLoss, ZeroOnIdenticalInputs) {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(1);
  auto f = randn({5, 7}, gen);
  EXPECT_EQ(content_loss(f, f).item<double>(), 0.0);
}

TEST(ContentLoss, AllOnesDifference) {
  auto p = torch::zeros({2, 3}, torch::kFloat64);
  EXPECT_DOUBLE_EQ(content_loss(p + 1.0, p).item<double>(), 3.0);
}

TEST(ContentLoss, MatchesScalarLoop) {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(2);
  auto f = randn({8, 8}, gen);
  auto p = randn({8, 8}, gen);
  EXPECT_NEAR(content_loss(f, p).item<double>(), loop_content(f, p), 1e-12);
}

TEST(ContentLoss, IsSpatiallyAligned) {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(3);
  auto f = randn({4, 6}, gen);
  auto shuffled = f.index_select(1, torch::tensor({5, 4, 3, 2, 1, 0}));
  EXPECT_GT(content_loss(f, shuffled).item<double>(), 0.0);
}

TEST(ContentLoss, RejectsShapeMismatch) {
  EXPECT_THROW(content_loss(torch::zeros({2, 3}), torch::zeros({3, 2})), DimensionError);
}

// ---- quad_feature_map -----------------------------------------------------

TEST(QuadFeatureMap, SparseVector) {
  auto phi = quad_feature_map(torch::tensor({1.0, 0.0}, torch::kFloat64));
  ASSERT_EQ(phi.size(0), 3);
  EXPECT_DOUBLE_EQ(phi[0].item<double>(), 0.0);  // x_2²
  EXPECT_DOUBLE_EQ(phi[1].item<double>(), 1.0);  // x_1²
  EXPECT_DOUBLE_EQ(phi[2].item<double>(), 0.0);  // √2·x_2·x_1
}

TEST(QuadFeatureMap, OrderingForThreeComponents) {
  const double a = 2.0, b = 3.0, c = 5.0;
  auto phi = quad_feature_map(torch::tensor({a, b, c}, torch::kFloat64));
  const double r2 = std::sqrt(2.0);
  const std::vector<double> expected = {c * c, b * b, a * a, r2 * c * b, r2 * c * a, r2 * b * a};
  ASSERT_EQ(phi.size(0), 6);
  for (size_t k = 0; k < expected.size(); ++k) EXPECT_DOUBLE_EQ(phi[k].item<double>(), expected[k]);
}

TEST(QuadFeatureMap, OnesVector) {
  auto phi = quad_feature_map(torch::ones({3}, torch::kFloat64));
  for (int k = 0; k < 3; ++k) EXPECT_DOUBLE_EQ(phi[k].item<double>(), 1.0);
  for (int k = 3; k < 6; ++k) EXPECT_DOUBLE_EQ(phi[k].item<double>(), std::sqrt(2.0));
  EXPECT_NEAR(phi.square().sum().item<double>(), 9.0, 1e-12);
}

TEST(QuadFeatureMap, InnerProductIsSquaredDotProduct) {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(4);
  for (int trial = 0; trial < 1000; ++trial) {
    const int64_t n = 1 + trial % 32;
    auto x = randn({n}, gen);
    auto y = randn({n}, gen);
    const double lhs = quad_feature_map(x).dot(quad_feature_map(y)).item<double>();
    const double rhs = std::pow(x.dot(y).item<double>(), 2);
    EXPECT_LE(std::abs(lhs - rhs), 1e-6 * std::max(1.0, std::abs(rhs))) << "n=" << n;
  }
}

// ---- mmd2_quad -------------------------------------------------------------

TEST(Mmd2Quad, ZeroOnIdenticalInputs) {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(5);
  auto x = randn({4, 9}, gen);
  EXPECT_NEAR(mmd2_quad(x, x).item<double>(), 0.0, 1e-12);
}

TEST(Mmd2Quad, BlindToNegatedOnesClouds) {
  for (int64_t n : {1, 4, 16}) {
    auto x = torch::ones({n, n}, torch::kFloat64);
    EXPECT_NEAR(mmd2_quad(x, -x).item<double>(), 0.0, 1e-12) << "n=" << n;
  }
}

TEST(Mmd2Quad, MatchesExplicitFeatureMapOracle) {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(6);
  for (int trial = 0; trial < 10; ++trial) {
    auto x = randn({3, 5}, gen);
    auto y = randn({3, 7}, gen);
    const double oracle = explicit_mmd2(x, y);
    EXPECT_NEAR(mmd2_quad(x, y).item<double>(), oracle, 1e-9 * std::max(1.0, oracle));
  }
}

TEST(Mmd2Quad, BlockedKernelSumsAgreeWithOracleOnWideInputs) {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(7);
  auto x = randn({2, 1500}, gen);
  auto y = randn({2, 1100}, gen) * 1.3;
  const double oracle = explicit_mmd2(x, y);
  EXPECT_NEAR(mmd2_quad(x, y).item<double>(), oracle, 1e-9 * std::max(1.0, oracle));
}

TEST(Mmd2Quad, RejectsFeatureDimensionMismatch) {
  EXPECT_THROW(mmd2_quad(torch::zeros({3, 4}), torch::zeros({2, 4})), DimensionError);
}

// ---- gram_style_loss -------------------------------------------------------

TEST(GramStyleLoss, ZeroOnIdenticalAndNegatedInputs) {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(8);
  auto f = randn({4, 6}, gen);
  EXPECT_EQ(gram_style_loss(f, f).item<double>(), 0.0);
  EXPECT_NEAR(gram_style_loss(f, -f).item<double>(), 0.0, 1e-15);
}

TEST(GramStyleLoss, IsSymmetricPsd) {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(9);
  auto g = gram_matrix(randn({5, 8}, gen));
  EXPECT_TRUE(torch::allclose(g, g.t()));
  EXPECT_GE(torch::linalg_eigvalsh(g).min().item<double>(), -1e-10);
  EXPECT_GE(g.diagonal().min().item<double>(), 0.0);
}

// Brute-force derivation of the Gram/MMD ratio: with equal column counts M,
// Σ(G_F − G_S)² = M²·MMD², so gram_style_loss = MMD² / (4N²).
TEST(GramStyleLoss, ProportionalToMmdWithDerivedConstant) {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(10);
  const int64_t n = 4, m = 6;
  std::vector<double> ratios;
  for (int trial = 0; trial < 20; ++trial) {
    auto f = randn({n, m}, gen);
    auto s = randn({n, m}, gen) * 0.7 + 0.2;
    ratios.push_back(gram_style_loss(f, s).item<double>() / explicit_mmd2(f, s));
  }
  const auto [lo, hi] = std::minmax_element(ratios.begin(), ratios.end());
  EXPECT_LE((*hi - *lo) / *lo, 1e-6);
  const double pinned = 1.0 / (4.0 * n * n);
  EXPECT_NEAR(ratios.front(), pinned, 1e-9 * pinned);
}

TEST(GramStyleLoss, RejectsShapeMismatch) {
  EXPECT_THROW(gram_style_loss(torch::zeros({3, 4}), torch::zeros({3, 5})), DimensionError);
}

// ---- bn_matching_loss ------------------------------------------------------

TEST(BnMatchingLoss, ZeroOnIdenticalInputs) {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(11);
  auto f = randn({3, 10}, gen);
  EXPECT_EQ(bn_matching_loss(f, f).item<double>(), 0.0);
}

TEST(BnMatchingLoss, MeanShiftOnly) {
  // both channels: mean 0, population std 1  vs  mean 1, std 1
  auto f = torch::tensor({{-1.0, 1.0, -1.0, 1.0}, {1.0, -1.0, 1.0, -1.0}}, torch::kFloat64);
  auto s = f + 1.0;
  EXPECT_NEAR(bn_matching_loss(f, s).item<double>(), 2.0, 1e-12);
}

TEST(BnMatchingLoss, MatchesScalarLoopWithDifferentColumnCounts) {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(12);
  for (int trial = 0; trial < 5; ++trial) {
    auto f = randn({6, 11}, gen);
    auto s = randn({6, 17}, gen) * 2.0 - 0.5;
    EXPECT_NEAR(bn_matching_loss(f, s).item<double>(), loop_bn(f, s), 1e-12);
  }
}

TEST(BnMatchingLoss, RejectsChannelMismatch) {
  EXPECT_THROW(bn_matching_loss(torch::zeros({3, 4}), torch::zeros({2, 4})), DimensionError);
}

// ---- properties ------------------------------------------------------------

TEST(DistanceProperties, NegationInvarianceOfSecondOrderLosses) {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(13);
  for (int trial = 0; trial < 50; ++trial) {
    const int64_t n = 1 + trial % 8, m = 2 + trial % 13;
    auto x = randn({n, m}, gen) * (1.0 + trial);
    const double scale = std::pow(x.square().sum().item<double>(), 2);
    EXPECT_LE(mmd2_quad(x, -x).item<double>(), 1e-9 * scale);
    EXPECT_LE(gram_style_loss(x, -x).item<double>(), 1e-9 * scale);
  }
}

TEST(DistanceProperties, NonnegativeAndColumnPermutationInvariant) {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(14);
  for (int trial = 0; trial < 30; ++trial) {
    auto f = randn({5, 9}, gen);
    auto s = randn({5, 9}, gen) + 0.3;
    auto perm = torch::randperm(9, gen, torch::kLong);
    auto fp = f.index_select(1, perm);
    for (auto loss : {mmd2_quad, gram_style_loss, bn_matching_loss}) {
      const double v = loss(f, s).item<double>();
      EXPECT_GE(v, 0.0);
      EXPECT_NEAR(loss(fp, s).item<double>(), v, 1e-10 * std::max(1.0, v));
    }
    EXPECT_GE(content_loss(f, s).item<double>(), 0.0);
  }
}

TEST(DistanceGradients, AutodiffMatchesCentralDifferences) {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(15);
  auto f = randn({4, 6}, gen);
  auto s = randn({4, 6}, gen) * 0.8 + 0.1;
  auto y = randn({4, 9}, gen);
  expect_gradient_matches([&](const torch::Tensor& x) { return content_loss(x, s); }, f);
  expect_gradient_matches([&](const torch::Tensor& x) { return gram_style_loss(x, s); }, f);
  expect_gradient_matches([&](const torch::Tensor& x) { return mmd2_quad(x, y); }, f);
  expect_gradient_matches([&](const torch::Tensor& x) { return bn_matching_loss(x, y); }, f);
}

}  // namespace
}  // namespace wst
