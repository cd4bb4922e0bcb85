#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <torch/torch.h>

// Exact Wasserstein-1 on small uniform empirical measures under the
// Euclidean ground metric, plus the 1-D closed form and a sliced surrogate.

namespace wst {

/// n points in R^d, stored row-major; every point carries mass 1/n.
class PointCloud {
 public:
  PointCloud() = default;
  PointCloud(int64_t count, int64_t dim, std::vector<double> values);

  static PointCloud from_rows(const std::vector<std::vector<double>>& rows);
  /// Rows of an n×d tensor become points.
  static PointCloud from_tensor_rows(const torch::Tensor& rows);
  /// Columns of an N×M feature matrix become points.
  static PointCloud from_feature_columns(const torch::Tensor& features);

  int64_t size() const { return count_; }
  int64_t dim() const { return dim_; }
  std::span<const double> point(int64_t i) const {
    return {values_.data() + i * dim_, static_cast<size_t>(dim_)};
  }
  const std::vector<double>& values() const { return values_; }

  PointCloud scaled(double factor) const;
  /// The points selected by `rows`, in that order.
  PointCloud subset(std::span<const int64_t> rows) const;
  /// Projection of every point onto `direction`.
  std::vector<double> project(std::span<const double> direction) const;
  /// Points as columns of a dim×size float64 tensor.
  torch::Tensor as_feature_columns() const;

 private:
  int64_t count_ = 0;
  int64_t dim_ = 0;
  std::vector<double> values_;
};

/// Largest cloud exact_w1 accepts.
inline constexpr int64_t kExactW1MaxPoints = 1024;

/// Minimum-cost perfect matching on a square cost matrix (row-major, n×n).
/// Returns, for each row, the assigned column.
std::vector<int64_t> solve_assignment(std::span<const double> cost, int64_t n);

/// Exact W1 between the uniform measures on X and Y. Equal sizes are solved
/// as an assignment problem, unequal sizes as a transportation problem over
/// the full coupling polytope. Throws DimensionError on a dimension mismatch
/// and std::length_error when either cloud exceeds kExactW1MaxPoints.
double exact_w1(const PointCloud& x, const PointCloud& y);

/// Mean |x_(i) − y_(i)| over order statistics. Throws DimensionError unless
/// both samples have the same non-zero size.
double w1_1d(std::span<const double> x, std::span<const double> y);

/// Average of w1_1d over `projections` random unit directions. The larger
/// cloud is first subsampled without replacement to the smaller one's size.
double sliced_w1(const PointCloud& x, const PointCloud& y, int projections, std::mt19937_64& rng);

/// As above with explicit directions (each of length d, need not be unit).
double sliced_w1(const PointCloud& x, const PointCloud& y,
                 const std::vector<std::vector<double>>& directions);

}  // namespace wst
