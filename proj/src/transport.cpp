#include "wst/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "wst/errors.hpp"

namespace wst {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double euclidean(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    acc += d * d;
  }
  return std::sqrt(acc);
}

std::vector<double> cost_matrix(const PointCloud& x, const PointCloud& y) {
  std::vector<double> cost(static_cast<size_t>(x.size() * y.size()));
  for (int64_t i = 0; i < x.size(); ++i)
    for (int64_t j = 0; j < y.size(); ++j) cost[i * y.size() + j] = euclidean(x.point(i), y.point(j));
  return cost;
}

// Balanced transportation problem with supply ny at every x and demand nx at
// every y (so each unit of flow carries mass 1/(nx·ny)), solved by successive
// shortest paths with Dijkstra on reduced costs. Flows stay integral, so the
// optimum is exact up to floating-point summation.
double transportation_cost(std::span<const double> cost, int64_t nx, int64_t ny) {
  std::vector<int64_t> supply(nx, ny), demand(ny, nx);
  std::vector<int64_t> flow(static_cast<size_t>(nx * ny), 0);
  std::vector<double> pot_x(nx, 0.0), pot_y(ny, 0.0);
  std::vector<double> dist_x(nx), dist_y(ny);
  std::vector<char> done_x(nx), done_y(ny);
  std::vector<int64_t> parent_x(nx), parent_y(ny);  // parent of x is a y; parent of y is an x

  int64_t remaining = nx * ny;
  while (remaining > 0) {
    std::fill(dist_x.begin(), dist_x.end(), kInf);
    std::fill(dist_y.begin(), dist_y.end(), kInf);
    std::fill(done_x.begin(), done_x.end(), 0);
    std::fill(done_y.begin(), done_y.end(), 0);
    for (int64_t i = 0; i < nx; ++i) {
      parent_x[i] = -1;
      if (supply[i] > 0) dist_x[i] = 0.0;
    }

    int64_t target = -1;
    double target_dist = kInf;
    while (true) {
      double best = kInf;
      int64_t node = -1;
      bool is_x = true;
      for (int64_t i = 0; i < nx; ++i)
        if (!done_x[i] && dist_x[i] < best) best = dist_x[i], node = i, is_x = true;
      for (int64_t j = 0; j < ny; ++j)
        if (!done_y[j] && dist_y[j] < best) best = dist_y[j], node = j, is_x = false;
      if (node < 0) break;

      if (is_x) {
        done_x[node] = 1;
        for (int64_t j = 0; j < ny; ++j) {
          if (done_y[j]) continue;
          const double rc = std::max(0.0, cost[node * ny + j] + pot_x[node] - pot_y[j]);
          if (best + rc < dist_y[j]) dist_y[j] = best + rc, parent_y[j] = node;
        }
      } else {
        done_y[node] = 1;
        if (demand[node] > 0) {
          target = node;
          target_dist = best;
          break;
        }
        for (int64_t i = 0; i < nx; ++i) {
          if (done_x[i] || flow[i * ny + node] == 0) continue;
          const double rc = std::max(0.0, -cost[i * ny + node] + pot_y[node] - pot_x[i]);
          if (best + rc < dist_x[i]) dist_x[i] = best + rc, parent_x[i] = node;
        }
      }
    }
    if (target < 0) throw std::logic_error("transportation solver: no augmenting path");

    for (int64_t i = 0; i < nx; ++i) pot_x[i] += std::min(dist_x[i], target_dist);
    for (int64_t j = 0; j < ny; ++j) pot_y[j] += std::min(dist_y[j], target_dist);

    // walk back to the source x, finding the bottleneck
    int64_t amount = demand[target];
    int64_t j = target;
    int64_t i = parent_y[j];
    while (true) {
      const int64_t back = parent_x[i];
      if (back < 0) break;
      amount = std::min(amount, flow[i * ny + back]);
      j = back;
      i = parent_y[j];
    }
    amount = std::min(amount, supply[i]);

    supply[i] -= amount;
    demand[target] -= amount;
    remaining -= amount;
    j = target;
    i = parent_y[j];
    while (true) {
      flow[i * ny + j] += amount;
      const int64_t back = parent_x[i];
      if (back < 0) break;
      flow[i * ny + back] -= amount;
      j = back;
      i = parent_y[j];
    }
  }

  double total = 0.0;
  for (size_t k = 0; k < flow.size(); ++k)
    if (flow[k] != 0) total += static_cast<double>(flow[k]) * cost[k];
  return total / static_cast<double>(nx * ny);
}

void require_same_dim(const PointCloud& x, const PointCloud& y) {
  if (x.size() < 1 || y.size() < 1) throw DimensionError("point clouds must be non-empty");
  if (x.dim() != y.dim()) {
    std::ostringstream msg;
    msg << "point clouds live in different dimensions (" << x.dim() << " vs " << y.dim() << ")";
    throw DimensionError(msg.str());
  }
}

}  // namespace

PointCloud::PointCloud(int64_t count, int64_t dim, std::vector<double> values)
    : count_(count), dim_(dim), values_(std::move(values)) {
  if (count < 0 || dim < 1 || static_cast<int64_t>(values_.size()) != count * dim)
    throw DimensionError("point cloud storage does not match count x dim");
  for (double v : values_)
    if (!std::isfinite(v)) throw std::invalid_argument("point cloud contains non-finite values");
}

PointCloud PointCloud::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw DimensionError("point cloud needs at least one point");
  const int64_t dim = static_cast<int64_t>(rows.front().size());
  std::vector<double> values;
  values.reserve(rows.size() * rows.front().size());
  for (const auto& row : rows) {
    if (static_cast<int64_t>(row.size()) != dim) throw DimensionError("ragged point rows");
    values.insert(values.end(), row.begin(), row.end());
  }
  return PointCloud(static_cast<int64_t>(rows.size()), dim, std::move(values));
}

PointCloud PointCloud::from_tensor_rows(const torch::Tensor& rows) {
  if (rows.dim() != 2) throw DimensionError("expected an n x d tensor");
  auto t = rows.detach().to(torch::kFloat64).contiguous();
  std::vector<double> values(t.data_ptr<double>(), t.data_ptr<double>() + t.numel());
  return PointCloud(t.size(0), t.size(1), std::move(values));
}

PointCloud PointCloud::from_feature_columns(const torch::Tensor& features) {
  if (features.dim() != 2) throw DimensionError("expected an N x M feature matrix");
  return from_tensor_rows(features.t());
}

PointCloud PointCloud::scaled(double factor) const {
  auto values = values_;
  for (double& v : values) v *= factor;
  return PointCloud(count_, dim_, std::move(values));
}

PointCloud PointCloud::subset(std::span<const int64_t> rows) const {
  std::vector<double> values;
  values.reserve(rows.size() * static_cast<size_t>(dim_));
  for (int64_t r : rows) {
    auto p = point(r);
    values.insert(values.end(), p.begin(), p.end());
  }
  return PointCloud(static_cast<int64_t>(rows.size()), dim_, std::move(values));
}

std::vector<double> PointCloud::project(std::span<const double> direction) const {
  if (static_cast<int64_t>(direction.size()) != dim_) throw DimensionError("projection direction has wrong length");
  std::vector<double> out(static_cast<size_t>(count_));
  for (int64_t i = 0; i < count_; ++i) {
    auto p = point(i);
    out[i] = std::inner_product(p.begin(), p.end(), direction.begin(), 0.0);
  }
  return out;
}

torch::Tensor PointCloud::as_feature_columns() const {
  return torch::tensor(values_, torch::kFloat64).view({count_, dim_}).t().contiguous();
}

std::vector<int64_t> solve_assignment(std::span<const double> cost, int64_t n) {
  if (n < 1 || static_cast<int64_t>(cost.size()) != n * n)
    throw DimensionError("assignment cost matrix must be n x n with n >= 1");
  // Kuhn-Munkres with row/column potentials, 1-based with a virtual column 0.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int64_t> match(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int64_t row = 1; row <= n; ++row) {
    match[0] = row;
    int64_t col0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[col0] = 1;
      const int64_t i0 = match[col0];
      double delta = kInf;
      int64_t col1 = 0;
      for (int64_t col = 1; col <= n; ++col) {
        if (used[col]) continue;
        const double cur = cost[(i0 - 1) * n + (col - 1)] - u[i0] - v[col];
        if (cur < minv[col]) minv[col] = cur, way[col] = col0;
        if (minv[col] < delta) delta = minv[col], col1 = col;
      }
      for (int64_t col = 0; col <= n; ++col) {
        if (used[col]) {
          u[match[col]] += delta;
          v[col] -= delta;
        } else {
          minv[col] -= delta;
        }
      }
      col0 = col1;
    } while (match[col0] != 0);
    do {
      const int64_t col1 = way[col0];
      match[col0] = match[col1];
      col0 = col1;
    } while (col0 != 0);
  }
  std::vector<int64_t> assignment(n, -1);
  for (int64_t col = 1; col <= n; ++col) assignment[match[col] - 1] = col - 1;
  return assignment;
}

double exact_w1(const PointCloud& x, const PointCloud& y) {
  require_same_dim(x, y);
  if (x.size() > kExactW1MaxPoints || y.size() > kExactW1MaxPoints) {
    std::ostringstream msg;
    msg << "exact_w1 is limited to " << kExactW1MaxPoints << " points per cloud (got " << x.size()
        << " and " << y.size() << "); use sliced_w1 instead";
    throw std::length_error(msg.str());
  }
  const auto cost = cost_matrix(x, y);
  if (x.size() == y.size()) {
    const int64_t n = x.size();
    const auto assignment = solve_assignment(cost, n);
    double total = 0.0;
    for (int64_t i = 0; i < n; ++i) total += cost[i * n + assignment[i]];
    return total / static_cast<double>(n);
  }
  return transportation_cost(cost, x.size(), y.size());
}

double w1_1d(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.empty()) {
    std::ostringstream msg;
    msg << "w1_1d needs equal, non-zero sample counts (got " << x.size() << " and " << y.size()
        << ")";
    throw DimensionError(msg.str());
  }
  std::vector<double> a(x.begin(), x.end()), b(y.begin(), y.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double total = 0.0;
  for (size_t i = 0; i < a.size(); ++i) total += std::abs(a[i] - b[i]);
  return total / static_cast<double>(a.size());
}

double sliced_w1(const PointCloud& x, const PointCloud& y,
                 const std::vector<std::vector<double>>& directions) {
  require_same_dim(x, y);
  if (x.size() != y.size()) throw DimensionError("sliced_w1 with explicit directions needs equal sizes");
  if (directions.empty()) throw std::invalid_argument("sliced_w1 needs at least one projection");
  double total = 0.0;
  for (const auto& u : directions) total += w1_1d(x.project(u), y.project(u));
  return total / static_cast<double>(directions.size());
}

double sliced_w1(const PointCloud& x, const PointCloud& y, int projections, std::mt19937_64& rng) {
  require_same_dim(x, y);
  if (projections < 1) throw std::invalid_argument("sliced_w1 needs at least one projection");

  auto subsample = [&rng](const PointCloud& cloud, int64_t count) {
    std::vector<int64_t> rows(static_cast<size_t>(cloud.size()));
    std::iota(rows.begin(), rows.end(), 0);
    for (int64_t i = 0; i < count; ++i) {
      std::uniform_int_distribution<int64_t> pick(i, cloud.size() - 1);
      std::swap(rows[i], rows[pick(rng)]);
    }
    rows.resize(static_cast<size_t>(count));
    return cloud.subset(rows);
  };
  const int64_t n = std::min(x.size(), y.size());
  const PointCloud xs = x.size() > n ? subsample(x, n) : x;
  const PointCloud ys = y.size() > n ? subsample(y, n) : y;

  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<double>> directions(static_cast<size_t>(projections));
  for (auto& u : directions) {
    u.resize(static_cast<size_t>(x.dim()));
    double norm = 0.0;
    do {
      for (double& c : u) c = normal(rng);
      norm = std::sqrt(std::inner_product(u.begin(), u.end(), u.begin(), 0.0));
    } while (norm < 1e-12);
    for (double& c : u) c /= norm;
  }
  return sliced_w1(xs, ys, directions);
}

}  // namespace wst
