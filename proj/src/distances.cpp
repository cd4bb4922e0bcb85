#include "wst/distances.hpp"

#include <sstream>

#include "wst/errors.hpp"

namespace wst {

namespace {

constexpr int64_t kKernelBlock = 1024;

void require_matrix(const torch::Tensor& t, const char* what) {
  if (t.dim() != 2 || t.size(1) < 1) {
    std::ostringstream msg;
    msg << what << " must be an N x M matrix with M >= 1, got " << t.sizes();
    throw DimensionError(msg.str());
  }
}

void require_same_shape(const torch::Tensor& a, const torch::Tensor& b, const char* op) {
  require_matrix(a, op);
  require_matrix(b, op);
  if (a.sizes() != b.sizes()) {
    std::ostringstream msg;
    msg << op << ": shape mismatch " << a.sizes() << " vs " << b.sizes();
    throw DimensionError(msg.str());
  }
}

void require_same_rows(const torch::Tensor& a, const torch::Tensor& b, const char* op) {
  require_matrix(a, op);
  require_matrix(b, op);
  if (a.size(0) != b.size(0)) {
    std::ostringstream msg;
    msg << op << ": feature dimension mismatch " << a.size(0) << " vs " << b.size(0);
    throw DimensionError(msg.str());
  }
}

// Σ_ij (a_iᵀ b_j)² without holding the full a×b kernel matrix.
torch::Tensor kernel_sum(const torch::Tensor& a, const torch::Tensor& b) {
  torch::Tensor total = torch::zeros({}, a.options());
  for (int64_t i = 0; i < a.size(1); i += kKernelBlock) {
    auto ai = a.narrow(1, i, std::min(kKernelBlock, a.size(1) - i));
    for (int64_t j = 0; j < b.size(1); j += kKernelBlock) {
      auto bj = b.narrow(1, j, std::min(kKernelBlock, b.size(1) - j));
      total = total + ai.t().mm(bj).square().sum();
    }
  }
  return total;
}

}  // namespace

torch::Tensor content_loss(const torch::Tensor& generated, const torch::Tensor& target) {
  require_same_shape(generated, target, "content_loss");
  return 0.5 * (generated - target).square().sum();
}

torch::Tensor quad_feature_map(const torch::Tensor& x) {
  if (x.dim() != 1 || x.size(0) < 1) throw DimensionError("quad_feature_map expects a non-empty vector");
  const int64_t n = x.size(0);
  std::vector<torch::Tensor> parts;
  parts.reserve(static_cast<size_t>(n * (n + 1) / 2));
  // 0-based position k holds x_{k+1}
  for (int64_t k = n - 1; k >= 0; --k) parts.push_back(x[k].square());
  const double root2 = std::sqrt(2.0);
  for (int64_t i = n - 1; i >= 1; --i)
    for (int64_t j = i - 1; j >= 0; --j) parts.push_back(root2 * x[i] * x[j]);
  return torch::stack(parts);
}

torch::Tensor mmd2_quad(const torch::Tensor& x, const torch::Tensor& y) {
  require_same_rows(x, y, "mmd2_quad");
  const double a = static_cast<double>(x.size(1));
  const double b = static_cast<double>(y.size(1));
  auto value = kernel_sum(x, x) / (a * a) + kernel_sum(y, y) / (b * b) -
               2.0 * kernel_sum(x, y) / (a * b);
  // the V-statistic is a squared norm; rounding can dip a hair below zero
  return value.clamp_min(0.0);
}

torch::Tensor gram_matrix(const torch::Tensor& features) {
  require_matrix(features, "gram_matrix");
  return features.mm(features.t());
}

torch::Tensor gram_style_loss(const torch::Tensor& generated, const torch::Tensor& style) {
  require_same_shape(generated, style, "gram_style_loss");
  const double n = static_cast<double>(generated.size(0));
  const double m = static_cast<double>(generated.size(1));
  return (gram_matrix(generated) - gram_matrix(style)).square().sum() / (4.0 * n * n * m * m);
}

torch::Tensor bn_matching_loss(const torch::Tensor& generated, const torch::Tensor& style) {
  require_same_rows(generated, style, "bn_matching_loss");
  auto mean_f = generated.mean(1);
  auto mean_s = style.mean(1);
  auto std_f = (generated - mean_f.unsqueeze(1)).square().mean(1).sqrt();
  auto std_s = (style - mean_s.unsqueeze(1)).square().mean(1).sqrt();
  return (mean_f - mean_s).square().sum() + (std_f - std_s).square().sum();
}

}  // namespace wst
