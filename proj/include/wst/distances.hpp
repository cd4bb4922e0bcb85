#pragma once

#include <torch/torch.h>

// Closed-form feature-distribution losses. Every function takes N×M tensors
// whose columns are samples (one feature vector per spatial position) and is
// differentiable through libtorch autograd.

namespace wst {

/// ½·Σ(F − P)², spatially aligned. Throws DimensionError unless shapes match.
torch::Tensor content_loss(const torch::Tensor& generated, const torch::Tensor& target);

/// Explicit feature map of the quadratic kernel (xᵀy)² for a length-n vector:
/// [x_n², …, x_1², √2·x_n·x_{n−1}, …, √2·x_n·x_1, √2·x_{n−1}·x_{n−2}, …, √2·x_2·x_1]
/// (1-based indices), length n(n+1)/2.
torch::Tensor quad_feature_map(const torch::Tensor& x);

/// Squared MMD with k(x,y) = (xᵀy)², biased V-statistic:
/// mean k(x_i,x_j) + mean k(y_i,y_j) − 2·mean k(x_i,y_j).
/// X is n×a, Y is n×b. Kernel sums are evaluated blockwise from inner products.
torch::Tensor mmd2_quad(const torch::Tensor& x, const torch::Tensor& y);

/// F·Fᵀ.
torch::Tensor gram_matrix(const torch::Tensor& features);

/// (1 / 4N²M²)·Σ(G_F − G_S)² for N×M inputs of identical shape.
///
/// With equal column counts this is exactly mmd2_quad / (4N²).
torch::Tensor gram_style_loss(const torch::Tensor& generated, const torch::Tensor& style);

/// Σ_i (mean(F_i) − mean(S_i))² + (σ(F_i) − σ(S_i))² over channels i, with σ the
/// population standard deviation over columns. Column counts may differ.
torch::Tensor bn_matching_loss(const torch::Tensor& generated, const torch::Tensor& style);

}  // namespace wst
