// Copyright 2026 The GVT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "gvt/tensor.hpp"

// Differentiable tensor operations. All tensors are dense row-major doubles.
// "Suffix broadcast" means the second operand's shape equals a trailing slice
// of the first operand's shape (bias vectors, positional tables).

namespace gvt::nn {

Tensor add(const Tensor& a, const Tensor& b);  // same shape or suffix broadcast of b
Tensor sub(const Tensor& a, const Tensor& b);  // same shape
Tensor mul(const Tensor& a, const Tensor& b);  // same shape or suffix broadcast of b
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);

/// [M,K] x [K,N] -> [M,N]
Tensor matmul(const Tensor& a, const Tensor& b);
/// x[..., in] * W[in, out] (+ bias[out]); leading axes are flattened.
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias = {});
/// [B,M,K] x [B,K,N] -> [B,M,N]
Tensor bmm(const Tensor& a, const Tensor& b);
/// [B,M,K] x [B,N,K]^T -> [B,M,N]
Tensor bmm_nt(const Tensor& a, const Tensor& b);

Tensor reshape(const Tensor& a, Shape shape);
Tensor permute(const Tensor& a, const std::vector<std::size_t>& perm);
Tensor narrow(const Tensor& a, std::size_t axis, std::size_t start, std::size_t length);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
/// Rows of `a` viewed as [R, rest]; repeated indices accumulate in backward.
Tensor index_select(const Tensor& a, const std::vector<std::size_t>& rows);
/// Prepends an axis of length n holding copies of `a`.
Tensor tile_leading(const Tensor& a, std::size_t n);

Tensor sigmoid(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor silu(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor square(const Tensor& a);

Tensor softmax_last(const Tensor& a);
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor mse(const Tensor& a, const Tensor& b);

/// Stops gradient flow.
Tensor detach(const Tensor& a);
/// Forward: soft + offset. Backward: identity onto soft. With
/// offset = hard - soft this is the straight-through estimator.
Tensor straight_through(const Tensor& soft, std::vector<double> offset);

/// Zero-padded 3x3 neighbourhood gather: [T,H,W,C] -> [T,H,W,9C].
Tensor im2col3x3(const Tensor& x);

/// Scalar helpers shared by ops and activations.
double sigmoid_scalar(double x);
double softplus_scalar(double x);

}  // namespace gvt::nn
