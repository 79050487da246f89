// Copyright 2026 The GVT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "gvt/attention.hpp"
#include "gvt/config.hpp"
#include "gvt/gaussian2d.hpp"

namespace gvt {

using nn::Tensor;

/// Learnable per-index states duplicated along time.
struct InitState {
  Tensor gaussians;  // [T,K,D2]
  Tensor queries;    // [T,K,D1]
  Tensor masks;      // [T,K,D3]
};

/// Activated Gaussian parameters as tensors.
struct GaussianTensors {
  Tensor mu;     // [T,K,2] in [0,1]
  Tensor theta;  // [T,K]   in [0,pi)
  Tensor scale;  // [T,K,2] >= 1e-4
  Tensor coeff;  // [T,K,D-5]
};

/// Uniform sqrt(K) x sqrt(K)-style grid position of index k, before jitter.
std::array<double, 2> grid_position(std::size_t k, std::size_t count);

/// Spatio-temporal Gaussian embedding: latent video -> T x K raw Gaussians.
class Stge {
 public:
  Stge(nn::ParameterStore& store, const ModelConfig& cfg, std::mt19937_64& rng);

  InitState init_gaussians() const;
  /// z_raw [T,H,W,F_enc] -> joint feature [T,N,F].
  Tensor prepare_latent(const Tensor& z_raw) const;
  /// Runs the B fusion blocks and the final head: [T,K,D] raw parameters laid
  /// out as (pos:2, theta:1, scales:2, coeff:D-5).
  Tensor forward(const Tensor& latent, const InitState& init) const;

  std::vector<attn::Dstf>& blocks() { return blocks_; }
  attn::SpatioTemporalAttention& latent_sta() { return latent_sta_; }
  nn::Linear& latent_projection() { return project_; }
  Tensor positional() const { return positional_; }
  nn::Mlp& head() { return head_; }
  raster::GridSpec grid() const { return {cfg_.latent_height(), cfg_.latent_width_px()}; }

 private:
  ModelConfig cfg_;
  Tensor init_gaussians_;  // [K,D2]
  Tensor init_queries_;    // [K,D1]
  Tensor init_masks_;      // [K,D3]
  nn::Linear project_;     // 1x1 conv F_enc -> F
  Tensor positional_;      // [N,F]
  attn::SpatioTemporalAttention latent_sta_;
  std::vector<attn::Dstf> blocks_;
  nn::Mlp head_;
};

/// sigmoid positions, theta wrapped to [0,pi) (identity gradient), softplus+eps scales.
GaussianTensors activate_tensors(const Tensor& raw);

/// Records [T][K] from activated tensors.
std::vector<std::vector<Gaussian2D>> to_records(const GaussianTensors& g);

}  // namespace gvt
