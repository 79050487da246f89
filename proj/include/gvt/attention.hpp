// Copyright 2026 The GVT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <utility>

#include "gvt/layers.hpp"
#include "gvt/rasterizer.hpp"

namespace gvt::attn {

using nn::Tensor;

/// Multi-head self-attention over x [B, S, C].
class SelfAttention {
 public:
  SelfAttention() = default;
  SelfAttention(nn::ParameterStore& store, const std::string& name, std::size_t width, std::size_t heads,
                std::mt19937_64& rng);

  Tensor operator()(const Tensor& x) const;
  /// Softmax attention probabilities [B * heads, S, S].
  Tensor weights(const Tensor& x) const;
  void zero_output();

 private:
  std::pair<std::array<Tensor, 3>, Tensor> qkv_probs(const Tensor& x) const;

  std::size_t heads_ = 1;
  std::size_t width_ = 0;
  nn::Linear qkv_;
  nn::Linear out_;
};

/// Pre-norm transformer block: x + MHSA(LN(x)), then x + MLP(LN(x)).
class AttentionBlock {
 public:
  AttentionBlock() = default;
  AttentionBlock(nn::ParameterStore& store, const std::string& name, std::size_t width, std::size_t heads,
                 std::mt19937_64& rng);
  Tensor operator()(const Tensor& x) const;
  void zero_outputs();
  const SelfAttention& attention() const { return attn_; }

 private:
  nn::LayerNorm norm1_;
  SelfAttention attn_;
  nn::LayerNorm norm2_;
  nn::Mlp mlp_;
};

/// Factorized attention over a joint feature [T, N, C]: spatial attention
/// within each time slice, then temporal attention per spatial slot.
class SpatioTemporalAttention {
 public:
  SpatioTemporalAttention() = default;
  SpatioTemporalAttention(nn::ParameterStore& store, const std::string& name, std::size_t width, std::size_t heads,
                          std::mt19937_64& rng);
  Tensor operator()(const Tensor& joint) const;
  void zero_outputs();
  const AttentionBlock& spatial() const { return spatial_; }
  const AttentionBlock& temporal() const { return temporal_; }

 private:
  AttentionBlock spatial_;
  AttentionBlock temporal_;
};

/// Differentiable multi-point bilinear gather.
///  value   [T, N, M*dh]   N = height * width, row-major grid of pixel centers
///  refs    [T, Q, 2]      normalized reference points
///  offsets [T, Q, M, P, 2] added to refs after multiplying by `offset_scale`
///  probs   [T, Q, M, P]   per-point mixing weights
/// returns  [T, Q, M*dh]   out[t,q,m] = sum_p probs * sample(value_m, ref + scale*offset)
/// Points are clamped to the border of the pixel-center lattice.
Tensor deformable_gather(const Tensor& value, std::size_t height, std::size_t width, const Tensor& refs,
                         const Tensor& offsets, const Tensor& probs, double offset_scale);

/// Bilinear interpolation of grid [H, W, C] at a normalized point [2].
Tensor bilinear_sample(const Tensor& grid, const Tensor& point);

struct DeformableConfig {
  std::size_t heads = 4;
  std::size_t points = 4;
};

/// Per time step: queries attend to P learned sampling points per head
/// around their reference position on the value-projected latent grid.
class DeformableCrossAttention {
 public:
  DeformableCrossAttention() = default;
  DeformableCrossAttention(nn::ParameterStore& store, const std::string& name, std::size_t query_width,
                           std::size_t latent_width, DeformableConfig cfg, std::mt19937_64& rng);

  /// queries [T,K,D1], latent [T,N,F] over `grid`, refs [T,K,2] -> [T,K,D1].
  Tensor operator()(const Tensor& queries, const Tensor& latent, const raster::GridSpec& grid,
                    const Tensor& refs) const;
  /// Softmax mixing weights [T,K,M,P] for the given queries.
  Tensor point_weights(const Tensor& queries) const;

  nn::Linear& offsets() { return offsets_; }
  nn::Linear& logits() { return logits_; }
  nn::Linear& value() { return value_; }
  nn::Linear& output() { return out_; }
  const DeformableConfig& config() const { return cfg_; }

 private:
  DeformableConfig cfg_;
  std::size_t width_ = 0;
  nn::Linear offsets_;
  nn::Linear logits_;
  nn::Linear value_;
  nn::Linear out_;
};

struct DstfDims {
  std::size_t gaussian = 69;  // D2
  std::size_t query = 64;     // D1
  std::size_t latent = 64;    // F
  std::size_t heads = 4;      // attention heads (STA and deformable)
  std::size_t points = 4;     // sampling points per deformable head
};

/// Deformable spatio-temporal fusion block.
class Dstf {
 public:
  Dstf() = default;
  Dstf(nn::ParameterStore& store, const std::string& name, DstfDims dims, std::mt19937_64& rng);

  /// gaussians [T,K,D2] (raw; positions in channels 0..1 pre-sigmoid),
  /// queries [T,K,D1], latent [T,N,F] with N = grid.height * grid.width.
  std::pair<Tensor, Tensor> operator()(const Tensor& gaussians, const Tensor& queries, const Tensor& latent,
                                       const raster::GridSpec& grid) const;

  void zero_delta_head();
  void zero_all_outputs();
  DeformableCrossAttention& cross() { return cross_; }
  const DstfDims& dims() const { return dims_; }

 private:
  DstfDims dims_;
  nn::Mlp align_;
  SpatioTemporalAttention sta_in_;
  nn::LayerNorm cross_norm_;
  DeformableCrossAttention cross_;
  SpatioTemporalAttention sta_out_;
  nn::Mlp delta_;
};

}  // namespace gvt::attn
