// Copyright 2026 The GVT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gvt/attention.hpp"
#include "gvt/gaussian2d.hpp"
#include "gvt/ste_cache.hpp"

namespace gvt {

using nn::Tensor;

struct GspConfig {
  double lambda1 = 5e-3;
  double lambda2 = 2e-2;
  double tau = 0.25;
};

/// Per-index static/dynamic mask. `m` carries hard values forward and the
/// sigmoid gradient backward.
struct BinaryMask {
  Tensor m;                    // [K]
  std::vector<double> soft;    // sigmoid(logits)
  std::vector<std::uint8_t> hard;  // 1 = dynamic

  std::size_t size() const { return hard.size(); }
  std::size_t dynamic_count() const;
  std::size_t static_count() const { return size() - dynamic_count(); }
  double mean() const;
};

/// Separate DSTF branch whose queries are the mask states, followed by a
/// per-index MLP over the flattened time axis.
class MaskBranch {
 public:
  MaskBranch() = default;
  MaskBranch(nn::ParameterStore& store, const std::string& name, const attn::DstfDims& dims, std::size_t time_steps,
             std::mt19937_64& rng, double bias_init = 0.0);

  /// gaussians [T,K,D2], masks [T,K,D3], latent [T,N,F] -> logits [K].
  Tensor operator()(const Tensor& gaussians, const Tensor& masks, const Tensor& latent,
                    const raster::GridSpec& grid) const;

  attn::Dstf& dstf() { return dstf_; }
  nn::Mlp& head() { return head_; }

 private:
  std::size_t time_steps_ = 1;
  attn::Dstf dstf_;
  nn::Mlp head_;
};

/// soft = sigmoid(logits), hard = soft > 0.5 (a tie is static). With
/// `uniforms` (one draw in [0,1) per index) hard is sampled instead:
/// hard = u < soft.
BinaryMask binarize_ste(const Tensor& logits, StraightThroughCache* cache = nullptr,
                        std::span<const double> uniforms = {});

/// Continuous relaxation: m = sigmoid(logits) is used as is, so the blend
/// sees fractional masks. `hard` (soft > 0.5) is kept for token accounting.
BinaryMask relaxed_mask(const Tensor& logits);

/// A mask with fixed hard values and no gradient path.
BinaryMask constant_mask(const std::vector<std::uint8_t>& hard);

/// out[t,k,:] = m_k * x[t,k,:] + (1 - m_k) * x[0,k,:]. With a binary m this
/// replaces static rows by their first time step; gradients reach x and m.
Tensor blend_static(const Tensor& x, const Tensor& m);

/// Static and dynamic sets of records with the index bookkeeping needed to
/// restore T x K order.
struct PartitionedSet {
  std::size_t time_steps = 0;
  std::size_t count = 0;                 // K
  std::vector<std::size_t> static_index;   // ascending k with m_k = 0
  std::vector<std::size_t> dynamic_index;  // ascending k with m_k = 1
  std::vector<Gaussian2D> statics;         // S records from t = 0
  std::vector<std::vector<Gaussian2D>> dynamics;  // [T][K - S]

  std::size_t token_count() const { return statics.size() + time_steps * dynamic_index.size(); }
};

PartitionedSet partition(const std::vector<std::vector<Gaussian2D>>& gaussians, const std::vector<std::uint8_t>& hard);
std::vector<std::vector<Gaussian2D>> reassemble(const PartitionedSet& set);

/// Flat row ids into a [T*K] layout in stream order: statics (k ascending,
/// row k), then dynamics t-major.
std::vector<std::size_t> stored_rows(std::size_t time_steps, const std::vector<std::uint8_t>& hard);

/// lambda1 * mean(m) + lambda2 * relu(mean(m) - tau)
Tensor gsp_loss(const BinaryMask& mask, const GspConfig& cfg);
double gsp_loss_value(double mean_mask, const GspConfig& cfg);

std::size_t token_count(std::size_t k, std::size_t t, std::size_t s);

}  // namespace gvt
