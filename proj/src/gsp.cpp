// Copyright 2026 The GVT Authors
// SPDX-License-Identifier: Apache-2.0

#include "gvt/gsp.hpp"

#include <numeric>

namespace gvt {

std::size_t BinaryMask::dynamic_count() const {
  return static_cast<std::size_t>(std::count(hard.begin(), hard.end(), std::uint8_t{1}));
}

double BinaryMask::mean() const {
  return hard.empty() ? 0.0 : static_cast<double>(dynamic_count()) / static_cast<double>(hard.size());
}

MaskBranch::MaskBranch(nn::ParameterStore& store, const std::string& name, const attn::DstfDims& dims,
                       std::size_t time_steps, std::mt19937_64& rng, double bias_init)
    : time_steps_(time_steps),
      dstf_(store, name + ".dstf", dims, rng),
      head_(store, name + ".head", time_steps * dims.query, dims.query, 1, rng) {
  head_.fc2.bias.mutable_data()[0] = bias_init;
}

Tensor MaskBranch::operator()(const Tensor& gaussians, const Tensor& masks, const Tensor& latent,
                              const raster::GridSpec& grid) const {
  auto [g, q] = dstf_(gaussians, masks, latent, grid);
  (void)g;
  const std::size_t t = q.dim(0), k = q.dim(1), d3 = q.dim(2);
  if (t != time_steps_) {
    throw nn::NumericsError("gsp/mask: expected T=" + std::to_string(time_steps_) + ", got " + std::to_string(t));
  }
  Tensor per_index = nn::reshape(nn::permute(q, {1, 0, 2}), {k, t * d3});
  return nn::reshape(head_(per_index), {k});
}

BinaryMask binarize_ste(const Tensor& logits, StraightThroughCache* cache, std::span<const double> uniforms) {
  BinaryMask mask;
  Tensor soft = nn::sigmoid(logits);
  const std::size_t k = soft.numel();
  mask.soft.assign(soft.data().begin(), soft.data().end());
  std::vector<double> offset(k);
  const bool replay = cache && cache->mode == StraightThroughCache::Mode::Replay;
  if (replay && (cache->mask_offset.size() != k || cache->mask_hard.size() != k)) throw nn::NumericsError("binarize_ste: replay cache size mismatch");
  if (!uniforms.empty() && uniforms.size() != k) throw nn::NumericsError("binarize_ste: need one draw per index");
  mask.hard.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    if (replay) {
      offset[i] = cache->mask_offset[i];
      mask.hard[i] = cache->mask_hard[i];
    } else {
      mask.hard[i] = (uniforms.empty() ? 0.5 < mask.soft[i] : uniforms[i] < mask.soft[i]) ? 1 : 0;
      offset[i] = static_cast<double>(mask.hard[i]) - mask.soft[i];
    }
  }
  if (cache && cache->mode == StraightThroughCache::Mode::Record) {
    cache->mask_offset = offset;
    cache->mask_hard = mask.hard;
  }
  mask.m = nn::straight_through(soft, std::move(offset));
  return mask;
}

BinaryMask relaxed_mask(const Tensor& logits) {
  BinaryMask mask;
  mask.m = nn::sigmoid(logits);
  mask.soft.assign(mask.m.data().begin(), mask.m.data().end());
  mask.hard.resize(mask.soft.size());
  for (std::size_t i = 0; i < mask.soft.size(); ++i) mask.hard[i] = 0.5 < mask.soft[i] ? 1 : 0;
  return mask;
}

BinaryMask constant_mask(const std::vector<std::uint8_t>& hard) {
  BinaryMask mask;
  mask.hard = hard;
  mask.soft.assign(hard.begin(), hard.end());
  mask.m = Tensor::constant({hard.size()}, mask.soft);
  return mask;
}

Tensor blend_static(const Tensor& x, const Tensor& m) {
  if (x.rank() < 2 || m.rank() != 1 || m.dim(0) != x.dim(1)) {
    throw nn::NumericsError("blend_static: expected x [T,K,...] and m [K], got " + nn::shape_str(x.shape()) + " and " +
                            nn::shape_str(m.shape()));
  }
  const std::size_t t_dim = x.dim(0), k_dim = x.dim(1), inner = x.numel() / (t_dim * k_dim);
  const auto xv = x.data();
  const auto mv = m.data();
  std::vector<double> out(x.numel());
  for (std::size_t t = 0; t < t_dim; ++t)
    for (std::size_t k = 0; k < k_dim; ++k)
      for (std::size_t c = 0; c < inner; ++c) {
        const std::size_t i = (t * k_dim + k) * inner + c, first = k * inner + c;
        out[i] = mv[k] * xv[i] + (1.0 - mv[k]) * xv[first];
      }
  return nn::make_result("blend_static", x.shape(), std::move(out), {x, m},
                         [t_dim, k_dim, inner](nn::Node& self) {
                           const auto& xs = self.inputs[0]->value;
                           const auto& ms = self.inputs[1]->value;
                           if (self.inputs[0]->requires_grad) {
                             auto& gx = self.inputs[0]->ensure_grad();
                             for (std::size_t t = 0; t < t_dim; ++t)
                               for (std::size_t k = 0; k < k_dim; ++k)
                                 for (std::size_t c = 0; c < inner; ++c) {
                                   const std::size_t i = (t * k_dim + k) * inner + c, first = k * inner + c;
                                   gx[i] += ms[k] * self.grad[i];
                                   gx[first] += (1.0 - ms[k]) * self.grad[i];
                                 }
                           }
                           if (self.inputs[1]->requires_grad) {
                             auto& gm = self.inputs[1]->ensure_grad();
                             for (std::size_t t = 0; t < t_dim; ++t)
                               for (std::size_t k = 0; k < k_dim; ++k)
                                 for (std::size_t c = 0; c < inner; ++c) {
                                   const std::size_t i = (t * k_dim + k) * inner + c, first = k * inner + c;
                                   gm[k] += self.grad[i] * (xs[i] - xs[first]);
                                 }
                           }
                         });
}

PartitionedSet partition(const std::vector<std::vector<Gaussian2D>>& gaussians, const std::vector<std::uint8_t>& hard) {
  PartitionedSet set;
  set.time_steps = gaussians.size();
  set.count = hard.size();
  for (const auto& row : gaussians) {
    if (row.size() != hard.size()) throw nn::NumericsError("partition: mask length does not match K");
  }
  for (std::size_t k = 0; k < hard.size(); ++k) (hard[k] ? set.dynamic_index : set.static_index).push_back(k);
  if (set.time_steps == 0) return set;
  for (auto k : set.static_index) set.statics.push_back(gaussians[0][k]);
  set.dynamics.resize(set.time_steps);
  for (std::size_t t = 0; t < set.time_steps; ++t)
    for (auto k : set.dynamic_index) set.dynamics[t].push_back(gaussians[t][k]);
  return set;
}

std::vector<std::vector<Gaussian2D>> reassemble(const PartitionedSet& set) {
  std::vector<std::vector<Gaussian2D>> out(set.time_steps, std::vector<Gaussian2D>(set.count));
  for (std::size_t t = 0; t < set.time_steps; ++t) {
    for (std::size_t i = 0; i < set.static_index.size(); ++i) out[t][set.static_index[i]] = set.statics[i];
    for (std::size_t i = 0; i < set.dynamic_index.size(); ++i) out[t][set.dynamic_index[i]] = set.dynamics[t][i];
  }
  return out;
}

std::vector<std::size_t> stored_rows(std::size_t time_steps, const std::vector<std::uint8_t>& hard) {
  const std::size_t k_dim = hard.size();
  std::vector<std::size_t> rows;
  for (std::size_t k = 0; k < k_dim; ++k)
    if (!hard[k]) rows.push_back(k);
  for (std::size_t t = 0; t < time_steps; ++t)
    for (std::size_t k = 0; k < k_dim; ++k)
      if (hard[k]) rows.push_back(t * k_dim + k);
  return rows;
}

Tensor gsp_loss(const BinaryMask& mask, const GspConfig& cfg) {
  Tensor mean = nn::mean(mask.m);
  Tensor hinge = nn::relu(nn::add_scalar(mean, -cfg.tau));
  return nn::add(nn::scale(mean, cfg.lambda1), nn::scale(hinge, cfg.lambda2));
}

double gsp_loss_value(double mean_mask, const GspConfig& cfg) {
  return cfg.lambda1 * mean_mask + cfg.lambda2 * std::max(0.0, mean_mask - cfg.tau);
}

std::size_t token_count(std::size_t k, std::size_t t, std::size_t s) {
  if (s > k) throw nn::NumericsError("token_count: S exceeds K");
  return s + (k - s) * t;
}

}  // namespace gvt
