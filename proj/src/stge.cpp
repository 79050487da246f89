// Copyright 2026 The GVT Authors
// SPDX-License-Identifier: Apache-2.0

#include "gvt/stge.hpp"

#include <cmath>

namespace gvt {

std::array<double, 2> grid_position(std::size_t k, std::size_t count) {
  const auto cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(count))));
  const std::size_t rows = (count + cols - 1) / cols;
  return {(static_cast<double>(k % cols) + 0.5) / static_cast<double>(cols),
          (static_cast<double>(k / cols) + 0.5) / static_cast<double>(rows)};
}

Stge::Stge(nn::ParameterStore& store, const ModelConfig& cfg, std::mt19937_64& rng) : cfg_(cfg) {
  cfg.validate();
  const std::size_t k = cfg.gaussians, d2 = cfg.gaussian_width;
  const auto cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(k))));
  const std::size_t rows = (k + cols - 1) / cols;
  std::uniform_real_distribution<double> jitter(-cfg.init_jitter, cfg.init_jitter);
  std::normal_distribution<double> small(0.0, 0.02);
  // Splat size about one grid cell.
  const double cell = 1.0 / static_cast<double>(std::max(cols, rows));
  const double raw_scale = std::log(std::expm1(0.6 * cell - kMinScale));
  std::vector<double> g(k * d2);
  for (std::size_t i = 0; i < k; ++i) {
    auto pos = grid_position(i, k);
    pos[0] += jitter(rng) / static_cast<double>(cols);
    pos[1] += jitter(rng) / static_cast<double>(rows);
    double* row = g.data() + i * d2;
    row[0] = std::log(pos[0] / (1.0 - pos[0]));
    row[1] = std::log(pos[1] / (1.0 - pos[1]));
    row[2] = 0.0;
    row[3] = raw_scale;
    row[4] = raw_scale;
    for (std::size_t c = 5; c < d2; ++c) row[c] = small(rng);
  }
  init_gaussians_ = store.add("stge.init.gaussians", {k, d2}, std::move(g));
  init_queries_ = store.add_normal("stge.init.queries", {k, cfg.query_width}, 0.5, rng);
  init_masks_ = store.add_normal("gsp.init.masks", {k, cfg.mask_width}, 0.5, rng);

  project_ = nn::Linear(store, "stge.latent.project", cfg.encoder_width, cfg.latent_width, rng);
  positional_ = store.add_normal("stge.latent.positional", {cfg.latent_height() * cfg.latent_width_px(), cfg.latent_width},
                                 0.02, rng);
  latent_sta_ = attn::SpatioTemporalAttention(store, "stge.latent.sta", cfg.latent_width, cfg.heads, rng);
  attn::DstfDims dims{cfg.gaussian_width, cfg.query_width, cfg.latent_width, cfg.heads, cfg.points};
  for (std::size_t b = 0; b < cfg.blocks; ++b) {
    blocks_.emplace_back(store, "stge.dstf" + std::to_string(b), dims, rng);
  }
  head_ = nn::Mlp(store, "stge.head", d2, d2, cfg.gaussian_dim, rng, 0.1);
}

InitState Stge::init_gaussians() const {
  const std::size_t t = cfg_.time_steps;
  return {nn::tile_leading(init_gaussians_, t), nn::tile_leading(init_queries_, t), nn::tile_leading(init_masks_, t)};
}

Tensor Stge::prepare_latent(const Tensor& z_raw) const {
  if (z_raw.rank() != 4 || z_raw.dim(3) != cfg_.encoder_width || z_raw.dim(1) != cfg_.latent_height() ||
      z_raw.dim(2) != cfg_.latent_width_px()) {
    throw nn::NumericsError("prepare_latent: expected [T," + std::to_string(cfg_.latent_height()) + "," +
                            std::to_string(cfg_.latent_width_px()) + "," + std::to_string(cfg_.encoder_width) +
                            "], got " + nn::shape_str(z_raw.shape()));
  }
  const std::size_t t = z_raw.dim(0), n = z_raw.dim(1) * z_raw.dim(2);
  Tensor z = nn::reshape(project_(z_raw), {t, n, cfg_.latent_width});
  z = nn::add(z, positional_);
  return latent_sta_(z);
}

Tensor Stge::forward(const Tensor& latent, const InitState& init) const {
  Tensor g = init.gaussians;
  Tensor q = init.queries;
  for (const auto& block : blocks_) {
    std::tie(g, q) = block(g, q, latent, grid());
  }
  // The head refines the leading D channels of the fused state.
  Tensor skip = nn::narrow(g, 2, 0, cfg_.gaussian_dim);
  return nn::add(skip, head_(g));
}

GaussianTensors activate_tensors(const Tensor& raw) {
  if (raw.rank() != 3 || raw.dim(2) < 6) throw nn::NumericsError("activate: expected [T,K,D>=6]");
  const std::size_t d = raw.dim(2);
  GaussianTensors g;
  g.mu = nn::sigmoid(nn::narrow(raw, 2, 0, 2));
  Tensor theta = nn::reshape(nn::narrow(raw, 2, 2, 1), {raw.dim(0), raw.dim(1)});
  std::vector<double> wrap(theta.numel());
  for (std::size_t i = 0; i < wrap.size(); ++i) wrap[i] = wrap_theta(theta.data()[i]) - theta.data()[i];
  g.theta = nn::straight_through(theta, std::move(wrap));
  g.scale = nn::add_scalar(nn::softplus(nn::narrow(raw, 2, 3, 2)), kMinScale);
  g.coeff = nn::narrow(raw, 2, 5, d - 5);
  return g;
}

std::vector<std::vector<Gaussian2D>> to_records(const GaussianTensors& g) {
  const std::size_t t_dim = g.mu.dim(0), k_dim = g.mu.dim(1), c_dim = g.coeff.dim(2);
  std::vector<std::vector<Gaussian2D>> out(t_dim, std::vector<Gaussian2D>(k_dim));
  for (std::size_t t = 0; t < t_dim; ++t) {
    for (std::size_t k = 0; k < k_dim; ++k) {
      const std::size_t i = t * k_dim + k;
      auto& r = out[t][k];
      r.mu = {g.mu.data()[2 * i], g.mu.data()[2 * i + 1]};
      r.theta = g.theta.data()[i];
      r.s1 = g.scale.data()[2 * i];
      r.s2 = g.scale.data()[2 * i + 1];
      r.coeff.assign(g.coeff.data().begin() + static_cast<std::ptrdiff_t>(i * c_dim),
                     g.coeff.data().begin() + static_cast<std::ptrdiff_t>((i + 1) * c_dim));
    }
  }
  return out;
}

}  // namespace gvt
