// Copyright 2026 The GVT Authors
// SPDX-License-Identifier: Apache-2.0

#include "gvt/attention.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace gvt::attn {

using nn::NumericsError;

SelfAttention::SelfAttention(nn::ParameterStore& store, const std::string& name, std::size_t width, std::size_t heads,
                             std::mt19937_64& rng)
    : heads_(heads), width_(width), qkv_(store, name + ".qkv", width, 3 * width, rng),
      out_(store, name + ".out", width, width, rng) {
  if (heads == 0 || width % heads != 0) throw NumericsError(name + ": width must be divisible by heads");
}

std::pair<std::array<Tensor, 3>, Tensor> SelfAttention::qkv_probs(const Tensor& x) const {
  if (x.rank() != 3 || x.dim(2) != width_) {
    throw NumericsError("self-attention: expected [B,S," + std::to_string(width_) + "], got " + nn::shape_str(x.shape()));
  }
  const std::size_t b = x.dim(0), s = x.dim(1), dh = width_ / heads_;
  Tensor qkv = nn::reshape(qkv_(x), {b, s, 3, heads_, dh});
  qkv = nn::reshape(nn::permute(qkv, {2, 0, 3, 1, 4}), {3, b * heads_, s, dh});
  std::array<Tensor, 3> parts;
  for (std::size_t i = 0; i < 3; ++i) parts[i] = nn::reshape(nn::narrow(qkv, 0, i, 1), {b * heads_, s, dh});
  Tensor scores = nn::scale(nn::bmm_nt(parts[0], parts[1]), 1.0 / std::sqrt(static_cast<double>(dh)));
  return {parts, nn::softmax_last(scores)};
}

Tensor SelfAttention::weights(const Tensor& x) const { return qkv_probs(x).second; }

Tensor SelfAttention::operator()(const Tensor& x) const {
  const std::size_t b = x.dim(0), s = x.dim(1), dh = width_ / heads_;
  auto [parts, probs] = qkv_probs(x);
  Tensor ctx = nn::bmm(probs, parts[2]);  // [B*M, S, dh]
  ctx = nn::reshape(nn::permute(nn::reshape(ctx, {b, heads_, s, dh}), {0, 2, 1, 3}), {b, s, width_});
  return out_(ctx);
}

void SelfAttention::zero_output() { out_.zero(); }

AttentionBlock::AttentionBlock(nn::ParameterStore& store, const std::string& name, std::size_t width,
                               std::size_t heads, std::mt19937_64& rng)
    : norm1_(store, name + ".norm1", width), attn_(store, name + ".attn", width, heads, rng),
      norm2_(store, name + ".norm2", width), mlp_(store, name + ".mlp", width, 2 * width, width, rng) {}

Tensor AttentionBlock::operator()(const Tensor& x) const {
  Tensor h = nn::add(x, attn_(norm1_(x)));
  return nn::add(h, mlp_(norm2_(h)));
}

void AttentionBlock::zero_outputs() {
  attn_.zero_output();
  mlp_.fc2.zero();
}

SpatioTemporalAttention::SpatioTemporalAttention(nn::ParameterStore& store, const std::string& name,
                                                 std::size_t width, std::size_t heads, std::mt19937_64& rng)
    : spatial_(store, name + ".spatial", width, heads, rng), temporal_(store, name + ".temporal", width, heads, rng) {}

Tensor SpatioTemporalAttention::operator()(const Tensor& joint) const {
  if (joint.rank() != 3) throw NumericsError("sta: expected [T,N,C], got " + nn::shape_str(joint.shape()));
  Tensor x = spatial_(joint);                     // batch over T, sequence over N
  x = nn::permute(x, {1, 0, 2});                  // [N,T,C]
  x = temporal_(x);                               // batch over N, sequence over T
  return nn::permute(x, {1, 0, 2});
}

void SpatioTemporalAttention::zero_outputs() {
  spatial_.zero_outputs();
  temporal_.zero_outputs();
}

namespace {

// Bilinear tap along one axis of the pixel-center lattice.
struct Tap {
  std::size_t i0 = 0, i1 = 0;
  double frac = 0.0;
  double dcoord = 0.0;  // d(continuous index)/d(normalized coordinate); 0 when clamped
};

Tap make_tap(double coord, std::size_t extent) {
  Tap tap;
  const double n = static_cast<double>(extent);
  double p = coord * n - 0.5;
  tap.dcoord = n;
  if (p <= 0.0) {
    p = 0.0;
    tap.dcoord = 0.0;
  } else if (p >= n - 1.0) {
    p = n - 1.0;
    tap.dcoord = 0.0;
  }
  if (extent == 1) {
    tap.dcoord = 0.0;
    return tap;
  }
  tap.i0 = std::min(static_cast<std::size_t>(std::floor(p)), extent - 2);
  tap.i1 = tap.i0 + 1;
  tap.frac = p - static_cast<double>(tap.i0);
  return tap;
}

}  // namespace

Tensor deformable_gather(const Tensor& value, std::size_t height, std::size_t width, const Tensor& refs,
                         const Tensor& offsets, const Tensor& probs, double offset_scale) {
  if (value.rank() != 3 || value.dim(1) != height * width || offsets.rank() != 5 || offsets.dim(4) != 2 ||
      probs.rank() != 4 || refs.rank() != 3 || refs.dim(2) != 2) {
    throw NumericsError("deformable_gather: bad input ranks");
  }
  const std::size_t t_dim = offsets.dim(0), q_dim = offsets.dim(1), m_dim = offsets.dim(2), p_dim = offsets.dim(3);
  if (value.dim(0) != t_dim || refs.dim(0) != t_dim || refs.dim(1) != q_dim || probs.dim(0) != t_dim ||
      probs.dim(1) != q_dim || probs.dim(2) != m_dim || probs.dim(3) != p_dim || value.dim(2) % m_dim != 0) {
    throw NumericsError("deformable_gather: inconsistent shapes");
  }
  const std::size_t c_all = value.dim(2), dh = c_all / m_dim, n_dim = height * width;

  // Visits every (t, q, m, p) sample with its four weighted corners.
  auto for_each_sample = [=](const std::vector<double>& ref, const std::vector<double>& off, auto&& fn) {
    for (std::size_t t = 0; t < t_dim; ++t)
      for (std::size_t q = 0; q < q_dim; ++q)
        for (std::size_t m = 0; m < m_dim; ++m)
          for (std::size_t p = 0; p < p_dim; ++p) {
            const std::size_t sp = ((t * q_dim + q) * m_dim + m) * p_dim + p;
            const double lx = ref[(t * q_dim + q) * 2] + offset_scale * off[sp * 2];
            const double ly = ref[(t * q_dim + q) * 2 + 1] + offset_scale * off[sp * 2 + 1];
            fn(t, q, m, sp, make_tap(lx, width), make_tap(ly, height));
          }
  };
  auto corner = [=](std::size_t t, std::size_t y, std::size_t x, std::size_t m) {
    return (t * n_dim + y * width + x) * c_all + m * dh;
  };

  std::vector<double> out(t_dim * q_dim * c_all, 0.0);
  {
    const auto& v = value.node()->value;
    const auto& pr = probs.node()->value;
    for_each_sample(refs.node()->value, offsets.node()->value,
                    [&](std::size_t t, std::size_t q, std::size_t m, std::size_t sp, const Tap& tx, const Tap& ty) {
                      const double w00 = (1 - tx.frac) * (1 - ty.frac), w01 = tx.frac * (1 - ty.frac);
                      const double w10 = (1 - tx.frac) * ty.frac, w11 = tx.frac * ty.frac;
                      const double* v00 = v.data() + corner(t, ty.i0, tx.i0, m);
                      const double* v01 = v.data() + corner(t, ty.i0, tx.i1, m);
                      const double* v10 = v.data() + corner(t, ty.i1, tx.i0, m);
                      const double* v11 = v.data() + corner(t, ty.i1, tx.i1, m);
                      double* dst = out.data() + (t * q_dim + q) * c_all + m * dh;
                      const double a = pr[sp];
                      for (std::size_t c = 0; c < dh; ++c)
                        dst[c] += a * (w00 * v00[c] + w01 * v01[c] + w10 * v10[c] + w11 * v11[c]);
                    });
  }

  return nn::make_result(
      "deformable_gather", {t_dim, q_dim, c_all}, std::move(out), {value, refs, offsets, probs},
      [=](nn::Node& self) {
        const auto& v = self.inputs[0]->value;
        const auto& pr = self.inputs[3]->value;
        auto grad_if = [&](std::size_t i) {
          nn::Node* in = self.inputs[i].get();
          return in->requires_grad ? &in->ensure_grad() : nullptr;
        };
        auto* gv = grad_if(0);
        auto* gref = grad_if(1);
        auto* goff = grad_if(2);
        auto* gpr = grad_if(3);
        for_each_sample(
            self.inputs[1]->value, self.inputs[2]->value,
            [&](std::size_t t, std::size_t q, std::size_t m, std::size_t sp, const Tap& tx, const Tap& ty) {
              const double w00 = (1 - tx.frac) * (1 - ty.frac), w01 = tx.frac * (1 - ty.frac);
              const double w10 = (1 - tx.frac) * ty.frac, w11 = tx.frac * ty.frac;
              const std::size_t c00 = corner(t, ty.i0, tx.i0, m), c01 = corner(t, ty.i0, tx.i1, m);
              const std::size_t c10 = corner(t, ty.i1, tx.i0, m), c11 = corner(t, ty.i1, tx.i1, m);
              const double* g = self.grad.data() + (t * q_dim + q) * c_all + m * dh;
              const double a = pr[sp];
              double dprob = 0.0, dfx = 0.0, dfy = 0.0;
              for (std::size_t c = 0; c < dh; ++c) {
                const double sample = w00 * v[c00 + c] + w01 * v[c01 + c] + w10 * v[c10 + c] + w11 * v[c11 + c];
                dprob += g[c] * sample;
                dfx += g[c] * ((1 - ty.frac) * (v[c01 + c] - v[c00 + c]) + ty.frac * (v[c11 + c] - v[c10 + c]));
                dfy += g[c] * ((1 - tx.frac) * (v[c10 + c] - v[c00 + c]) + tx.frac * (v[c11 + c] - v[c01 + c]));
                if (gv) {
                  (*gv)[c00 + c] += a * w00 * g[c];
                  (*gv)[c01 + c] += a * w01 * g[c];
                  (*gv)[c10 + c] += a * w10 * g[c];
                  (*gv)[c11 + c] += a * w11 * g[c];
                }
              }
              if (gpr) (*gpr)[sp] += dprob;
              const double dlx = a * dfx * tx.dcoord;
              const double dly = a * dfy * ty.dcoord;
              if (gref) {
                (*gref)[(t * q_dim + q) * 2] += dlx;
                (*gref)[(t * q_dim + q) * 2 + 1] += dly;
              }
              if (goff) {
                (*goff)[sp * 2] += offset_scale * dlx;
                (*goff)[sp * 2 + 1] += offset_scale * dly;
              }
            });
      });
}

Tensor bilinear_sample(const Tensor& grid, const Tensor& point) {
  if (grid.rank() != 3 || point.numel() != 2) throw NumericsError("bilinear_sample: expects grid [H,W,C] and point [2]");
  const std::size_t h = grid.dim(0), w = grid.dim(1), c = grid.dim(2);
  Tensor value = nn::reshape(grid, {1, h * w, c});
  Tensor refs = nn::reshape(point, {1, 1, 2});
  Tensor zero_offsets = Tensor::zeros({1, 1, 1, 1, 2});
  Tensor one = Tensor::constant({1, 1, 1, 1}, {1.0});
  return nn::reshape(deformable_gather(value, h, w, refs, zero_offsets, one, 1.0), {c});
}

DeformableCrossAttention::DeformableCrossAttention(nn::ParameterStore& store, const std::string& name,
                                                   std::size_t query_width, std::size_t latent_width,
                                                   DeformableConfig cfg, std::mt19937_64& rng)
    : cfg_(cfg), width_(query_width),
      offsets_(store, name + ".offsets", query_width, cfg.heads * cfg.points * 2, rng, 0.0),
      logits_(store, name + ".logits", query_width, cfg.heads * cfg.points, rng),
      value_(store, name + ".value", latent_width, query_width, rng),
      out_(store, name + ".out", query_width, query_width, rng) {
  if (cfg.heads == 0 || query_width % cfg.heads != 0) throw NumericsError(name + ": width must be divisible by heads");
  // Zero offset weights; the bias spreads each head's points on rings of
  // radius 0, 1, 2, ... cells in a head-specific direction.
  auto bias = offsets_.bias.mutable_data();
  for (std::size_t m = 0; m < cfg.heads; ++m) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(m) / static_cast<double>(cfg.heads);
    for (std::size_t p = 0; p < cfg.points; ++p) {
      const double r = static_cast<double>(p);
      bias[(m * cfg.points + p) * 2] = r * std::cos(angle);
      bias[(m * cfg.points + p) * 2 + 1] = r * std::sin(angle);
    }
  }
}

Tensor DeformableCrossAttention::point_weights(const Tensor& queries) const {
  const std::size_t t = queries.dim(0), k = queries.dim(1);
  return nn::softmax_last(nn::reshape(logits_(queries), {t, k, cfg_.heads, cfg_.points}));
}

Tensor DeformableCrossAttention::operator()(const Tensor& queries, const Tensor& latent, const raster::GridSpec& grid,
                                            const Tensor& refs) const {
  if (queries.rank() != 3 || queries.dim(2) != width_) {
    throw NumericsError("deformable cross-attention: queries must be [T,K," + std::to_string(width_) + "], got " +
                        nn::shape_str(queries.shape()));
  }
  if (latent.rank() != 3 || latent.dim(0) != queries.dim(0) || latent.dim(1) != grid.height * grid.width) {
    throw NumericsError("deformable cross-attention: latent " + nn::shape_str(latent.shape()) +
                        " does not match the grid");
  }
  const std::size_t t = queries.dim(0), k = queries.dim(1);
  Tensor off = nn::reshape(offsets_(queries), {t, k, cfg_.heads, cfg_.points, 2});
  Tensor probs = point_weights(queries);
  Tensor values = value_(latent);  // [T,N,D1]
  const double step = 1.0 / static_cast<double>(std::max(grid.height, grid.width));
  Tensor gathered = deformable_gather(values, grid.height, grid.width, refs, off, probs, step);
  return out_(gathered);
}

Dstf::Dstf(nn::ParameterStore& store, const std::string& name, DstfDims dims, std::mt19937_64& rng)
    : dims_(dims), align_(store, name + ".align", dims.gaussian, dims.query, dims.query, rng),
      sta_in_(store, name + ".sta_in", dims.query, dims.heads, rng), cross_norm_(store, name + ".cross_norm", dims.query),
      cross_(store, name + ".cross", dims.query, dims.latent, {dims.heads, dims.points}, rng),
      sta_out_(store, name + ".sta_out", dims.query, dims.heads, rng),
      delta_(store, name + ".delta", dims.query, dims.query, dims.gaussian, rng, 0.0) {}

std::pair<Tensor, Tensor> Dstf::operator()(const Tensor& gaussians, const Tensor& queries, const Tensor& latent,
                                           const raster::GridSpec& grid) const {
  if (gaussians.rank() != 3 || gaussians.dim(2) != dims_.gaussian) {
    throw NumericsError("dstf/align: gaussians must be [T,K," + std::to_string(dims_.gaussian) + "], got " +
                        nn::shape_str(gaussians.shape()));
  }
  if (queries.rank() != 3 || queries.dim(0) != gaussians.dim(0) || queries.dim(1) != gaussians.dim(1) ||
      queries.dim(2) != dims_.query) {
    throw NumericsError("dstf/align: queries " + nn::shape_str(queries.shape()) + " incompatible with gaussians " +
                        nn::shape_str(gaussians.shape()));
  }
  if (latent.rank() != 3 || latent.dim(0) != gaussians.dim(0) || latent.dim(1) != grid.height * grid.width ||
      latent.dim(2) != dims_.latent) {
    throw NumericsError("dstf/cross: latent " + nn::shape_str(latent.shape()) + " incompatible with grid " +
                        std::to_string(grid.height) + "x" + std::to_string(grid.width));
  }
  Tensor q = nn::add(queries, align_(gaussians));
  q = sta_in_(q);
  Tensor refs = nn::sigmoid(nn::narrow(gaussians, 2, 0, 2));
  q = nn::add(q, cross_(cross_norm_(q), latent, grid, refs));
  q = sta_out_(q);
  Tensor g = nn::add(gaussians, delta_(q));
  return {g, q};
}

void Dstf::zero_delta_head() {
  delta_.fc1.zero();
  delta_.fc2.zero();
}

void Dstf::zero_all_outputs() {
  zero_delta_head();
  sta_in_.zero_outputs();
  sta_out_.zero_outputs();
  cross_.output().zero();
}

}  // namespace gvt::attn
