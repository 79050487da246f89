// Copyright 2026 The GVT Authors
// SPDX-License-Identifier: Apache-2.0

#include "gvt/rasterizer.hpp"

#include <algorithm>
#include <cmath>

namespace gvt::raster {

namespace {

// Per-Gaussian precomputation shared by the parallel forward and backward.
struct Prepared {
  double mx, my;
  double a00, a01, a11;  // Sigma^-1
  double c, s;           // cos/sin theta
  // token-index bounding box of the culling ellipse
  long y0, y1, x0, x1;
};

// Weight falls below kCullWeight once the squared Mahalanobis distance exceeds this.
const double kCullDistanceSq = -2.0 * std::log(kCullWeight);

Prepared prepare(const SplatView& v, std::size_t k, const GridSpec& grid) {
  const double theta = v.theta[k];
  const double s1 = v.scale[2 * k], s2 = v.scale[2 * k + 1];
  const Covariance cov = covariance(theta, s1, s2);
  Prepared p;
  p.mx = v.mu[2 * k];
  p.my = v.mu[2 * k + 1];
  p.a00 = cov.sigma_inv[0][0];
  p.a01 = cov.sigma_inv[0][1];
  p.a11 = cov.sigma_inv[1][1];
  p.c = std::cos(theta);
  p.s = std::sin(theta);
  // Axis-aligned half extents of the ellipse {d : d^T Sigma^-1 d <= r^2}.
  const double rx = std::sqrt(kCullDistanceSq * cov.sigma[0][0]);
  const double ry = std::sqrt(kCullDistanceSq * cov.sigma[1][1]);
  const double w = static_cast<double>(grid.width), h = static_cast<double>(grid.height);
  p.x0 = static_cast<long>(std::floor((p.mx - rx) * w - 0.5));
  p.x1 = static_cast<long>(std::ceil((p.mx + rx) * w - 0.5));
  p.y0 = static_cast<long>(std::floor((p.my - ry) * h - 0.5));
  p.y1 = static_cast<long>(std::ceil((p.my + ry) * h - 0.5));
  return p;
}

std::vector<Prepared> prepare_all(const SplatView& v, const GridSpec& grid) {
  std::vector<Prepared> out(v.count);
  for (std::size_t k = 0; k < v.count; ++k) out[k] = prepare(v, k, grid);
  return out;
}

inline double mahalanobis_sq(const Prepared& p, double dx, double dy) {
  return p.a00 * dx * dx + 2.0 * p.a01 * dx * dy + p.a11 * dy * dy;
}

}  // namespace

std::array<double, 2> token_center(const GridSpec& grid, std::size_t y, std::size_t x) {
  return {(static_cast<double>(x) + 0.5) / static_cast<double>(grid.width),
          (static_cast<double>(y) + 0.5) / static_cast<double>(grid.height)};
}

SplatBuffer SplatBuffer::from(std::span<const Gaussian2D> gaussians) {
  SplatBuffer b;
  b.channels = gaussians.empty() ? 0 : gaussians.front().coeff.size();
  for (const auto& g : gaussians) {
    if (g.coeff.size() != b.channels) throw std::invalid_argument("gaussians disagree on coefficient length");
    b.mu.push_back(g.mu[0]);
    b.mu.push_back(g.mu[1]);
    b.theta.push_back(g.theta);
    b.scale.push_back(g.s1);
    b.scale.push_back(g.s2);
    b.coeff.insert(b.coeff.end(), g.coeff.begin(), g.coeff.end());
  }
  return b;
}

SplatView SplatBuffer::view() const {
  return SplatView{theta.size(), channels, mu.data(), theta.data(), scale.data(), coeff.data()};
}

double radiance_weight(const std::array<double, 2>& query, const Gaussian2D& g) {
  const Covariance cov = covariance(g.theta, g.s1, g.s2);
  const double dx = query[0] - g.mu[0];
  const double dy = query[1] - g.mu[1];
  const double q = cov.sigma_inv[0][0] * dx * dx + 2.0 * cov.sigma_inv[0][1] * dx * dy + cov.sigma_inv[1][1] * dy * dy;
  return std::exp(-0.5 * q);
}

std::vector<double> render_token(const std::array<double, 2>& query, std::span<const Gaussian2D> gaussians,
                                 std::size_t channels) {
  if (!gaussians.empty()) channels = gaussians.front().coeff.size();
  std::vector<double> out(channels, 0.0);
  for (const auto& g : gaussians) {
    if (g.coeff.size() != channels) throw std::invalid_argument("gaussians disagree on coefficient length");
    const double w = radiance_weight(query, g);
    for (std::size_t c = 0; c < channels; ++c) out[c] += w * g.coeff[c];
  }
  return out;
}

TokenGrid render_grid(std::span<const Gaussian2D> gaussians, const GridSpec& grid, const RenderOptions& options,
                      std::size_t channels) {
  const SplatBuffer buf = SplatBuffer::from(gaussians);
  TokenGrid out;
  out.height = grid.height;
  out.width = grid.width;
  out.channels = gaussians.empty() ? channels : buf.channels;
  out.values.assign(grid.height * grid.width * out.channels, 0.0);
  render_parallel(buf.view(), grid, options, out.values);
  return out;
}

std::vector<TokenGrid> render_video(std::span<const Gaussian2D> statics,
                                    const std::vector<std::vector<Gaussian2D>>& dynamics, const GridSpec& grid,
                                    const RenderOptions& options, std::size_t channels) {
  if (!statics.empty()) channels = statics.front().coeff.size();
  for (const auto& step : dynamics) {
    if (!step.empty()) {
      if (!statics.empty() && step.front().coeff.size() != channels)
        throw std::invalid_argument("static and dynamic coefficient dimensions disagree");
      channels = step.front().coeff.size();
    }
  }
  std::vector<TokenGrid> out;
  out.reserve(dynamics.size());
  for (const auto& step : dynamics) {
    std::vector<Gaussian2D> all(statics.begin(), statics.end());
    all.insert(all.end(), step.begin(), step.end());
    out.push_back(render_grid(all, grid, options, channels));
  }
  return out;
}

void render_serial(const SplatView& v, const GridSpec& grid, std::span<double> out) {
  const std::size_t c_dim = v.channels;
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t y = 0; y < grid.height; ++y) {
    for (std::size_t x = 0; x < grid.width; ++x) {
      const auto q = token_center(grid, y, x);
      double* dst = out.data() + (y * grid.width + x) * c_dim;
      for (std::size_t k = 0; k < v.count; ++k) {
        const Covariance cov = covariance(v.theta[k], v.scale[2 * k], v.scale[2 * k + 1]);
        const double dx = q[0] - v.mu[2 * k];
        const double dy = q[1] - v.mu[2 * k + 1];
        const double m = cov.sigma_inv[0][0] * dx * dx + 2.0 * cov.sigma_inv[0][1] * dx * dy +
                         cov.sigma_inv[1][1] * dy * dy;
        const double w = std::exp(-0.5 * m);
        for (std::size_t c = 0; c < c_dim; ++c) dst[c] += w * v.coeff[k * c_dim + c];
      }
    }
  }
}

void render_parallel(const SplatView& v, const GridSpec& grid, const RenderOptions& options, std::span<double> out) {
  const std::size_t c_dim = v.channels;
  const auto prepared = prepare_all(v, grid);
  const auto tokens = static_cast<std::ptrdiff_t>(grid.height * grid.width);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < tokens; ++i) {
    const auto y = static_cast<std::size_t>(i) / grid.width;
    const auto x = static_cast<std::size_t>(i) % grid.width;
    const auto q = token_center(grid, y, x);
    double* dst = out.data() + static_cast<std::size_t>(i) * c_dim;
    std::fill(dst, dst + c_dim, 0.0);
    for (std::size_t k = 0; k < v.count; ++k) {
      const Prepared& p = prepared[k];
      if (options.cull && (static_cast<long>(x) < p.x0 || static_cast<long>(x) > p.x1 ||
                           static_cast<long>(y) < p.y0 || static_cast<long>(y) > p.y1)) {
        continue;
      }
      const double m = mahalanobis_sq(p, q[0] - p.mx, q[1] - p.my);
      if (options.cull && m > kCullDistanceSq) continue;
      const double w = std::exp(-0.5 * m);
      const double* coeff = v.coeff + k * c_dim;
      for (std::size_t c = 0; c < c_dim; ++c) dst[c] += w * coeff[c];
    }
  }
}

namespace {

// Accumulates d(loss)/d(geometry, coeff) of Gaussian k from one token.
struct GeometryAccumulator {
  double gmx = 0, gmy = 0, gtheta = 0, gs1 = 0, gs2 = 0;

  void add(double w, double dot, double dx, double dy, double c, double s, double s1, double s2) {
    // q = u^2/s1^2 + v^2/s2^2 with u = c dx + s dy, v = -s dx + c dy; w = exp(-q/2)
    const double u = c * dx + s * dy;
    const double vv = -s * dx + c * dy;
    const double is1 = 1.0 / (s1 * s1), is2 = 1.0 / (s2 * s2);
    const double dq = -0.5 * w * dot;  // d(loss)/dq
    const double dq_ddx = 2.0 * (u * c * is1 - vv * s * is2);
    const double dq_ddy = 2.0 * (u * s * is1 + vv * c * is2);
    gmx -= dq * dq_ddx;
    gmy -= dq * dq_ddy;
    gtheta += dq * 2.0 * u * vv * (is1 - is2);
    gs1 += dq * (-2.0 * u * u * is1 / s1);
    gs2 += dq * (-2.0 * vv * vv * is2 / s2);
  }
};

SplatGrads make_grads(const SplatView& v) {
  SplatGrads g;
  g.mu.assign(2 * v.count, 0.0);
  g.theta.assign(v.count, 0.0);
  g.scale.assign(2 * v.count, 0.0);
  g.coeff.assign(v.count * v.channels, 0.0);
  return g;
}

}  // namespace

SplatGrads backward_serial(const SplatView& v, const GridSpec& grid, std::span<const double> upstream) {
  const std::size_t c_dim = v.channels;
  SplatGrads g = make_grads(v);
  for (std::size_t y = 0; y < grid.height; ++y) {
    for (std::size_t x = 0; x < grid.width; ++x) {
      const auto q = token_center(grid, y, x);
      const double* up = upstream.data() + (y * grid.width + x) * c_dim;
      for (std::size_t k = 0; k < v.count; ++k) {
        const double s1 = v.scale[2 * k], s2 = v.scale[2 * k + 1];
        const double dx = q[0] - v.mu[2 * k];
        const double dy = q[1] - v.mu[2 * k + 1];
        const double w = radiance_weight(q, Gaussian2D{{v.mu[2 * k], v.mu[2 * k + 1]}, v.theta[k], s1, s2, {}});
        double dot = 0.0;
        for (std::size_t c = 0; c < c_dim; ++c) {
          dot += up[c] * v.coeff[k * c_dim + c];
          g.coeff[k * c_dim + c] += w * up[c];
        }
        GeometryAccumulator acc;
        acc.add(w, dot, dx, dy, std::cos(v.theta[k]), std::sin(v.theta[k]), s1, s2);
        g.mu[2 * k] += acc.gmx;
        g.mu[2 * k + 1] += acc.gmy;
        g.theta[k] += acc.gtheta;
        g.scale[2 * k] += acc.gs1;
        g.scale[2 * k + 1] += acc.gs2;
      }
    }
  }
  return g;
}

SplatGrads backward_parallel(const SplatView& v, const GridSpec& grid, std::span<const double> upstream) {
  const std::size_t c_dim = v.channels;
  const auto prepared = prepare_all(v, grid);
  SplatGrads g = make_grads(v);
  // One Gaussian per iteration, tokens visited in a fixed order: the reduction
  // order does not depend on the thread count.
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t kk = 0; kk < static_cast<std::ptrdiff_t>(v.count); ++kk) {
    const auto k = static_cast<std::size_t>(kk);
    const Prepared& p = prepared[k];
    const double s1 = v.scale[2 * k], s2 = v.scale[2 * k + 1];
    const double* coeff = v.coeff + k * c_dim;
    double* gcoeff = g.coeff.data() + k * c_dim;
    GeometryAccumulator acc;
    for (std::size_t y = 0; y < grid.height; ++y) {
      for (std::size_t x = 0; x < grid.width; ++x) {
        const auto q = token_center(grid, y, x);
        const double dx = q[0] - p.mx, dy = q[1] - p.my;
        const double w = std::exp(-0.5 * mahalanobis_sq(p, dx, dy));
        const double* up = upstream.data() + (y * grid.width + x) * c_dim;
        double dot = 0.0;
        for (std::size_t c = 0; c < c_dim; ++c) {
          dot += up[c] * coeff[c];
          gcoeff[c] += w * up[c];
        }
        acc.add(w, dot, dx, dy, p.c, p.s, s1, s2);
      }
    }
    g.mu[2 * k] = acc.gmx;
    g.mu[2 * k + 1] = acc.gmy;
    g.theta[k] = acc.gtheta;
    g.scale[2 * k] = acc.gs1;
    g.scale[2 * k + 1] = acc.gs2;
  }
  return g;
}

nn::Tensor render_tokens(const nn::Tensor& mu, const nn::Tensor& theta, const nn::Tensor& scale,
                         const nn::Tensor& coeff, const GridSpec& grid, const RenderOptions& options) {
  if (mu.rank() != 3 || mu.dim(2) != 2 || coeff.rank() != 3 || theta.rank() != 2 || scale.rank() != 3 ||
      theta.dim(0) != mu.dim(0) || theta.dim(1) != mu.dim(1) || scale.shape() != mu.shape() ||
      coeff.dim(0) != mu.dim(0) || coeff.dim(1) != mu.dim(1)) {
    throw nn::NumericsError("render_tokens: inconsistent Gaussian tensor shapes");
  }
  const std::size_t t_dim = mu.dim(0), k_dim = mu.dim(1), c_dim = coeff.dim(2);
  const std::size_t per_t = grid.height * grid.width * c_dim;
  auto view_at = [=](const double* m, const double* th, const double* sc, const double* co, std::size_t t) {
    return SplatView{k_dim, c_dim, m + t * k_dim * 2, th + t * k_dim, sc + t * k_dim * 2, co + t * k_dim * c_dim};
  };
  std::vector<double> out(t_dim * per_t, 0.0);
  for (std::size_t t = 0; t < t_dim; ++t) {
    render_parallel(view_at(mu.data().data(), theta.data().data(), scale.data().data(), coeff.data().data(), t), grid,
                    options, std::span<double>(out).subspan(t * per_t, per_t));
  }
  return nn::make_result(
      "render_tokens", {t_dim, grid.height, grid.width, c_dim}, std::move(out), {mu, theta, scale, coeff},
      // Backward is the exact (unculled) gradient.
      [=](nn::Node& self) {
        const double* m = self.inputs[0]->value.data();
        const double* th = self.inputs[1]->value.data();
        const double* sc = self.inputs[2]->value.data();
        const double* co = self.inputs[3]->value.data();
        for (std::size_t t = 0; t < t_dim; ++t) {
          const SplatGrads g = backward_parallel(view_at(m, th, sc, co, t), grid,
                                                 std::span<const double>(self.grad).subspan(t * per_t, per_t));
          auto scatter = [&](std::size_t input, const std::vector<double>& src, std::size_t width) {
            nn::Node* in = self.inputs[input].get();
            if (!in->requires_grad) return;
            auto& dst = in->ensure_grad();
            for (std::size_t i = 0; i < src.size(); ++i) dst[t * k_dim * width + i] += src[i];
          };
          scatter(0, g.mu, 2);
          scatter(1, g.theta, 1);
          scatter(2, g.scale, 2);
          scatter(3, g.coeff, c_dim);
        }
      });
}

}  // namespace gvt::raster
