// Copyright 2026 The GVT Authors
// SPDX-License-Identifier: Apache-2.0

#include "gvt/gaussian2d.hpp"

#include <algorithm>
#include <cmath>

#include "gvt/ops.hpp"

namespace gvt {

namespace {

constexpr double kPi = std::numbers::pi;

double log_scale_unit(double s) {
  const double lo = std::log(kScaleQuantMin);
  const double hi = std::log(kScaleQuantMax);
  return std::clamp((std::log(s) - lo) / (hi - lo), 0.0, 1.0);
}

double scale_from_unit(double u) {
  const double lo = std::log(kScaleQuantMin);
  const double hi = std::log(kScaleQuantMax);
  return std::exp(lo + u * (hi - lo));
}

}  // namespace

double wrap_theta(double theta) {
  double w = std::fmod(theta, kPi);
  if (w < 0.0) w += kPi;
  if (w >= kPi) w = 0.0;  // fmod rounding at the upper edge
  return w;
}

Gaussian2D activate(const RawGaussian& raw) {
  Gaussian2D g;
  g.mu = {nn::sigmoid_scalar(raw.raw_pos[0]), nn::sigmoid_scalar(raw.raw_pos[1])};
  g.theta = wrap_theta(raw.raw_theta);
  g.s1 = nn::softplus_scalar(raw.raw_scales[0]) + kMinScale;
  g.s2 = nn::softplus_scalar(raw.raw_scales[1]) + kMinScale;
  g.coeff = raw.coeff;
  return g;
}

Covariance covariance(double theta, double s1, double s2) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  // M = R S
  const double m00 = c * s1, m01 = -s * s2;
  const double m10 = s * s1, m11 = c * s2;
  Covariance cov;
  cov.sigma[0][0] = m00 * m00 + m01 * m01;
  cov.sigma[0][1] = m00 * m10 + m01 * m11;
  cov.sigma[1][0] = cov.sigma[0][1];
  cov.sigma[1][1] = m10 * m10 + m11 * m11;
  cov.det = cov.sigma[0][0] * cov.sigma[1][1] - cov.sigma[0][1] * cov.sigma[1][0];
  if (!(cov.det >= kMinCovarianceDet)) {
    throw ConditioningError("covariance determinant " + std::to_string(cov.det) + " below 1e-12");
  }
  const double inv = 1.0 / cov.det;
  cov.sigma_inv[0][0] = cov.sigma[1][1] * inv;
  cov.sigma_inv[1][1] = cov.sigma[0][0] * inv;
  cov.sigma_inv[0][1] = -cov.sigma[0][1] * inv;
  cov.sigma_inv[1][0] = cov.sigma_inv[0][1];
  return cov;
}

std::uint32_t quantize_unit(double v, int bits) {
  const double levels = static_cast<double>((1u << bits) - 1u);
  return static_cast<std::uint32_t>(std::lround(std::clamp(v, 0.0, 1.0) * levels));
}

double dequantize_unit(std::uint32_t q, int bits) {
  return static_cast<double>(q) / static_cast<double>((1u << bits) - 1u);
}

QuantizedGeometry quantize_geometry(const GeometryFields& g) {
  QuantizedGeometry q;
  q.qx = quantize_unit(g.mu[0], kPositionBits);
  q.qy = quantize_unit(g.mu[1], kPositionBits);
  // pi itself (the top dequantized level) is kept rather than wrapped to 0 so
  // that quantize(dequantize(q)) == q holds for every code.
  const double theta = (g.theta >= 0.0 && g.theta <= kPi) ? g.theta : wrap_theta(g.theta);
  q.qtheta = quantize_unit(theta / kPi, kThetaBits);
  q.qs1 = quantize_unit(log_scale_unit(g.s1), kScaleBits);
  q.qs2 = quantize_unit(log_scale_unit(g.s2), kScaleBits);
  return q;
}

QuantizedGeometry quantize_geometry(const Gaussian2D& g) {
  return quantize_geometry(GeometryFields{g.mu, g.theta, g.s1, g.s2});
}

GeometryFields dequantize_geometry(const QuantizedGeometry& q) {
  GeometryFields g;
  g.mu = {dequantize_unit(q.qx, kPositionBits), dequantize_unit(q.qy, kPositionBits)};
  g.theta = dequantize_unit(q.qtheta, kThetaBits) * kPi;
  g.s1 = scale_from_unit(dequantize_unit(q.qs1, kScaleBits));
  g.s2 = scale_from_unit(dequantize_unit(q.qs2, kScaleBits));
  return g;
}

bool geometry_codes_valid(const QuantizedGeometry& q) {
  constexpr std::uint32_t pmax = (1u << kPositionBits) - 1u;
  constexpr std::uint32_t tmax = (1u << kThetaBits) - 1u;
  constexpr std::uint32_t smax = (1u << kScaleBits) - 1u;
  return q.qx <= pmax && q.qy <= pmax && q.qtheta <= tmax && q.qs1 <= smax && q.qs2 <= smax;
}

}  // namespace gvt
