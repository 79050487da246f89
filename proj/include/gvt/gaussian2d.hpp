// Copyright 2026 The GVT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace gvt {

inline constexpr double kMinScale = 1e-4;
inline constexpr double kScaleQuantMin = 1e-3;
inline constexpr double kScaleQuantMax = 1.0;
inline constexpr double kMinCovarianceDet = 1e-12;

inline constexpr int kPositionBits = 6;
inline constexpr int kThetaBits = 3;
inline constexpr int kScaleBits = 5;
inline constexpr int kGeometryBits = 2 * kPositionBits + kThetaBits + 2 * kScaleBits;  // 25

class ConditioningError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unconstrained network output for one Gaussian.
struct RawGaussian {
  std::array<double, 2> raw_pos{};
  double raw_theta = 0.0;
  std::array<double, 2> raw_scales{};
  std::vector<double> coeff;
};

/// Activated splat. Positions live in normalized image coordinates [0,1]^2.
struct Gaussian2D {
  std::array<double, 2> mu{0.5, 0.5};
  double theta = 0.0;
  double s1 = 1.0;
  double s2 = 1.0;
  std::vector<double> coeff;
};

struct Covariance {
  std::array<std::array<double, 2>, 2> sigma{};
  std::array<std::array<double, 2>, 2> sigma_inv{};
  double det = 0.0;
};

struct QuantizedGeometry {
  std::uint32_t qx = 0;
  std::uint32_t qy = 0;
  std::uint32_t qtheta = 0;
  std::uint32_t qs1 = 0;
  std::uint32_t qs2 = 0;

  bool operator==(const QuantizedGeometry&) const = default;
};

struct GeometryFields {
  std::array<double, 2> mu{};
  double theta = 0.0;
  double s1 = 0.0;
  double s2 = 0.0;
};

/// Wraps any angle into [0, pi).
double wrap_theta(double theta);

Gaussian2D activate(const RawGaussian& raw);

/// Sigma = (R S)(R S)^T with a closed-form 2x2 inverse. Throws ConditioningError
/// when det(Sigma) < 1e-12.
Covariance covariance(double theta, double s1, double s2);

QuantizedGeometry quantize_geometry(const Gaussian2D& g);
QuantizedGeometry quantize_geometry(const GeometryFields& g);
GeometryFields dequantize_geometry(const QuantizedGeometry& q);
bool geometry_codes_valid(const QuantizedGeometry& q);

/// Uniform b-bit quantizer on [0,1]: round(v * (2^b - 1)), clamped.
std::uint32_t quantize_unit(double v, int bits);
double dequantize_unit(std::uint32_t q, int bits);

}  // namespace gvt
