// Copyright 2026 The GVT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <span>
#include <vector>

#include "gvt/gaussian2d.hpp"
#include "gvt/tensor.hpp"

namespace gvt::raster {

struct GridSpec {
  std::size_t height = 1;
  std::size_t width = 1;
};

/// Pixel-center convention: token (y, x) sits at ((x + 0.5) / W, (y + 0.5) / H).
std::array<double, 2> token_center(const GridSpec& grid, std::size_t y, std::size_t x);

struct RenderOptions {
  /// Skip (token, Gaussian) pairs outside the 1e-6 weight ellipse.
  bool cull = false;
};

inline constexpr double kCullWeight = 1e-6;

struct TokenGrid {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<double> values;  // H x W x C

  std::span<const double> token(std::size_t y, std::size_t x) const {
    return std::span<const double>(values).subspan((y * width + x) * channels, channels);
  }
};

/// Structure-of-arrays view over K activated Gaussians.
struct SplatView {
  std::size_t count = 0;
  std::size_t channels = 0;
  const double* mu = nullptr;     // K x 2
  const double* theta = nullptr;  // K
  const double* scale = nullptr;  // K x 2
  const double* coeff = nullptr;  // K x C
};

/// Gradients with the same layout as SplatView.
struct SplatGrads {
  std::vector<double> mu, theta, scale, coeff;
};

/// Owning SoA storage built from Gaussian2D records.
struct SplatBuffer {
  std::size_t channels = 0;
  std::vector<double> mu, theta, scale, coeff;

  static SplatBuffer from(std::span<const Gaussian2D> gaussians);
  SplatView view() const;
};

double radiance_weight(const std::array<double, 2>& query, const Gaussian2D& g);
std::vector<double> render_token(const std::array<double, 2>& query, std::span<const Gaussian2D> gaussians,
                                 std::size_t channels = 0);
TokenGrid render_grid(std::span<const Gaussian2D> gaussians, const GridSpec& grid, const RenderOptions& options = {},
                      std::size_t channels = 0);
/// Static Gaussians are duplicated into every time step alongside that step's
/// dynamic set.
std::vector<TokenGrid> render_video(std::span<const Gaussian2D> statics,
                                    const std::vector<std::vector<Gaussian2D>>& dynamics, const GridSpec& grid,
                                    const RenderOptions& options = {}, std::size_t channels = 0);

// Kernels. `out` / `upstream` are H x W x C. The serial versions are the
// straightforward double loop kept as the reference implementation.
void render_serial(const SplatView& splats, const GridSpec& grid, std::span<double> out);
void render_parallel(const SplatView& splats, const GridSpec& grid, const RenderOptions& options, std::span<double> out);
SplatGrads backward_serial(const SplatView& splats, const GridSpec& grid, std::span<const double> upstream);
SplatGrads backward_parallel(const SplatView& splats, const GridSpec& grid, std::span<const double> upstream);

/// Differentiable renderer over T time steps:
/// mu [T,K,2], theta [T,K], scale [T,K,2], coeff [T,K,C] -> tokens [T,H,W,C].
nn::Tensor render_tokens(const nn::Tensor& mu, const nn::Tensor& theta, const nn::Tensor& scale,
                         const nn::Tensor& coeff, const GridSpec& grid, const RenderOptions& options = {});

}  // namespace gvt::raster
