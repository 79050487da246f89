// Independent reference implementations used only by the tests. Nothing here
// calls into the library's kernels.
#pragma once

#include <array>
#include <cmath>
#include <random>
#include <vector>

#include "gvt/gaussian2d.hpp"

namespace oracle {

// Mahalanobis weight from an explicitly formed and inverted covariance.
inline double weight(double qx, double qy, const gvt::Gaussian2D& g) {
  const double c = std::cos(g.theta), s = std::sin(g.theta);
  // M = R S
  const double m00 = c * g.s1, m01 = -s * g.s2, m10 = s * g.s1, m11 = c * g.s2;
  const double a = m00 * m00 + m01 * m01, b = m00 * m10 + m01 * m11, d = m10 * m10 + m11 * m11;
  const double det = a * d - b * b;
  const double dx = qx - g.mu[0], dy = qy - g.mu[1];
  const double q = (d * dx * dx - 2.0 * b * dx * dy + a * dy * dy) / det;
  return std::exp(-0.5 * q);
}

// H x W x C grid by the plain double loop over tokens and Gaussians.
inline std::vector<double> render(const std::vector<gvt::Gaussian2D>& gs, std::size_t h, std::size_t w,
                                  std::size_t channels) {
  std::vector<double> out(h * w * channels, 0.0);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const double qx = (static_cast<double>(x) + 0.5) / static_cast<double>(w);
      const double qy = (static_cast<double>(y) + 0.5) / static_cast<double>(h);
      for (const auto& g : gs) {
        const double wt = weight(qx, qy, g);
        for (std::size_t c = 0; c < channels; ++c) out[(y * w + x) * channels + c] += wt * g.coeff[c];
      }
    }
  return out;
}

inline gvt::Gaussian2D random_gaussian(std::mt19937_64& rng, std::size_t channels, double smin = 0.05,
                                       double smax = 0.4) {
  std::uniform_real_distribution<double> u01(0.0, 1.0), ut(0.0, 3.14159), us(smin, smax), uc(-1.0, 1.0);
  gvt::Gaussian2D g;
  g.mu = {u01(rng), u01(rng)};
  g.theta = ut(rng);
  g.s1 = us(rng);
  g.s2 = us(rng);
  g.coeff.resize(channels);
  for (auto& v : g.coeff) v = uc(rng);
  return g;
}

inline std::size_t nearest(const std::vector<double>& entries, std::size_t width, const double* q) {
  std::size_t best = 0;
  double best_d = 0.0;
  for (std::size_t i = 0; i * width < entries.size(); ++i) {
    double d = 0.0;
    for (std::size_t c = 0; c < width; ++c) d += (q[c] - entries[i * width + c]) * (q[c] - entries[i * width + c]);
    if (i == 0 || d < best_d) {
      best = i;
      best_d = d;
    }
  }
  return best;
}

}  // namespace oracle
