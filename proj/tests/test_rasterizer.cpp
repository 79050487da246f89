#include <doctest.h>

#include <cmath>
#include <random>

#include "gvt/ops.hpp"
#include "gvt/params.hpp"
#include "gvt/rasterizer.hpp"
#include "oracles.hpp"

using namespace gvt;
using raster::GridSpec;

namespace {

std::vector<Gaussian2D> random_set(std::mt19937_64& rng, std::size_t k, std::size_t c) {
  std::vector<Gaussian2D> gs;
  for (std::size_t i = 0; i < k; ++i) gs.push_back(oracle::random_gaussian(rng, c));
  return gs;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  REQUIRE(a.size() == b.size());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("radiance weight closed forms") {
  Gaussian2D g;
  g.mu = {0.3, 0.7};
  g.s1 = g.s2 = 1.0;
  CHECK(raster::radiance_weight(g.mu, g) == 1.0);
  CHECK(raster::radiance_weight({2.3, 0.7}, g) == doctest::Approx(std::exp(-2.0)).epsilon(1e-14));
  CHECK(raster::radiance_weight({2.3, 0.7}, g) == doctest::Approx(0.13534).epsilon(1e-4));
  g.s1 = 2.0;
  CHECK(raster::radiance_weight({1.3, 1.7}, g) == doctest::Approx(std::exp(-0.625)).epsilon(1e-14));
  CHECK(raster::radiance_weight({1.3, 1.7}, g) == doctest::Approx(0.53526).epsilon(1e-4));
  g.s1 = 1e-8;
  CHECK_THROWS_AS(raster::radiance_weight({0.0, 0.0}, g), ConditioningError);
}

TEST_CASE("render_token degenerate and linear cases") {
  Gaussian2D g;
  g.mu = {0.5, 0.5};
  g.s1 = g.s2 = 0.1;
  g.coeff = {1.0, 1.0, 1.0};
  std::vector<Gaussian2D> one{g};
  CHECK(raster::render_token({0.5, 0.5}, one) == std::vector<double>{1.0, 1.0, 1.0});
  CHECK(raster::render_token({0.5, 0.5}, std::span<const Gaussian2D>{}, 4) == std::vector<double>(4, 0.0));
  std::mt19937_64 rng(1);
  auto set = random_set(rng, 6, 3);
  for (auto& s : set) s.coeff.assign(3, 0.0);
  CHECK(raster::render_token({0.2, 0.9}, set) == std::vector<double>(3, 0.0));
}

TEST_CASE("render_token matches the double-loop oracle") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    auto set = random_set(rng, 8, 5);
    auto got = raster::render_token(raster::token_center({3, 5}, 1, 2), set);
    auto want = oracle::render(set, 3, 5, 5);
    std::span<const double> want_token(want.data() + (1 * 5 + 2) * 5, 5);
    CHECK(max_abs_diff(got, want_token) <= 1e-12);
  }
}

TEST_CASE("token centers follow the pixel-center convention") {
  GridSpec grid{4, 8};
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 8; ++x) {
      auto c = raster::token_center(grid, y, x);
      CHECK(c[0] == (x + 0.5) / 8.0);
      CHECK(c[1] == (y + 0.5) / 4.0);
      CHECK(c[0] > 0.0);
      CHECK(c[1] < 1.0);
    }
}

TEST_CASE("render_grid reductions and ordering") {
  std::mt19937_64 rng(3);
  auto set = random_set(rng, 16, 4);
  auto one = raster::render_grid(set, {1, 1});
  CHECK(max_abs_diff(one.values, raster::render_token({0.5, 0.5}, set)) == 0.0);
  auto grid = raster::render_grid(set, {4, 4});
  CHECK(max_abs_diff(grid.values, oracle::render(set, 4, 4, 4)) <= 1e-12);
  auto shuffled = set;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  CHECK(max_abs_diff(raster::render_grid(shuffled, {4, 4}).values, grid.values) <= 1e-12);
}

TEST_CASE("parallel render equals the scalar oracle on 100 random configs") {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<std::size_t> uk(1, 64), ug(1, 16), uc(1, 8);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = uk(rng), h = ug(rng), w = ug(rng), c = uc(rng);
    auto set = random_set(rng, k, c);
    auto buf = raster::SplatBuffer::from(set);
    std::vector<double> par(h * w * c), ser(h * w * c);
    raster::render_parallel(buf.view(), {h, w}, {}, par);
    raster::render_serial(buf.view(), {h, w}, ser);
    auto want = oracle::render(set, h, w, c);
    worst = std::max({worst, max_abs_diff(par, want), max_abs_diff(ser, want)});
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("culling stays within 1e-5 of the exact sum") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    auto set = random_set(rng, 32, 3);
    for (auto& g : set) {
      g.s1 *= 0.2;
      g.s2 *= 0.2;
    }
    auto exact = raster::render_grid(set, {16, 16});
    auto culled = raster::render_grid(set, {16, 16}, {.cull = true});
    CHECK(max_abs_diff(exact.values, culled.values) <= 1e-5);
  }
}

TEST_CASE("linearity in coefficients and additivity over sets") {
  std::mt19937_64 rng(6);
  auto a = random_set(rng, 10, 3), b = random_set(rng, 7, 3);
  auto base = raster::render_grid(a, {6, 6});
  auto scaled = a;
  for (auto& g : scaled)
    for (auto& v : g.coeff) v *= -2.5;
  auto sv = raster::render_grid(scaled, {6, 6});
  for (std::size_t i = 0; i < sv.values.size(); ++i) CHECK(sv.values[i] == doctest::Approx(-2.5 * base.values[i]).epsilon(1e-12));
  auto u = a;
  u.insert(u.end(), b.begin(), b.end());
  auto ru = raster::render_grid(u, {6, 6});
  auto rb = raster::render_grid(b, {6, 6});
  for (std::size_t i = 0; i < ru.values.size(); ++i) CHECK(std::abs(ru.values[i] - base.values[i] - rb.values[i]) <= 1e-12);
}

TEST_CASE("render_video duplicates the static set") {
  std::mt19937_64 rng(7);
  auto statics = random_set(rng, 2, 3);
  std::vector<std::vector<Gaussian2D>> dyn(3);
  for (auto& d : dyn) d = random_set(rng, 2, 3);
  auto frames = raster::render_video(statics, dyn, {5, 5});
  REQUIRE(frames.size() == 3);
  for (std::size_t t = 0; t < 3; ++t) {
    auto all = statics;
    all.insert(all.end(), dyn[t].begin(), dyn[t].end());
    CHECK(max_abs_diff(frames[t].values, oracle::render(all, 5, 5, 3)) <= 1e-12);
  }
  std::vector<std::vector<Gaussian2D>> empty(4);
  auto still = raster::render_video(statics, empty, {5, 5});
  for (const auto& f : still) CHECK(f.values == still[0].values);
  auto single = raster::render_video({}, {dyn[0]}, {5, 5});
  REQUIRE(single.size() == 1);
  CHECK(single[0].values == raster::render_grid(dyn[0], {5, 5}).values);
  std::vector<std::vector<Gaussian2D>> bad{random_set(rng, 1, 4)};
  CHECK_THROWS(raster::render_video(statics, bad, {2, 2}));
}

TEST_CASE("backward kernels agree and have the expected simple cases") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    auto set = random_set(rng, 12, 3);
    auto buf = raster::SplatBuffer::from(set);
    std::vector<double> up(6 * 7 * 3);
    std::normal_distribution<double> n(0.0, 1.0);
    for (auto& v : up) v = n(rng);
    auto a = raster::backward_serial(buf.view(), {6, 7}, up);
    auto b = raster::backward_parallel(buf.view(), {6, 7}, up);
    CHECK(max_abs_diff(a.mu, b.mu) <= 1e-12);
    CHECK(max_abs_diff(a.theta, b.theta) <= 1e-12);
    CHECK(max_abs_diff(a.scale, b.scale) <= 1e-12);
    CHECK(max_abs_diff(a.coeff, b.coeff) <= 1e-12);
  }
  // One Gaussian sitting on the only token: d/dcoeff = upstream, d/dmu = 0.
  Gaussian2D g;
  g.mu = {0.5, 0.5};
  g.s1 = 0.2;
  g.s2 = 0.1;
  g.theta = 0.4;
  g.coeff = {0.3, -0.7};
  std::vector<Gaussian2D> one{g};
  auto buf = raster::SplatBuffer::from(one);
  std::vector<double> up{1.5, -2.0};
  auto gr = raster::backward_serial(buf.view(), {1, 1}, up);
  CHECK(gr.coeff == up);
  CHECK(std::abs(gr.mu[0]) < 1e-15);
  CHECK(std::abs(gr.mu[1]) < 1e-15);
}

TEST_CASE("render_tokens gradients match central differences") {
  using namespace gvt::nn;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.1, 0.9), ut(0.0, 3.0), us(0.1, 0.4), uc(-1.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t t = 2, k = 4, c = 2;
    std::vector<double> mu(t * k * 2), th(t * k), sc(t * k * 2), co(t * k * c);
    for (auto& v : mu) v = u(rng);
    for (auto& v : th) v = ut(rng);
    for (auto& v : sc) v = us(rng);
    for (auto& v : co) v = uc(rng);
    std::vector<Tensor> in{Tensor::variable({t, k, 2}, mu), Tensor::variable({t, k}, th),
                           Tensor::variable({t, k, 2}, sc), Tensor::variable({t, k, c}, co)};
    auto rep = finite_diff_check(
        "render_tokens",
        [](const std::vector<Tensor>& x) { return raster::render_tokens(x[0], x[1], x[2], x[3], {3, 3}); }, in,
        1e-5, 1e-4, trial);
    INFO(rep.worst.label << " " << rep.max_rel_error);
    CHECK(rep.passed);
  }
}
