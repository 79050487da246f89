// Serial reference kernels against their OpenMP versions.
#include <benchmark/benchmark.h>

#include <random>

#include "gvt/parallel.hpp"
#include "gvt/rasterizer.hpp"
#include "gvt/vq.hpp"

namespace {

gvt::raster::SplatBuffer random_splats(std::size_t k, std::size_t channels) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0), s(0.02, 0.2), c(-1.0, 1.0);
  std::vector<gvt::Gaussian2D> gs(k);
  for (auto& g : gs) {
    g.mu = {u(rng), u(rng)};
    g.theta = 3.0 * u(rng);
    g.s1 = s(rng);
    g.s2 = s(rng);
    g.coeff.resize(channels);
    for (auto& v : g.coeff) v = c(rng);
  }
  return gvt::raster::SplatBuffer::from(gs);
}

// Arg 0: Gaussians, arg 1: grid side.
void BM_RenderSerial(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0)), side = static_cast<std::size_t>(state.range(1));
  const auto buf = random_splats(k, 8);
  std::vector<double> out(side * side * 8);
  for (auto _ : state) {
    gvt::raster::render_serial(buf.view(), {side, side}, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(k * side * side));
}

void BM_RenderParallel(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0)), side = static_cast<std::size_t>(state.range(1));
  const auto buf = random_splats(k, 8);
  std::vector<double> out(side * side * 8);
  for (auto _ : state) {
    gvt::raster::render_parallel(buf.view(), {side, side}, {}, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(k * side * side));
}

void BM_RenderParallelCulled(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0)), side = static_cast<std::size_t>(state.range(1));
  const auto buf = random_splats(k, 8);
  std::vector<double> out(side * side * 8);
  for (auto _ : state) {
    gvt::raster::render_parallel(buf.view(), {side, side}, {.cull = true}, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(k * side * side));
}

void BM_BackwardSerial(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0)), side = static_cast<std::size_t>(state.range(1));
  const auto buf = random_splats(k, 8);
  const std::vector<double> up(side * side * 8, 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(gvt::raster::backward_serial(buf.view(), {side, side}, up));
}

void BM_BackwardParallel(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0)), side = static_cast<std::size_t>(state.range(1));
  const auto buf = random_splats(k, 8);
  const std::vector<double> up(side * side * 8, 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(gvt::raster::backward_parallel(buf.view(), {side, side}, up));
}

// Arg 0: queries, codebook fixed at L = 4096, width 8.
std::pair<gvt::Codebook, std::vector<double>> vq_inputs(std::size_t n) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<double> e(4096 * 8), q(n * 8);
  for (auto& v : e) v = d(rng);
  for (auto& v : q) v = d(rng);
  return {gvt::codebook_from(std::move(e), 4096, 8), std::move(q)};
}

void BM_NearestSerial(benchmark::State& state) {
  const auto [cb, q] = vq_inputs(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(gvt::nearest_all_serial(q, cb));
}

void BM_NearestParallel(benchmark::State& state) {
  const auto [cb, q] = vq_inputs(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(gvt::nearest_all_parallel(q, cb));
}

}  // namespace

BENCHMARK(BM_RenderSerial)->Args({64, 8})->Args({512, 32});
BENCHMARK(BM_RenderParallel)->Args({64, 8})->Args({512, 32});
BENCHMARK(BM_RenderParallelCulled)->Args({64, 8})->Args({512, 32});
BENCHMARK(BM_BackwardSerial)->Args({64, 8})->Args({512, 32});
BENCHMARK(BM_BackwardParallel)->Args({64, 8})->Args({512, 32});
BENCHMARK(BM_NearestSerial)->Arg(192)->Arg(2560);
BENCHMARK(BM_NearestParallel)->Arg(192)->Arg(2560);

int main(int argc, char** argv) {
  gvt::configure_threads();
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
