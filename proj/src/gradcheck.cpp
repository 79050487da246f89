// Copyright 2026 The GVT Authors
// SPDX-License-Identifier: Apache-2.0

#include "gvt/gradcheck.hpp"

#include <random>

#include "gvt/attention.hpp"
#include "gvt/harness.hpp"
#include "gvt/pipeline.hpp"

namespace gvt {

namespace {

using nn::GradCheckReport;
using nn::Tensor;

Tensor random_variable(nn::Shape shape, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(nn::numel(shape));
  for (auto& x : v) x = u(rng);
  return Tensor::variable(std::move(shape), std::move(v));
}

void merge(GradCheckReport& into, const GradCheckReport& part, std::size_t trial) {
  for (auto e : part.entries) {
    e.label = "trial" + std::to_string(trial) + "/" + e.label;
    if (into.entries.empty() || e.rel_error > into.worst.rel_error) into.worst = e;
    into.entries.push_back(e);
  }
  into.max_rel_error = into.worst.rel_error;
  into.passed = into.passed && part.passed;
}

// Random projection of several outputs to one scalar.
Tensor project(const std::vector<Tensor>& outs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Tensor total;
  for (const auto& o : outs) {
    std::vector<double> w(o.numel());
    for (auto& x : w) x = u(rng);
    Tensor term = nn::sum(nn::mul(o, Tensor::constant(o.shape(), std::move(w))));
    total = total.defined() ? nn::add(total, term) : term;
  }
  return total;
}

void jitter_parameters(nn::ParameterStore& store, std::mt19937_64& rng, double stddev) {
  std::normal_distribution<double> n(0.0, stddev);
  for (auto& p : store.all())
    for (auto& v : p.tensor.mutable_data()) v += n(rng);
}

std::vector<nn::GradComponent> sample_parameters(nn::ParameterStore& store, std::size_t count, std::mt19937_64& rng) {
  std::vector<nn::GradComponent> comps;
  const auto& params = store.all();
  for (std::size_t i = 0; i < count; ++i) {
    const auto& p = params[rng() % params.size()];
    const std::size_t idx = rng() % p.tensor.numel();
    comps.push_back({p.tensor, idx, p.name + "[" + std::to_string(idx) + "]"});
  }
  return comps;
}

}  // namespace

GradCheckReport check_radiance_weight(const GradcheckOptions& opt) {
  GradCheckReport report{"radiance_weight", {}, {}, 0.0, true};
  std::mt19937_64 rng(opt.seed);
  for (std::size_t trial = 0; trial < opt.trials; ++trial) {
    // One splat, one token at the grid center, unit coefficient.
    std::vector<Tensor> in = {random_variable({1, 1, 2}, rng, 0.2, 0.8), random_variable({1, 1}, rng, 0.0, 3.0),
                              random_variable({1, 1, 2}, rng, 0.15, 0.6)};
    auto op = [](const std::vector<Tensor>& x) {
      return raster::render_tokens(x[0], x[1], x[2], Tensor::constant({1, 1, 1}, {1.0}), {1, 1});
    };
    merge(report, nn::finite_diff_check("radiance_weight", op, in, opt.epsilon, opt.op_tolerance), trial);
  }
  return report;
}

GradCheckReport check_render_tokens(const GradcheckOptions& opt) {
  GradCheckReport report{"render_token", {}, {}, 0.0, true};
  std::mt19937_64 rng(opt.seed + 1);
  for (std::size_t trial = 0; trial < opt.trials; ++trial) {
    const std::size_t k = 8;
    std::vector<Tensor> in = {random_variable({1, k, 2}, rng, 0.05, 0.95), random_variable({1, k}, rng, 0.0, 3.1),
                              random_variable({1, k, 2}, rng, 0.08, 0.5), random_variable({1, k, 3}, rng, -1.0, 1.0)};
    auto op = [](const std::vector<Tensor>& x) { return raster::render_tokens(x[0], x[1], x[2], x[3], {4, 4}); };
    merge(report, nn::finite_diff_check("render_token", op, in, opt.epsilon, opt.op_tolerance, opt.seed + trial),
          trial);
  }
  return report;
}

GradCheckReport check_bilinear_sample(const GradcheckOptions& opt) {
  GradCheckReport report{"bilinear_sample", {}, {}, 0.0, true};
  std::mt19937_64 rng(opt.seed + 2);
  for (std::size_t trial = 0; trial < opt.trials; ++trial) {
    std::vector<Tensor> in = {random_variable({4, 5, 3}, rng, -1.0, 1.0), random_variable({2}, rng, 0.15, 0.85)};
    auto op = [](const std::vector<Tensor>& x) { return attn::bilinear_sample(x[0], x[1]); };
    merge(report, nn::finite_diff_check("bilinear_sample", op, in, opt.epsilon, opt.op_tolerance, opt.seed + trial),
          trial);
  }
  return report;
}

GradCheckReport check_deformable_cross_attention(const GradcheckOptions& opt) {
  GradCheckReport report{"deformable_cross_attention", {}, {}, 0.0, true};
  std::mt19937_64 rng(opt.seed + 3);
  for (std::size_t trial = 0; trial < opt.trials; ++trial) {
    nn::ParameterStore store;
    attn::DeformableCrossAttention cross(store, "cross", 8, 8, {2, 2}, rng);
    jitter_parameters(store, rng, 0.2);
    const raster::GridSpec grid{4, 4};
    Tensor q = random_variable({2, 3, 8}, rng, -1.0, 1.0);
    Tensor z = random_variable({2, 16, 8}, rng, -1.0, 1.0);
    Tensor refs = random_variable({2, 3, 2}, rng, 0.2, 0.8);
    auto loss = [&] { return project({cross(q, z, grid, refs)}, opt.seed + trial); };
    std::vector<nn::GradComponent> comps;
    for (const Tensor& t : {q, z, refs})
      for (std::size_t i = 0; i < t.numel(); ++i) comps.push_back({t, i, "input[" + std::to_string(i) + "]"});
    for (auto& c : sample_parameters(store, 24, rng)) comps.push_back(c);
    merge(report, nn::finite_diff_check("deformable_cross_attention", loss, comps, opt.epsilon, opt.op_tolerance),
          trial);
  }
  return report;
}

GradCheckReport check_dstf_block(const GradcheckOptions& opt) {
  GradCheckReport report{"dstf_block", {}, {}, 0.0, true};
  std::mt19937_64 rng(opt.seed + 4);
  for (std::size_t trial = 0; trial < opt.trials; ++trial) {
    nn::ParameterStore store;
    attn::Dstf block(store, "dstf", {13, 8, 8, 2, 2}, rng);
    jitter_parameters(store, rng, 0.1);
    const raster::GridSpec grid{4, 4};
    Tensor g = random_variable({2, 4, 13}, rng, -1.0, 1.0);
    Tensor q = random_variable({2, 4, 8}, rng, -1.0, 1.0);
    Tensor z = random_variable({2, 16, 8}, rng, -1.0, 1.0);
    auto loss = [&] {
      auto [g2, q2] = block(g, q, z, grid);
      return project({g2, q2}, opt.seed + trial);
    };
    std::vector<nn::GradComponent> comps;
    for (const Tensor& t : {g, q, z})
      for (std::size_t i = 0; i < t.numel(); i += 3) comps.push_back({t, i, "input[" + std::to_string(i) + "]"});
    for (auto& c : sample_parameters(store, 32, rng)) comps.push_back(c);
    merge(report, nn::finite_diff_check("dstf_block", loss, comps, opt.epsilon, opt.op_tolerance), trial);
  }
  return report;
}

GradCheckReport check_total_loss(const GradcheckOptions& opt) {
  RunConfig cfg = micro_config();
  cfg.train.seed = opt.seed;
  GvtModel model(cfg);
  std::mt19937_64 rng(opt.seed + 5);
  // Non-zero heads so every path carries gradient.
  jitter_parameters(model.store(), rng, 0.02);
  const auto clips = synthetic_suite(1, cfg.model.frame_height, cfg.model.frame_width, cfg.model.frames(), opt.seed);
  StraightThroughCache cache;
  cache.mode = StraightThroughCache::Mode::Record;
  {
    nn::NoGradGuard no_grad;
    model.forward(clips[0], &cache);
  }
  cache.mode = StraightThroughCache::Mode::Replay;
  auto loss = [&] { return model.forward(clips[0], &cache).total; };
  auto comps = sample_parameters(model.store(), opt.loss_components, rng);
  return nn::finite_diff_check("total_loss", loss, comps, opt.loss_epsilon, opt.loss_tolerance);
}

std::vector<GradCheckReport> gradcheck_suite(const GradcheckOptions& opt) {
  return {check_radiance_weight(opt),
          check_render_tokens(opt),
          check_bilinear_sample(opt),
          check_deformable_cross_attention(opt),
          check_dstf_block(opt),
          check_total_loss(opt)};
}

}  // namespace gvt
