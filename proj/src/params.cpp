// Copyright 2026 The GVT Authors
// SPDX-License-Identifier: Apache-2.0

#include "gvt/params.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gvt/ops.hpp"

namespace gvt::nn {

Tensor ParameterStore::add(const std::string& name, Shape shape, std::vector<double> init) {
  if (index_.count(name)) throw NumericsError("duplicate parameter name '" + name + "'");
  Tensor t = Tensor::variable(std::move(shape), std::move(init));
  index_[name] = params_.size();
  params_.push_back({name, t});
  return t;
}

Tensor ParameterStore::add_normal(const std::string& name, Shape shape, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = stddev > 0.0 ? dist(rng) : 0.0;
  return add(name, std::move(shape), std::move(v));
}

Tensor ParameterStore::add_constant(const std::string& name, Shape shape, double value) {
  const auto n = numel(shape);
  return add(name, std::move(shape), std::vector<double>(n, value));
}

const Parameter* ParameterStore::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : &params_[it->second];
}

Tensor ParameterStore::get(const std::string& name) const {
  const auto* p = find(name);
  if (!p) throw NumericsError("unknown parameter '" + name + "'");
  return p->tensor;
}

std::size_t ParameterStore::total_size() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor.numel();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

GradientMap backward_grad(const Tensor& loss, ParameterStore& store) {
  store.zero_grad();
  backward(loss);
  GradientMap out;
  for (const auto& p : store.all()) {
    auto g = p.tensor.grad();
    out[p.name] = g.empty() ? std::vector<double>(p.tensor.numel(), 0.0) : std::vector<double>(g.begin(), g.end());
  }
  return out;
}

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport finite_diff_check(const std::string& name, const std::function<Tensor()>& loss_fn,
                                  std::vector<GradComponent> components, double epsilon, double tolerance) {
  GradCheckReport report;
  report.name = name;

  for (auto& c : components) c.tensor.zero_grad();
  {
    Tensor loss = loss_fn();
    backward(loss);
  }
  std::vector<double> analytic;
  analytic.reserve(components.size());
  for (auto& c : components) {
    auto g = c.tensor.grad();
    analytic.push_back(g.empty() ? 0.0 : g[c.index]);
  }

  NoGradGuard no_grad;
  for (std::size_t i = 0; i < components.size(); ++i) {
    auto& c = components[i];
    auto data = c.tensor.mutable_data();
    const double saved = data[c.index];
    data[c.index] = saved + epsilon;
    const double up = loss_fn().item();
    data[c.index] = saved - epsilon;
    const double down = loss_fn().item();
    data[c.index] = saved;
    const double numeric = (up - down) / (2.0 * epsilon);
    // Rounding in the loss itself limits what the difference quotient can
    // resolve; below that level the two gradients count as agreeing.
    const double noise = 4.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(up), std::abs(down)) /
                         (2.0 * epsilon);
    GradCheckEntry e{c.label.empty() ? std::to_string(i) : c.label, analytic[i], numeric,
                     relative_error(analytic[i], numeric, std::max(1e-7, noise / tolerance))};
    if (report.entries.empty() || e.rel_error > report.worst.rel_error) report.worst = e;
    report.entries.push_back(e);
  }
  report.max_rel_error = report.worst.rel_error;
  report.passed = report.max_rel_error <= tolerance;
  return report;
}

GradCheckReport finite_diff_check(const std::string& name,
                                  const std::function<Tensor(const std::vector<Tensor>&)>& op,
                                  const std::vector<Tensor>& inputs, double epsilon, double tolerance,
                                  std::uint64_t projection_seed) {
  std::vector<double> weights;
  auto loss_fn = [&]() {
    Tensor out = op(inputs);
    if (out.numel() == 1) return out;
    if (weights.size() != out.numel()) {
      std::mt19937_64 rng(projection_seed);
      std::uniform_real_distribution<double> u(-1.0, 1.0);
      weights.resize(out.numel());
      for (auto& w : weights) w = u(rng);
    }
    return sum(mul(out, Tensor::constant(out.shape(), weights)));
  };
  std::vector<GradComponent> comps;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    for (std::size_t i = 0; i < inputs[t].numel(); ++i)
      comps.push_back({inputs[t], i, "in" + std::to_string(t) + "[" + std::to_string(i) + "]"});
  }
  return finite_diff_check(name, loss_fn, std::move(comps), epsilon, tolerance);
}

double Adam::step(ParameterStore& store) {
  double sq = 0.0;
  for (const auto& p : store.all()) {
    for (double g : p.tensor.grad()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  const double clip = (opt_.clip_norm > 0.0 && norm > opt_.clip_norm) ? opt_.clip_norm / norm : 1.0;
  ++t_;
  const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
  for (auto& p : store.all()) {
    auto g = p.tensor.grad();
    if (g.empty()) continue;
    auto& [m, v] = moments_[p.name];
    if (m.empty()) {
      m.assign(g.size(), 0.0);
      v.assign(g.size(), 0.0);
    }
    double lr = opt_.lr;
    for (const auto& [prefix, factor] : opt_.lr_scale)
      if (p.name.starts_with(prefix)) lr *= factor;
    auto w = p.tensor.mutable_data();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double gi = g[i] * clip;
      m[i] = opt_.beta1 * m[i] + (1.0 - opt_.beta1) * gi;
      v[i] = opt_.beta2 * v[i] + (1.0 - opt_.beta2) * gi * gi;
      w[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + opt_.eps);
    }
  }
  return norm;
}

}  // namespace gvt::nn
