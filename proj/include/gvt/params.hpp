// Copyright 2026 The GVT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "gvt/tensor.hpp"

namespace gvt::nn {

struct Parameter {
  std::string name;
  Tensor tensor;
};

using GradientMap = std::map<std::string, std::vector<double>>;

/// Owns the learnable leaves of a model, keyed by unique module-qualified names.
class ParameterStore {
 public:
  Tensor add(const std::string& name, Shape shape, std::vector<double> init);
  Tensor add_normal(const std::string& name, Shape shape, double stddev, std::mt19937_64& rng);
  Tensor add_constant(const std::string& name, Shape shape, double value);

  const std::vector<Parameter>& all() const { return params_; }
  std::vector<Parameter>& all() { return params_; }
  const Parameter* find(const std::string& name) const;
  Tensor get(const std::string& name) const;
  std::size_t total_size() const;
  void zero_grad();

 private:
  std::vector<Parameter> params_;
  std::map<std::string, std::size_t> index_;
};

/// d(loss)/d(parameter) for every parameter (zeros where unreachable).
GradientMap backward_grad(const Tensor& loss, ParameterStore& store);

/// One perturbable scalar: element `index` of leaf `tensor`.
struct GradComponent {
  Tensor tensor;
  std::size_t index = 0;
  std::string label;
};

struct GradCheckEntry {
  std::string label;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  std::string name;
  std::vector<GradCheckEntry> entries;
  GradCheckEntry worst;
  double max_rel_error = 0.0;
  bool passed = true;
};

/// Relative error with a small absolute floor so exact zeros compare cleanly.
double relative_error(double analytic, double numeric, double floor = 1e-7);

/// Central differences vs the tape's gradient for each listed component.
/// `loss_fn` must rebuild the graph from the current leaf values and return a
/// scalar.
GradCheckReport finite_diff_check(const std::string& name, const std::function<Tensor()>& loss_fn,
                                  std::vector<GradComponent> components, double epsilon, double tolerance);

/// Convenience form for an op over leaf inputs: a non-scalar output is reduced
/// with a fixed pseudo-random projection before differentiation.
GradCheckReport finite_diff_check(const std::string& name,
                                  const std::function<Tensor(const std::vector<Tensor>&)>& op,
                                  const std::vector<Tensor>& inputs, double epsilon, double tolerance,
                                  std::uint64_t projection_seed = 7);

/// First-order adaptive optimizer with global gradient-norm clipping.
class Adam {
 public:
  struct Options {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double clip_norm = 1.0;
    // lr multiplier for parameters whose name starts with a given prefix
    std::vector<std::pair<std::string, double>> lr_scale;
  };

  explicit Adam(Options options) : opt_(options) {}
  /// Returns the pre-clip global gradient norm.
  double step(ParameterStore& store);
  const Options& options() const { return opt_; }
  void set_lr(double lr) { opt_.lr = lr; }

 private:
  Options opt_;
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> moments_;
  std::int64_t t_ = 0;
};

}  // namespace gvt::nn
