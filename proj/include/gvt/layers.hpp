// Copyright 2026 The GVT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <random>
#include <string>

#include "gvt/ops.hpp"
#include "gvt/params.hpp"

// Small building blocks with parameters registered in a ParameterStore.

namespace gvt::nn {

struct Linear {
  Tensor weight;  // [in, out]
  Tensor bias;    // [out]

  Linear() = default;
  /// Weights ~ N(0, gain^2 / in); gain = 0 gives an all-zero layer.
  Linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out, std::mt19937_64& rng,
         double gain = 1.0);
  Tensor operator()(const Tensor& x) const { return linear(x, weight, bias); }
  std::size_t in_features() const { return weight.dim(0); }
  std::size_t out_features() const { return weight.dim(1); }
  void zero();
};

struct LayerNorm {
  Tensor gamma;
  Tensor beta;

  LayerNorm() = default;
  LayerNorm(ParameterStore& store, const std::string& name, std::size_t width);
  Tensor operator()(const Tensor& x) const { return layer_norm(x, gamma, beta); }
};

/// Two-layer perceptron with SiLU in between.
struct Mlp {
  Linear fc1;
  Linear fc2;

  Mlp() = default;
  Mlp(ParameterStore& store, const std::string& name, std::size_t in, std::size_t hidden, std::size_t out,
      std::mt19937_64& rng, double out_gain = 1.0);
  Tensor operator()(const Tensor& x) const { return fc2(silu(fc1(x))); }
};

}  // namespace gvt::nn
