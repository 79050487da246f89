// Copyright 2026 The GVT Authors
// SPDX-License-Identifier: Apache-2.0

#include "gvt/layers.hpp"

#include <algorithm>
#include <cmath>

namespace gvt::nn {

Linear::Linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out, std::mt19937_64& rng,
               double gain) {
  weight = store.add_normal(name + ".weight", {in, out}, gain / std::sqrt(static_cast<double>(in)), rng);
  bias = store.add_constant(name + ".bias", {out}, 0.0);
}

void Linear::zero() {
  auto w = weight.mutable_data();
  std::fill(w.begin(), w.end(), 0.0);
  auto b = bias.mutable_data();
  std::fill(b.begin(), b.end(), 0.0);
}

LayerNorm::LayerNorm(ParameterStore& store, const std::string& name, std::size_t width) {
  gamma = store.add_constant(name + ".gamma", {width}, 1.0);
  beta = store.add_constant(name + ".beta", {width}, 0.0);
}

Mlp::Mlp(ParameterStore& store, const std::string& name, std::size_t in, std::size_t hidden, std::size_t out,
         std::mt19937_64& rng, double out_gain)
    : fc1(store, name + ".fc1", in, hidden, rng), fc2(store, name + ".fc2", hidden, out, rng, out_gain) {}

}  // namespace gvt::nn
