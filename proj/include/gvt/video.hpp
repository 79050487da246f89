// Copyright 2026 The GVT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "gvt/tensor.hpp"

namespace gvt {

/// RGB clip in [0,1], stored frame-major as [T', H', W', 3].
struct VideoClip {
  std::size_t frames = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> data;

  static constexpr std::size_t kChannels = 3;

  VideoClip() = default;
  VideoClip(std::size_t t, std::size_t h, std::size_t w)
      : frames(t), height(h), width(w), data(t * h * w * kChannels, 0.0) {}

  std::size_t size() const { return data.size(); }
  double& at(std::size_t t, std::size_t y, std::size_t x, std::size_t c) {
    return data[((t * height + y) * width + x) * kChannels + c];
  }
  double at(std::size_t t, std::size_t y, std::size_t x, std::size_t c) const {
    return data[((t * height + y) * width + x) * kChannels + c];
  }
  nn::Tensor tensor() const { return nn::Tensor::constant({frames, height, width, kChannels}, data); }
  static VideoClip from_tensor(const nn::Tensor& t);
};

}  // namespace gvt
