// Copyright 2026 The GVT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace gvt {

// Straight-through paths have piecewise-constant forward offsets. Recording
// them once and replaying lets finite differences probe the surrogate
// gradient instead of tripping over the jumps.
struct StraightThroughCache {
  enum class Mode { Off, Record, Replay };
  Mode mode = Mode::Off;
  std::vector<double> mask_offset;      // hard - soft per index
  std::vector<std::uint8_t> mask_hard;  // recorded decisions
  std::vector<double> code_offset;      // codeword - coefficient per quantized value
  std::vector<std::size_t> codes;       // codeword per quantized row
  std::vector<double> geometry_offset;  // geometry quantization offsets
  // Stop-gradient operands of the commitment loss. Frozen on replay so the
  // replayed loss is a function whose gradient is the surrogate one.
  std::vector<double> detached_coeff;
  std::vector<double> detached_codewords;
};

}  // namespace gvt
