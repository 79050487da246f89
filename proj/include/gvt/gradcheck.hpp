// Copyright 2026 The GVT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "gvt/params.hpp"

namespace gvt {

struct GradcheckOptions {
  std::uint64_t seed = 1;
  std::size_t trials = 3;
  double epsilon = 1e-5;       // op-level checks
  double loss_epsilon = 1e-6;  // total_loss
  double op_tolerance = 1e-4;
  double loss_tolerance = 1e-3;
  std::size_t loss_components = 32;
};

// Each check draws `trials` random configurations and merges them into one
// report.
nn::GradCheckReport check_radiance_weight(const GradcheckOptions& opt);
nn::GradCheckReport check_render_tokens(const GradcheckOptions& opt);
nn::GradCheckReport check_bilinear_sample(const GradcheckOptions& opt);
nn::GradCheckReport check_deformable_cross_attention(const GradcheckOptions& opt);
nn::GradCheckReport check_dstf_block(const GradcheckOptions& opt);
/// Micro configuration, random parameter subset, straight-through offsets
/// and codeword choices frozen after one recording pass.
nn::GradCheckReport check_total_loss(const GradcheckOptions& opt);

std::vector<nn::GradCheckReport> gradcheck_suite(const GradcheckOptions& opt);

}  // namespace gvt
