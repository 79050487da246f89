// Copyright 2026 The GVT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>

namespace gvt {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Architecture sizes. Defaults follow the full-size tokenizer.
struct ModelConfig {
  std::size_t gaussians = 512;        // K, per time step
  std::size_t time_steps = 5;         // T
  std::size_t query_width = 64;       // D1
  std::size_t gaussian_width = 69;    // D2
  std::size_t mask_width = 64;        // D3
  std::size_t blocks = 3;             // B
  std::size_t gaussian_dim = 13;      // D
  std::size_t codebook_size = 4096;   // L
  std::size_t latent_width = 64;      // F
  std::size_t encoder_width = 64;     // F_enc
  std::size_t decoder_width = 64;
  std::size_t heads = 4;
  std::size_t points = 4;
  std::size_t frame_height = 128;     // H'
  std::size_t frame_width = 128;      // W'
  double init_jitter = 0.25;          // fraction of a grid cell, <= 0.5
  double mask_bias_init = 2.0;        // initial mask logit bias; > 0 starts mostly dynamic

  std::size_t coeff_dim() const { return gaussian_dim - 5; }
  std::size_t frames() const { return 4 * (time_steps - 1) + 1; }
  std::size_t latent_height() const { return frame_height / 4; }
  std::size_t latent_width_px() const { return frame_width / 4; }
  void validate() const;
};

/// Loss weights and optimizer settings.
struct TrainConfig {
  double lr = 1e-4;
  double lr_final = 1.0;  // cosine decay to lr * lr_final over the run; 1 keeps lr constant
  double clip_norm = 1.0;
  double alpha = 0.1;     // commitment weight
  double beta = 0.25;     // adversarial weight (term not trained; recorded only)
  double lambda1 = 5e-3;
  double lambda2 = 2e-2;
  double tau = 0.25;
  double commitment_inner = 0.25;
  std::size_t batch = 1;
  std::size_t refresh_window = 256;
  bool quantize_geometry = false;  // straight-through geometry quantization during training
  bool force_all_dynamic = false;  // ablation: every Gaussian dynamic
  double mask_lr_scale = 1.0;      // lr multiplier for the mask branch
  bool stochastic_mask = false;    // sample the training mask from its soft values
  std::size_t mask_warmup = 0;     // steps trained with an all-dynamic mask before the mask branch takes over
  std::size_t mask_relax = 0;      // steps after the warmup that blend with the soft mask instead of the hard one
  std::uint64_t seed = 0;
};

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
};

/// `key = value` lines applied over `base`; '#' starts a comment. Unknown keys
/// are an error.
RunConfig parse_config(const std::string& text, const RunConfig& base = {});
RunConfig load_config(const std::string& path, const RunConfig& base = {});
std::string format_config(const RunConfig& cfg);

/// Small configuration used by tests, gradient checks and the toy experiments.
RunConfig micro_config();
RunConfig toy_config();

}  // namespace gvt
