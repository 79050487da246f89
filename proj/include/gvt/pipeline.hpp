// Copyright 2026 The GVT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <random>
#include <vector>

#include "gvt/codec.hpp"
#include "gvt/config.hpp"
#include "gvt/gsp.hpp"
#include "gvt/stge.hpp"
#include "gvt/video.hpp"
#include "gvt/vq.hpp"

namespace gvt {

/// Causal space-time-to-depth stem: frame 0 is front-padded three times, the
/// clip is folded into 4x4x4 blocks, then a linear stem and a residual 3x3 conv.
class Encoder {
 public:
  Encoder() = default;
  Encoder(nn::ParameterStore& store, const ModelConfig& cfg, std::mt19937_64& rng);
  /// [T',H',W',3] -> [T, H'/4, W'/4, F_enc]
  Tensor operator()(const Tensor& video) const;

 private:
  ModelConfig cfg_;
  nn::Linear stem_;
  nn::Linear conv_;
};

/// Mirror of the encoder ending in a sigmoid.
class Decoder {
 public:
  Decoder() = default;
  Decoder(nn::ParameterStore& store, const ModelConfig& cfg, std::mt19937_64& rng);
  /// [T,H,W,C] -> [4(T-1)+1, 4H, 4W, 3]
  Tensor operator()(const Tensor& tokens) const;

 private:
  ModelConfig cfg_;
  nn::Linear stem_;
  nn::Linear conv_;
  nn::Linear out_;
};

Tensor reconstruction_loss(const Tensor& video, const Tensor& recon);
Tensor total_loss(const Tensor& recon, const Tensor& gsp, const Tensor& commit, double alpha);

struct ForwardResult {
  Tensor recon;          // [T',H',W',3]
  Tensor l_recon;
  Tensor l_gsp;
  Tensor l_commit;
  Tensor total;
  BinaryMask mask;
  GaussianTensors gaussians;         // after static replacement
  std::vector<std::size_t> rows;     // stored rows into [T*K], stream order
  std::vector<std::size_t> codes;    // codeword per stored row
  Tensor stored_coeff;               // [rows, C] pre-quantization
  std::size_t static_count = 0;
  std::size_t tokens = 0;
};

class GvtModel {
 public:
  explicit GvtModel(const RunConfig& cfg);
  GvtModel(const GvtModel&) = delete;
  GvtModel& operator=(const GvtModel&) = delete;

  const RunConfig& config() const { return cfg_; }
  RunConfig& config() { return cfg_; }
  nn::ParameterStore& store() { return store_; }
  Codebook& codebook() { return codebook_; }
  const Codebook& codebook() const { return codebook_; }
  Encoder& encoder() { return encoder_; }
  Stge& stge() { return stge_; }
  MaskBranch& mask_branch() { return mask_branch_; }
  Decoder& decoder() { return decoder_; }
  raster::GridSpec grid() const { return {cfg_.model.latent_height(), cfg_.model.latent_width_px()}; }
  /// While set, forward() uses an all-dynamic mask (training warmup).
  void set_warmup_dynamic(bool on) { warmup_dynamic_ = on; }
  /// While set (and not in warmup), forward() blends with the soft mask.
  void set_relaxed_mask(bool on) { relaxed_mask_ = on; }
  /// Uniform draws for a sampled mask in the next forward(); empty restores
  /// the deterministic threshold.
  void set_mask_draws(std::vector<double> u) { mask_draws_ = std::move(u); }

  ForwardResult forward(const VideoClip& clip, StraightThroughCache* cache = nullptr) const;
  /// Quantized tokens of a clip, ready for serialization.
  TokenStream encode(const VideoClip& clip, bool embed_codebook = false) const;
  /// Renders and decodes a token stream; the codebook comes from the stream
  /// when embedded, otherwise from this model (hash checked).
  VideoClip decode(const TokenStream& stream) const;

 private:
  RunConfig cfg_;
  bool warmup_dynamic_ = false;
  bool relaxed_mask_ = false;
  std::vector<double> mask_draws_;
  nn::ParameterStore store_;
  std::mt19937_64 rng_;
  Encoder encoder_;
  Stge stge_;
  MaskBranch mask_branch_;
  Codebook codebook_;
  Decoder decoder_;
};

struct StepMetrics {
  std::size_t step = 0;
  double l_recon = 0.0;
  double l_gsp = 0.0;
  double l_commit = 0.0;
  double mean_mask = 0.0;
  std::size_t static_count = 0;
  std::size_t tokens = 0;
  double psnr = 0.0;
  double grad_norm = 0.0;
};

/// One optimizer per model. Batches are averaged; S is the floor of the batch
/// mean and tokens follow from it.
class Trainer {
 public:
  /// `total_steps` sets the length of the cosine lr decay (0 disables it).
  explicit Trainer(GvtModel& model, std::size_t total_steps = 0);
  StepMetrics step(const std::vector<const VideoClip*>& batch);
  std::size_t steps_done() const { return step_; }

 private:
  GvtModel& model_;
  nn::Adam adam_;
  RecentVectors recent_;
  std::mt19937_64 rng_;
  std::size_t total_steps_ = 0;
  std::size_t step_ = 0;
};

inline constexpr const char* kMetricsSchema = "#schema=gvt-metrics/1";
void write_metrics_header(std::ostream& os);
void write_metrics_row(std::ostream& os, const StepMetrics& m);

using ProgressFn = std::function<void(const StepMetrics&)>;

/// Cycles through `clips` in order, `batch` clips per step.
std::vector<StepMetrics> train(GvtModel& model, const std::vector<VideoClip>& clips, std::size_t steps,
                               std::ostream* csv = nullptr, const ProgressFn& progress = {});

/// Mean PSNR and reconstruction loss of the model's forward pass (no codec).
struct Evaluation {
  double psnr = 0.0;
  double l_recon = 0.0;
  double mean_mask = 0.0;
  double tokens = 0.0;
};
Evaluation evaluate(const GvtModel& model, const std::vector<VideoClip>& clips);

struct RdConfig {
  std::size_t initial_gaussians = 64;
  double tau = 0.25;
};

/// Trains one model per config from `base`, encodes every clip and measures
/// the decoded PSNR. Bits and tokens are summed over clips; rows come back
/// sorted by bits ascending.
std::vector<RatePoint> rd_sweep(const std::vector<VideoClip>& clips, const std::vector<RdConfig>& configs,
                                const RunConfig& base, std::size_t steps, const ProgressFn& progress = {});

void save_checkpoint(const std::string& path, GvtModel& model);
std::unique_ptr<GvtModel> load_checkpoint(const std::string& path);

}  // namespace gvt
