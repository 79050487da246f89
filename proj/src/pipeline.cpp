// Copyright 2026 The GVT Authors
// SPDX-License-Identifier: Apache-2.0

#include "gvt/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <iomanip>
#include <ostream>

#include "gvt/harness.hpp"

namespace gvt {

Encoder::Encoder(nn::ParameterStore& store, const ModelConfig& cfg, std::mt19937_64& rng) : cfg_(cfg) {
  stem_ = nn::Linear(store, "encoder.stem", 4 * 4 * 4 * 3, cfg.encoder_width, rng);
  conv_ = nn::Linear(store, "encoder.conv", 9 * cfg.encoder_width, cfg.encoder_width, rng, 0.5);
}

Tensor Encoder::operator()(const Tensor& video) const {
  if (video.rank() != 4 || video.dim(3) != 3) {
    throw nn::NumericsError("encode_video: expected [T',H',W',3], got " + nn::shape_str(video.shape()));
  }
  const std::size_t frames = video.dim(0), hp = video.dim(1), wp = video.dim(2);
  if (frames == 0 || (frames - 1) % 4 != 0) {
    throw nn::NumericsError("encode_video: frame count " + std::to_string(frames) + " is not 1 + 4n");
  }
  if (hp != cfg_.frame_height || wp != cfg_.frame_width) {
    throw nn::NumericsError("encode_video: frame size " + std::to_string(hp) + "x" + std::to_string(wp) +
                            " differs from the configured " + std::to_string(cfg_.frame_height) + "x" +
                            std::to_string(cfg_.frame_width));
  }
  const std::size_t t = (frames - 1) / 4 + 1, h = hp / 4, w = wp / 4;
  Tensor first = nn::narrow(video, 0, 0, 1);
  Tensor padded = nn::concat({first, first, first, video}, 0);
  Tensor blocks = nn::reshape(padded, {t, 4, h, 4, w, 4, 3});
  blocks = nn::reshape(nn::permute(blocks, {0, 2, 4, 1, 3, 5, 6}), {t, h, w, 192});
  Tensor x = nn::silu(stem_(blocks));
  return nn::add(x, conv_(nn::im2col3x3(x)));
}

Decoder::Decoder(nn::ParameterStore& store, const ModelConfig& cfg, std::mt19937_64& rng) : cfg_(cfg) {
  stem_ = nn::Linear(store, "decoder.stem", cfg.coeff_dim(), cfg.decoder_width, rng);
  conv_ = nn::Linear(store, "decoder.conv", 9 * cfg.decoder_width, cfg.decoder_width, rng, 0.5);
  out_ = nn::Linear(store, "decoder.out", cfg.decoder_width, 4 * 4 * 4 * 3, rng);
}

Tensor Decoder::operator()(const Tensor& tokens) const {
  if (tokens.rank() != 4 || tokens.dim(3) != cfg_.coeff_dim()) {
    throw nn::NumericsError("decode_tokens: expected [T,H,W," + std::to_string(cfg_.coeff_dim()) + "], got " +
                            nn::shape_str(tokens.shape()));
  }
  const std::size_t t = tokens.dim(0), h = tokens.dim(1), w = tokens.dim(2);
  Tensor x = nn::silu(stem_(tokens));
  x = nn::add(x, nn::silu(conv_(nn::im2col3x3(x))));
  Tensor blocks = nn::reshape(out_(x), {t, h, w, 4, 4, 4, 3});
  Tensor frames = nn::reshape(nn::permute(blocks, {0, 3, 1, 4, 2, 5, 6}), {4 * t, 4 * h, 4 * w, 3});
  return nn::sigmoid(nn::narrow(frames, 0, 3, 4 * t - 3));
}

Tensor reconstruction_loss(const Tensor& video, const Tensor& recon) { return nn::mse(recon, video); }

Tensor total_loss(const Tensor& recon, const Tensor& gsp, const Tensor& commit, double alpha) {
  return nn::add(nn::add(recon, gsp), nn::scale(commit, alpha));
}

namespace {

attn::DstfDims mask_dims(const ModelConfig& m) {
  return {m.gaussian_width, m.mask_width, m.latent_width, m.heads, m.points};
}

// Snaps geometry to the stream's bit grid with straight-through gradients.
void quantize_geometry_ste(GaussianTensors& g, StraightThroughCache* cache) {
  const std::size_t n = g.theta.numel();
  const bool replay = cache && cache->mode == StraightThroughCache::Mode::Replay;
  std::vector<double> off(5 * n);
  if (replay) {
    off = cache->geometry_offset;
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      GeometryFields f{{g.mu.data()[2 * i], g.mu.data()[2 * i + 1]},
                       g.theta.data()[i],
                       g.scale.data()[2 * i],
                       g.scale.data()[2 * i + 1]};
      const GeometryFields q = dequantize_geometry(quantize_geometry(f));
      off[2 * i] = q.mu[0] - f.mu[0];
      off[2 * i + 1] = q.mu[1] - f.mu[1];
      off[2 * n + i] = q.theta - f.theta;
      off[3 * n + 2 * i] = q.s1 - f.s1;
      off[3 * n + 2 * i + 1] = q.s2 - f.s2;
    }
  }
  if (cache && cache->mode == StraightThroughCache::Mode::Record) cache->geometry_offset = off;
  g.mu = nn::straight_through(g.mu, {off.begin(), off.begin() + static_cast<std::ptrdiff_t>(2 * n)});
  g.theta = nn::straight_through(g.theta, {off.begin() + static_cast<std::ptrdiff_t>(2 * n),
                                           off.begin() + static_cast<std::ptrdiff_t>(3 * n)});
  g.scale = nn::straight_through(g.scale, {off.begin() + static_cast<std::ptrdiff_t>(3 * n), off.end()});
}

}  // namespace

GvtModel::GvtModel(const RunConfig& cfg)
    : cfg_(cfg),
      rng_(cfg.train.seed),
      encoder_(store_, cfg.model, rng_),
      stge_(store_, cfg.model, rng_),
      mask_branch_(store_, "gsp.mask", mask_dims(cfg.model), cfg.model.time_steps, rng_, cfg.model.mask_bias_init),
      codebook_(make_codebook(store_, "vq.codebook", cfg.model.codebook_size, cfg.model.coeff_dim(), rng_)),
      decoder_(store_, cfg.model, rng_) {}

ForwardResult GvtModel::forward(const VideoClip& clip, StraightThroughCache* cache) const {
  const auto& m = cfg_.model;
  const std::size_t t_dim = m.time_steps, k_dim = m.gaussians, c_dim = m.coeff_dim();
  if (clip.frames != m.frames()) {
    throw nn::NumericsError("forward: clip has " + std::to_string(clip.frames) + " frames, model expects " +
                            std::to_string(m.frames()));
  }
  ForwardResult r;
  Tensor video = clip.tensor();
  Tensor latent = stge_.prepare_latent(encoder_(video));
  InitState init = stge_.init_gaussians();
  Tensor raw = stge_.forward(latent, init);

  if (cfg_.train.force_all_dynamic || warmup_dynamic_) {
    r.mask = constant_mask(std::vector<std::uint8_t>(k_dim, 1));
  } else {
    Tensor logits = mask_branch_(init.gaussians, init.masks, latent, grid());
    r.mask = relaxed_mask_ ? relaxed_mask(logits) : binarize_ste(logits, cache, mask_draws_);
  }
  r.gaussians = activate_tensors(blend_static(raw, r.mask.m));
  if (cfg_.train.quantize_geometry) quantize_geometry_ste(r.gaussians, cache);

  // Every (t, k) row is quantized so static rows at t > 0 still carry the
  // mask gradient; duplicates share a codeword. Only stored rows count
  // towards the commitment loss and the stream.
  r.rows = stored_rows(t_dim, r.mask.hard);
  r.static_count = r.mask.static_count();
  r.tokens = r.rows.size();
  Tensor coeff_rows = nn::reshape(r.gaussians.coeff, {t_dim * k_dim, c_dim});
  Quantized q = quantize_set(coeff_rows, codebook_, cache);
  r.codes.reserve(r.rows.size());
  for (auto row : r.rows) r.codes.push_back(q.indices[row]);
  r.stored_coeff = nn::index_select(coeff_rows, r.rows);
  Tensor stored_codewords = nn::index_select(q.codewords, r.rows);
  Tensor coeff = nn::reshape(q.values, {t_dim, k_dim, c_dim});

  Tensor tokens = raster::render_tokens(r.gaussians.mu, r.gaussians.theta, r.gaussians.scale, coeff, grid());
  r.recon = decoder_(tokens);
  r.l_recon = reconstruction_loss(video, r.recon);
  r.l_gsp = gsp_loss(r.mask, {cfg_.train.lambda1, cfg_.train.lambda2, cfg_.train.tau});
  Tensor coeff_sg = nn::detach(r.stored_coeff), codewords_sg = nn::detach(stored_codewords);
  if (cache && cache->mode == StraightThroughCache::Mode::Replay) {
    coeff_sg = Tensor::constant(coeff_sg.shape(), cache->detached_coeff);
    codewords_sg = Tensor::constant(codewords_sg.shape(), cache->detached_codewords);
  } else if (cache && cache->mode == StraightThroughCache::Mode::Record) {
    cache->detached_coeff.assign(coeff_sg.data().begin(), coeff_sg.data().end());
    cache->detached_codewords.assign(codewords_sg.data().begin(), codewords_sg.data().end());
  }
  r.l_commit = commitment_loss(r.stored_coeff, stored_codewords, coeff_sg, codewords_sg, cfg_.train.commitment_inner);
  r.total = total_loss(r.l_recon, r.l_gsp, r.l_commit, cfg_.train.alpha);
  return r;
}

TokenStream GvtModel::encode(const VideoClip& clip, bool embed_codebook) const {
  nn::NoGradGuard no_grad;
  const auto& m = cfg_.model;
  const ForwardResult r = forward(clip);
  TokenStream s;
  s.time_steps = static_cast<std::uint16_t>(m.time_steps);
  s.count = static_cast<std::uint16_t>(m.gaussians);
  s.gaussian_dim = static_cast<std::uint8_t>(m.gaussian_dim);
  s.codebook_size = static_cast<std::uint16_t>(m.codebook_size);
  s.codebook_hash = codebook_hash(codebook_);
  s.grid_height = static_cast<std::uint16_t>(m.latent_height());
  s.grid_width = static_cast<std::uint16_t>(m.latent_width_px());
  s.mask = r.mask.hard;
  const auto& g = r.gaussians;
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    const std::size_t row = r.rows[i];
    GeometryFields f{{g.mu.data()[2 * row], g.mu.data()[2 * row + 1]},
                     g.theta.data()[row],
                     g.scale.data()[2 * row],
                     g.scale.data()[2 * row + 1]};
    TokenRecord rec{quantize_geometry(f), static_cast<std::uint32_t>(r.codes[i])};
    (i < r.static_count ? s.statics : s.dynamics).push_back(rec);
  }
  if (embed_codebook) {
    for (double v : codebook_.entries.data()) s.embedded_codebook.push_back(static_cast<float>(v));
  }
  return s;
}

VideoClip GvtModel::decode(const TokenStream& s) const {
  nn::NoGradGuard no_grad;
  const auto& m = cfg_.model;
  if (s.time_steps != m.time_steps || s.count != m.gaussians || s.gaussian_dim != m.gaussian_dim ||
      s.codebook_size != m.codebook_size || s.grid_height != m.latent_height() || s.grid_width != m.latent_width_px()) {
    throw CodecError(CodecError::Kind::Inconsistent, "stream header does not match the model configuration");
  }
  const std::size_t t_dim = m.time_steps, k_dim = m.gaussians, c_dim = m.coeff_dim();
  const auto dynamic = static_cast<std::size_t>(std::count(s.mask.begin(), s.mask.end(), std::uint8_t{1}));
  if (s.mask.size() != k_dim || s.statics.size() != k_dim - dynamic || s.dynamics.size() != t_dim * dynamic) {
    throw CodecError(CodecError::Kind::Inconsistent, "stream sections do not match its mask");
  }
  std::vector<double> table;
  if (!s.embedded_codebook.empty()) {
    table.assign(s.embedded_codebook.begin(), s.embedded_codebook.end());
  } else {
    if (s.codebook_hash != codebook_hash(codebook_)) {
      throw CodecError(CodecError::Kind::HashMismatch, "stream codebook hash does not match the model");
    }
    table.assign(codebook_.entries.data().begin(), codebook_.entries.data().end());
  }
  std::vector<double> mu(t_dim * k_dim * 2), theta(t_dim * k_dim), scale(t_dim * k_dim * 2), coeff(t_dim * k_dim * c_dim);
  auto place = [&](std::size_t t, std::size_t k, const TokenRecord& rec) {
    const GeometryFields f = dequantize_geometry(rec.geometry);
    const std::size_t i = t * k_dim + k;
    mu[2 * i] = f.mu[0];
    mu[2 * i + 1] = f.mu[1];
    theta[i] = f.theta;
    scale[2 * i] = f.s1;
    scale[2 * i + 1] = f.s2;
    std::copy_n(table.begin() + static_cast<std::ptrdiff_t>(rec.code * c_dim), c_dim,
                coeff.begin() + static_cast<std::ptrdiff_t>(i * c_dim));
  };
  std::size_t si = 0, di = 0;
  for (std::size_t k = 0; k < k_dim; ++k)
    if (!s.mask[k]) {
      for (std::size_t t = 0; t < t_dim; ++t) place(t, k, s.statics[si]);
      ++si;
    }
  for (std::size_t t = 0; t < t_dim; ++t)
    for (std::size_t k = 0; k < k_dim; ++k)
      if (s.mask[k]) place(t, k, s.dynamics[di++]);
  Tensor tokens = raster::render_tokens(Tensor::constant({t_dim, k_dim, 2}, std::move(mu)),
                                        Tensor::constant({t_dim, k_dim}, std::move(theta)),
                                        Tensor::constant({t_dim, k_dim, 2}, std::move(scale)),
                                        Tensor::constant({t_dim, k_dim, c_dim}, std::move(coeff)), grid());
  return VideoClip::from_tensor(decoder_(tokens));
}

Trainer::Trainer(GvtModel& model, std::size_t total_steps)
    : model_(model),
      adam_({model.config().train.lr, 0.9, 0.999, 1e-8, model.config().train.clip_norm,
             {{"gsp.mask.", model.config().train.mask_lr_scale}}}),
      recent_(model.config().model.codebook_size, model.config().model.coeff_dim()),
      rng_(model.config().train.seed ^ 0x5eed5eedULL),
      total_steps_(total_steps) {}

StepMetrics Trainer::step(const std::vector<const VideoClip*>& batch) {
  if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
  const auto& cfg = model_.config();
  StepMetrics m;
  m.step = step_;
  model_.store().zero_grad();
  model_.set_warmup_dynamic(step_ < cfg.train.mask_warmup);
  model_.set_relaxed_mask(step_ < cfg.train.mask_warmup + cfg.train.mask_relax);
  if (total_steps_ > 1) {
    const double progress = std::min(1.0, static_cast<double>(step_) / static_cast<double>(total_steps_ - 1));
    const double floor = cfg.train.lr_final;
    adam_.set_lr(cfg.train.lr * (floor + (1.0 - floor) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress))));
  }
  std::vector<std::size_t> used;
  std::size_t static_sum = 0;
  Tensor loss;
  const double inv = 1.0 / static_cast<double>(batch.size());
  try {
    for (const VideoClip* clip : batch) {
      if (cfg.train.stochastic_mask) {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::vector<double> draws(cfg.model.gaussians);
        for (auto& d : draws) d = u(rng_);
        model_.set_mask_draws(std::move(draws));
      }
      ForwardResult r = model_.forward(*clip);
      loss = loss.defined() ? nn::add(loss, nn::scale(r.total, inv)) : nn::scale(r.total, inv);
      m.l_recon += r.l_recon.item() * inv;
      m.l_gsp += r.l_gsp.item() * inv;
      m.l_commit += r.l_commit.item() * inv;
      m.mean_mask += r.mask.mean() * inv;
      m.psnr += psnr(*clip, VideoClip::from_tensor(r.recon)) * inv;
      static_sum += r.static_count;
      used.insert(used.end(), r.codes.begin(), r.codes.end());
      recent_.push(r.stored_coeff.data());
    }
    nn::backward(loss);
  } catch (const std::exception& e) {
    throw nn::NumericsError("train_step " + std::to_string(step_) + ": " + e.what());
  }
  model_.set_mask_draws({});
  m.grad_norm = adam_.step(model_.store());
  record_usage(model_.codebook(), used);
  refresh_dead_codes(model_.codebook(), recent_, cfg.train.refresh_window, rng_);
  m.static_count = static_sum / batch.size();
  m.tokens = token_count(cfg.model.gaussians, cfg.model.time_steps, m.static_count);
  ++step_;
  return m;
}

void write_metrics_header(std::ostream& os) {
  os << kMetricsSchema << '\n' << "step,l_recon,l_gsp,l_commit,mean_mask,S,tokens,psnr\n";
}

void write_metrics_row(std::ostream& os, const StepMetrics& m) {
  const auto flags = os.flags();
  const auto precision = os.precision();
  os << std::setprecision(17) << m.step << ',' << m.l_recon << ',' << m.l_gsp << ',' << m.l_commit << ','
     << m.mean_mask << ',' << m.static_count << ',' << m.tokens << ',' << m.psnr << '\n';
  os.flags(flags);
  os.precision(precision);
}

std::vector<StepMetrics> train(GvtModel& model, const std::vector<VideoClip>& clips, std::size_t steps,
                               std::ostream* csv, const ProgressFn& progress) {
  if (clips.empty()) throw std::invalid_argument("train: no clips");
  Trainer trainer(model, steps);
  const std::size_t batch = std::max<std::size_t>(1, model.config().train.batch);
  std::vector<StepMetrics> history;
  history.reserve(steps);
  if (csv) write_metrics_header(*csv);
  std::size_t cursor = 0;
  for (std::size_t s = 0; s < steps; ++s) {
    std::vector<const VideoClip*> b;
    for (std::size_t i = 0; i < batch; ++i) b.push_back(&clips[cursor++ % clips.size()]);
    history.push_back(trainer.step(b));
    if (csv) write_metrics_row(*csv, history.back());
    if (progress) progress(history.back());
  }
  return history;
}

Evaluation evaluate(const GvtModel& model, const std::vector<VideoClip>& clips) {
  nn::NoGradGuard no_grad;
  Evaluation e;
  for (const auto& clip : clips) {
    const ForwardResult r = model.forward(clip);
    e.psnr += psnr(clip, VideoClip::from_tensor(r.recon));
    e.l_recon += r.l_recon.item();
    e.mean_mask += r.mask.mean();
    e.tokens += static_cast<double>(r.tokens);
  }
  const double n = static_cast<double>(clips.size());
  e.psnr /= n;
  e.l_recon /= n;
  e.mean_mask /= n;
  e.tokens /= n;
  return e;
}

std::vector<RatePoint> rd_sweep(const std::vector<VideoClip>& clips, const std::vector<RdConfig>& configs,
                                const RunConfig& base, std::size_t steps, const ProgressFn& progress) {
  std::vector<RatePoint> table;
  for (const auto& rc : configs) {
    RunConfig cfg = base;
    cfg.model.gaussians = rc.initial_gaussians;
    cfg.train.tau = rc.tau;
    GvtModel model(cfg);
    train(model, clips, steps, nullptr, progress);
    RatePoint point;
    point.initial_gaussians = rc.initial_gaussians;
    point.tau = rc.tau;
    std::size_t pixels = 0;
    for (const auto& clip : clips) {
      const TokenStream stream = model.encode(clip);
      const RatePoint p = bitrate(stream, clip.frames, clip.height, clip.width);
      point.bits += p.bits;
      point.payload_bits += p.payload_bits;
      point.tokens += p.tokens;
      point.static_count += p.static_count;
      point.psnr += psnr(clip, model.decode(stream)) / static_cast<double>(clips.size());
      pixels += clip.frames * clip.height * clip.width;
    }
    point.bpp = static_cast<double>(point.bits) / static_cast<double>(pixels);
    table.push_back(point);
  }
  std::stable_sort(table.begin(), table.end(), [](const RatePoint& a, const RatePoint& b) { return a.bits < b.bits; });
  return table;
}

}  // namespace gvt
