// Copyright 2026 The GVT Authors
// SPDX-License-Identifier: Apache-2.0

#include "gvt/vq.hpp"

#include <bit>
#include <cmath>

#include "gvt/ops.hpp"

namespace gvt {

Codebook make_codebook(nn::ParameterStore& store, const std::string& name, std::size_t size, std::size_t width,
                       std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(size));
  std::uniform_real_distribution<double> u(-bound, bound);
  std::vector<double> e(size * width);
  for (auto& v : e) v = u(rng);
  Codebook cb;
  cb.entries = store.add(name + ".entries", {size, width}, std::move(e));
  cb.usage_counts.assign(size, 0);
  cb.idle_steps.assign(size, 0);
  return cb;
}

Codebook codebook_from(std::vector<double> entries, std::size_t size, std::size_t width) {
  Codebook cb;
  cb.entries = Tensor::variable({size, width}, std::move(entries));
  cb.usage_counts.assign(size, 0);
  cb.idle_steps.assign(size, 0);
  return cb;
}

std::uint64_t codebook_hash(const Codebook& cb) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : cb.entries.data()) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    for (int shift = 24; shift >= 0; shift -= 8) {
      h ^= (bits >> shift) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

namespace {

Nearest scan(const double* q, const Codebook& cb) {
  const std::size_t l = cb.size(), w = cb.width();
  const double* e = cb.entries.data().data();
  Nearest best{0, INFINITY};
  for (std::size_t i = 0; i < l; ++i) {
    double d = 0.0;
    for (std::size_t c = 0; c < w; ++c) {
      const double diff = q[c] - e[i * w + c];
      d += diff * diff;
    }
    if (d < best.distance) best = {i, d};
  }
  return best;
}

void check_width(std::span<const double> q, const Codebook& cb, const char* op) {
  if (cb.width() == 0 || q.size() % cb.width() != 0) {
    throw nn::NumericsError(std::string(op) + ": query width does not match codebook width " +
                            std::to_string(cb.width()));
  }
}

}  // namespace

Nearest nearest_codeword(std::span<const double> query, const Codebook& cb) {
  if (query.size() != cb.width()) {
    throw nn::NumericsError("nearest_codeword: query width " + std::to_string(query.size()) +
                            " does not match codebook width " + std::to_string(cb.width()));
  }
  return scan(query.data(), cb);
}

std::vector<std::size_t> nearest_all_serial(std::span<const double> queries, const Codebook& cb) {
  check_width(queries, cb, "nearest_all");
  const std::size_t n = queries.size() / cb.width();
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = scan(queries.data() + i * cb.width(), cb).index;
  return out;
}

std::vector<std::size_t> nearest_all_parallel(std::span<const double> queries, const Codebook& cb) {
  check_width(queries, cb, "nearest_all");
  const auto n = static_cast<std::ptrdiff_t>(queries.size() / cb.width());
  std::vector<std::size_t> out(static_cast<std::size_t>(n));
  const double* q = queries.data();
  const std::size_t w = cb.width();
#pragma omp parallel for schedule(static) if (n * static_cast<std::ptrdiff_t>(cb.size()) > 16384)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = scan(q + static_cast<std::size_t>(i) * w, cb).index;
  return out;
}

Quantized quantize_set(const Tensor& coeff, const Codebook& cb, StraightThroughCache* cache) {
  if (coeff.rank() != 2 || coeff.dim(1) != cb.width()) {
    throw nn::NumericsError("quantize_set: expected [R," + std::to_string(cb.width()) + "], got " +
                            nn::shape_str(coeff.shape()));
  }
  Quantized q;
  const bool replay = cache && cache->mode == StraightThroughCache::Mode::Replay;
  q.indices = replay ? cache->codes : nearest_all_parallel(coeff.data(), cb);
  if (q.indices.size() != coeff.dim(0)) throw nn::NumericsError("quantize_set: replay cache size mismatch");
  q.codewords = nn::index_select(cb.entries, q.indices);
  std::vector<double> offset;
  if (replay) {
    offset = cache->code_offset;
  } else {
    offset.resize(coeff.numel());
    for (std::size_t i = 0; i < offset.size(); ++i) offset[i] = q.codewords.data()[i] - coeff.data()[i];
  }
  if (cache && cache->mode == StraightThroughCache::Mode::Record) {
    cache->codes = q.indices;
    cache->code_offset = offset;
  }
  q.values = nn::straight_through(coeff, std::move(offset));
  return q;
}

Tensor commitment_loss(const Tensor& coeff, const Tensor& codewords, double inner) {
  return commitment_loss(coeff, codewords, nn::detach(coeff), nn::detach(codewords), inner);
}

Tensor commitment_loss(const Tensor& coeff, const Tensor& codewords, const Tensor& coeff_sg, const Tensor& codewords_sg,
                       double inner) {
  if (coeff.shape() != codewords.shape() || coeff.rank() != 2 || coeff_sg.shape() != coeff.shape() ||
      codewords_sg.shape() != coeff.shape()) {
    throw nn::NumericsError("commitment_loss: paired [R,W] sets required, got " + nn::shape_str(coeff.shape()) +
                            " and " + nn::shape_str(codewords.shape()));
  }
  if (coeff.dim(0) == 0) return Tensor::scalar(0.0);
  const double per_row = 1.0 / static_cast<double>(coeff.dim(0));
  Tensor codebook_term = nn::sum(nn::square(nn::sub(coeff_sg, codewords)));
  Tensor commit_term = nn::sum(nn::square(nn::sub(coeff, codewords_sg)));
  return nn::scale(nn::add(codebook_term, nn::scale(commit_term, inner)), per_row);
}

void record_usage(Codebook& cb, const std::vector<std::size_t>& indices) {
  std::vector<bool> used(cb.size(), false);
  for (auto i : indices) {
    ++cb.usage_counts.at(i);
    used[i] = true;
  }
  for (std::size_t i = 0; i < cb.size(); ++i) cb.idle_steps[i] = used[i] ? 0 : cb.idle_steps[i] + 1;
}

void RecentVectors::push(std::span<const double> rows) {
  if (capacity_ == 0) return;
  data_.resize(capacity_ * width_);
  for (std::size_t r = 0; r + width_ <= rows.size(); r += width_) {
    std::copy(rows.begin() + static_cast<std::ptrdiff_t>(r), rows.begin() + static_cast<std::ptrdiff_t>(r + width_),
              data_.begin() + static_cast<std::ptrdiff_t>(next_ * width_));
    next_ = (next_ + 1) % capacity_;
    filled_ = std::min(filled_ + 1, capacity_);
  }
}

std::vector<std::size_t> refresh_dead_codes(Codebook& cb, const RecentVectors& recent, std::size_t window,
                                            std::mt19937_64& rng) {
  std::vector<std::size_t> refreshed;
  if (recent.size() == 0) return refreshed;
  auto entries = cb.entries.mutable_data();
  const std::size_t w = cb.width();
  for (std::size_t i = 0; i < cb.size(); ++i) {
    if (cb.idle_steps[i] < window) continue;
    const auto src = recent.at(static_cast<std::size_t>(rng() % recent.size()));
    std::copy(src.begin(), src.end(), entries.begin() + static_cast<std::ptrdiff_t>(i * w));
    cb.usage_counts[i] = 0;
    cb.idle_steps[i] = 0;
    refreshed.push_back(i);
  }
  return refreshed;
}

}  // namespace gvt
