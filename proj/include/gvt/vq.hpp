// Copyright 2026 The GVT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "gvt/params.hpp"
#include "gvt/ste_cache.hpp"

namespace gvt {

using nn::Tensor;

struct Codebook {
  Tensor entries;  // [L, W]
  std::vector<std::uint64_t> usage_counts;
  std::vector<std::size_t> idle_steps;

  std::size_t size() const { return entries.dim(0); }
  std::size_t width() const { return entries.dim(1); }
  const double* row(std::size_t i) const { return entries.data().data() + i * width(); }
};

/// Entries uniform in [-1/sqrt(L), 1/sqrt(L)], registered as "<name>.entries".
Codebook make_codebook(nn::ParameterStore& store, const std::string& name, std::size_t size, std::size_t width,
                       std::mt19937_64& rng);
/// Unregistered codebook with the given row-major entries.
Codebook codebook_from(std::vector<double> entries, std::size_t size, std::size_t width);

/// FNV-1a 64 over the big-endian float32 images of the entries.
std::uint64_t codebook_hash(const Codebook& cb);

struct Nearest {
  std::size_t index = 0;
  double distance = 0.0;  // squared Euclidean
};

/// Exhaustive scan; ties go to the lowest index.
Nearest nearest_codeword(std::span<const double> query, const Codebook& cb);
std::vector<std::size_t> nearest_all_serial(std::span<const double> queries, const Codebook& cb);
std::vector<std::size_t> nearest_all_parallel(std::span<const double> queries, const Codebook& cb);

struct Quantized {
  Tensor values;     // [R, W] forward = codewords, backward = identity onto coefficients
  Tensor codewords;  // [R, W] rows of the codebook (gradient reaches the entries)
  std::vector<std::size_t> indices;
};

/// coeff [R, W] -> nearest codewords with the straight-through bypass.
Quantized quantize_set(const Tensor& coeff, const Codebook& cb, StraightThroughCache* cache = nullptr);

/// Mean over rows of |sg(c) - e|^2 + inner * |c - sg(e)|^2.
Tensor commitment_loss(const Tensor& coeff, const Tensor& codewords, double inner = 0.25);
/// Same with explicit stop-gradient operands.
Tensor commitment_loss(const Tensor& coeff, const Tensor& codewords, const Tensor& coeff_sg, const Tensor& codewords_sg,
                       double inner);

/// Usage bookkeeping for one step: used codes get counted and their idle
/// counters reset; every other code ages by one step.
void record_usage(Codebook& cb, const std::vector<std::size_t>& indices);

/// Fixed-capacity ring of recent coefficient vectors.
class RecentVectors {
 public:
  RecentVectors(std::size_t capacity, std::size_t width) : capacity_(capacity), width_(width) {}
  void push(std::span<const double> rows);
  std::size_t size() const { return filled_; }
  std::span<const double> at(std::size_t i) const { return {data_.data() + i * width_, width_}; }

 private:
  std::size_t capacity_;
  std::size_t width_;
  std::size_t next_ = 0;
  std::size_t filled_ = 0;
  std::vector<double> data_;
};

/// Rows idle for >= window steps are re-seeded from random recent vectors.
/// Returns the refreshed indices.
std::vector<std::size_t> refresh_dead_codes(Codebook& cb, const RecentVectors& recent, std::size_t window,
                                            std::mt19937_64& rng);

}  // namespace gvt
