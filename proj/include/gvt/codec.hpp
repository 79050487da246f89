// Copyright 2026 The GVT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gvt/gaussian2d.hpp"

// TokenStream layout, all fields big-endian:
//   "GVT1" | version u8 | T u16 | K u16 | S u16 | D u8 | L u16 | hash u64 | H u16 | W u16
//   K-bit mask (1 = dynamic), padded to a byte
//   S static records (k ascending), padded to a byte
//   T*(K-S) dynamic records (t-major, then k), padded to a byte
//   [embedded codebook: L*(D-5) float32, when version bit 7 is set]
// A record is x:6 y:6 theta:3 s1:5 s2:5 then a log2(L)-bit codeword index.

namespace gvt {

inline constexpr std::uint8_t kStreamVersion = 1;
inline constexpr std::uint8_t kEmbeddedCodebookFlag = 0x80;
inline constexpr std::size_t kMagicBytes = 4;
inline constexpr std::size_t kHeaderBytes = 26;  // including the magic

class CodecError : public std::runtime_error {
 public:
  enum class Kind { BadMagic, BadVersion, Truncated, HashMismatch, OutOfRange, Inconsistent };
  CodecError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct TokenRecord {
  QuantizedGeometry geometry;
  std::uint32_t code = 0;
  bool operator==(const TokenRecord&) const = default;
};

struct TokenStream {
  std::uint16_t time_steps = 1;   // T
  std::uint16_t count = 1;        // K
  std::uint8_t gaussian_dim = 13; // D
  std::uint16_t codebook_size = 4096;
  std::uint64_t codebook_hash = 0;
  std::uint16_t grid_height = 1;
  std::uint16_t grid_width = 1;
  std::vector<std::uint8_t> mask;         // K entries, 1 = dynamic
  std::vector<TokenRecord> statics;       // S
  std::vector<TokenRecord> dynamics;      // T * (K - S), t-major
  std::vector<float> embedded_codebook;   // empty unless self-contained

  std::size_t static_count() const { return statics.size(); }
  std::size_t token_count() const { return statics.size() + dynamics.size(); }
  bool operator==(const TokenStream&) const = default;
};

/// ceil(log2 L) for L >= 2.
int code_bits(std::size_t codebook_size);
std::size_t record_bits(std::size_t codebook_size);
/// token_count * record width, without padding.
std::size_t payload_bits(std::size_t tokens, std::size_t codebook_size);

std::vector<std::uint8_t> serialize(const TokenStream& stream);
/// `expected_hash`, when non-null, must match the header.
TokenStream deserialize(std::span<const std::uint8_t> bytes, const std::uint64_t* expected_hash = nullptr);

/// Header fields and token accounting as `key=value` lines.
std::string describe(const TokenStream& stream);

struct RatePoint {
  std::size_t bits = 0;          // stream size after the magic, in bits
  std::size_t payload_bits = 0;  // tokens * record width
  std::size_t tokens = 0;
  double bpp = 0.0;              // bits / (T' H' W')
  double psnr = 0.0;
  std::size_t initial_gaussians = 0;
  double tau = 0.0;
  std::size_t static_count = 0;
};

/// Rate fields for a serialized stream; pixels are those of the source clip.
RatePoint bitrate(const TokenStream& stream, std::size_t frames, std::size_t height, std::size_t width);

}  // namespace gvt
