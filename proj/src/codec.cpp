// Copyright 2026 The GVT Authors
// SPDX-License-Identifier: Apache-2.0

#include "gvt/codec.hpp"

#include <bit>
#include <sstream>

namespace gvt {

namespace {

class BitWriter {
 public:
  void put(std::uint64_t value, int bits) {
    for (int i = bits - 1; i >= 0; --i) {
      if (fill_ == 0) bytes_.push_back(0);
      if ((value >> i) & 1U) bytes_.back() |= static_cast<std::uint8_t>(0x80U >> fill_);
      fill_ = (fill_ + 1) % 8;
    }
  }
  void align() { fill_ = 0; }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
  int fill_ = 0;
};

class BitReader {
 public:
  explicit BitReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
  std::uint64_t get(int bits, const char* what) {
    std::uint64_t v = 0;
    for (int i = 0; i < bits; ++i) {
      const std::size_t byte = pos_ / 8;
      if (byte >= bytes_.size()) {
        throw CodecError(CodecError::Kind::Truncated, std::string("stream truncated while reading ") + what);
      }
      v = (v << 1) | ((bytes_[byte] >> (7 - pos_ % 8)) & 1U);
      ++pos_;
    }
    return v;
  }
  void align() { pos_ = (pos_ + 7) / 8 * 8; }
  std::size_t byte_pos() const { return pos_ / 8; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

void put_record(BitWriter& w, const TokenRecord& r, int cbits, std::size_t index, std::size_t codebook_size) {
  if (!geometry_codes_valid(r.geometry) || r.code >= codebook_size) {
    throw CodecError(CodecError::Kind::OutOfRange, "record " + std::to_string(index) + " has an out-of-range code");
  }
  w.put(r.geometry.qx, kPositionBits);
  w.put(r.geometry.qy, kPositionBits);
  w.put(r.geometry.qtheta, kThetaBits);
  w.put(r.geometry.qs1, kScaleBits);
  w.put(r.geometry.qs2, kScaleBits);
  w.put(r.code, cbits);
}

TokenRecord get_record(BitReader& r, int cbits, std::size_t codebook_size, std::size_t index) {
  TokenRecord t;
  t.geometry.qx = static_cast<std::uint32_t>(r.get(kPositionBits, "record"));
  t.geometry.qy = static_cast<std::uint32_t>(r.get(kPositionBits, "record"));
  t.geometry.qtheta = static_cast<std::uint32_t>(r.get(kThetaBits, "record"));
  t.geometry.qs1 = static_cast<std::uint32_t>(r.get(kScaleBits, "record"));
  t.geometry.qs2 = static_cast<std::uint32_t>(r.get(kScaleBits, "record"));
  t.code = static_cast<std::uint32_t>(r.get(cbits, "record"));
  if (t.code >= codebook_size) {
    throw CodecError(CodecError::Kind::OutOfRange, "record " + std::to_string(index) + " codeword exceeds L");
  }
  return t;
}

void check_shape(const TokenStream& s) {
  auto fail = [](const std::string& what) { throw CodecError(CodecError::Kind::Inconsistent, what); };
  if (s.codebook_size < 2 || (s.codebook_size & (s.codebook_size - 1)) != 0) fail("L must be a power of two >= 2");
  if (s.gaussian_dim < 6) fail("D must be >= 6");
  if (s.mask.size() != s.count) fail("mask length differs from K");
  std::size_t dynamic = 0;
  for (auto m : s.mask) {
    if (m > 1) fail("mask entries must be 0 or 1");
    dynamic += m;
  }
  if (s.statics.size() != s.count - dynamic) fail("static section length differs from K - sum(mask)");
  if (s.dynamics.size() != static_cast<std::size_t>(s.time_steps) * dynamic) fail("dynamic section length differs from T * sum(mask)");
  if (!s.embedded_codebook.empty() &&
      s.embedded_codebook.size() != static_cast<std::size_t>(s.codebook_size) * (s.gaussian_dim - 5u)) {
    fail("embedded codebook size differs from L * (D - 5)");
  }
}

}  // namespace

int code_bits(std::size_t codebook_size) {
  return codebook_size <= 1 ? 0 : std::bit_width(codebook_size - 1);
}

std::size_t record_bits(std::size_t codebook_size) {
  return static_cast<std::size_t>(kGeometryBits + code_bits(codebook_size));
}

std::size_t payload_bits(std::size_t tokens, std::size_t codebook_size) { return tokens * record_bits(codebook_size); }

std::vector<std::uint8_t> serialize(const TokenStream& s) {
  check_shape(s);
  BitWriter w;
  for (char c : {'G', 'V', 'T', '1'}) w.put(static_cast<std::uint8_t>(c), 8);
  const bool embed = !s.embedded_codebook.empty();
  w.put(kStreamVersion | (embed ? kEmbeddedCodebookFlag : 0), 8);
  w.put(s.time_steps, 16);
  w.put(s.count, 16);
  w.put(s.statics.size(), 16);
  w.put(s.gaussian_dim, 8);
  w.put(s.codebook_size, 16);
  w.put(s.codebook_hash, 64);
  w.put(s.grid_height, 16);
  w.put(s.grid_width, 16);
  for (auto m : s.mask) w.put(m, 1);
  w.align();
  const int cbits = code_bits(s.codebook_size);
  for (std::size_t i = 0; i < s.statics.size(); ++i) put_record(w, s.statics[i], cbits, i, s.codebook_size);
  w.align();
  for (std::size_t i = 0; i < s.dynamics.size(); ++i)
    put_record(w, s.dynamics[i], cbits, s.statics.size() + i, s.codebook_size);
  w.align();
  for (float f : s.embedded_codebook) w.put(std::bit_cast<std::uint32_t>(f), 32);
  return w.take();
}

TokenStream deserialize(std::span<const std::uint8_t> bytes, const std::uint64_t* expected_hash) {
  if (bytes.size() < kMagicBytes || bytes[0] != 'G' || bytes[1] != 'V' || bytes[2] != 'T' || bytes[3] != '1') {
    throw CodecError(CodecError::Kind::BadMagic, "not a GVT1 token stream");
  }
  BitReader r(bytes);
  r.get(32, "magic");
  const auto version = static_cast<std::uint8_t>(r.get(8, "header"));
  if ((version & ~kEmbeddedCodebookFlag) != kStreamVersion) {
    throw CodecError(CodecError::Kind::BadVersion, "unsupported stream version " + std::to_string(version & 0x7f));
  }
  TokenStream s;
  s.time_steps = static_cast<std::uint16_t>(r.get(16, "header"));
  s.count = static_cast<std::uint16_t>(r.get(16, "header"));
  const auto static_count = static_cast<std::size_t>(r.get(16, "header"));
  s.gaussian_dim = static_cast<std::uint8_t>(r.get(8, "header"));
  s.codebook_size = static_cast<std::uint16_t>(r.get(16, "header"));
  s.codebook_hash = r.get(64, "header");
  s.grid_height = static_cast<std::uint16_t>(r.get(16, "header"));
  s.grid_width = static_cast<std::uint16_t>(r.get(16, "header"));
  if (expected_hash && *expected_hash != s.codebook_hash) {
    throw CodecError(CodecError::Kind::HashMismatch, "stream references a different codebook");
  }
  if (s.codebook_size < 2 || (s.codebook_size & (s.codebook_size - 1)) != 0 || s.gaussian_dim < 6 ||
      static_count > s.count) {
    throw CodecError(CodecError::Kind::Inconsistent, "header fields are inconsistent");
  }
  s.mask.resize(s.count);
  std::size_t dynamic = 0;
  for (auto& m : s.mask) {
    m = static_cast<std::uint8_t>(r.get(1, "mask"));
    dynamic += m;
  }
  r.align();
  if (s.count - dynamic != static_count) {
    throw CodecError(CodecError::Kind::Inconsistent, "mask disagrees with the static count");
  }
  const int cbits = code_bits(s.codebook_size);
  // Check the total size up front so nothing partial is ever decoded.
  const std::size_t rb = record_bits(s.codebook_size);
  const std::size_t dyn_records = static_cast<std::size_t>(s.time_steps) * dynamic;
  const bool embed = (version & kEmbeddedCodebookFlag) != 0;
  const std::size_t cb_bytes = embed ? static_cast<std::size_t>(s.codebook_size) * (s.gaussian_dim - 5u) * 4 : 0;
  const std::size_t need = r.byte_pos() + (static_count * rb + 7) / 8 + (dyn_records * rb + 7) / 8 + cb_bytes;
  if (bytes.size() < need) {
    throw CodecError(CodecError::Kind::Truncated, "stream truncated: need " + std::to_string(need) + " bytes, have " +
                                                      std::to_string(bytes.size()));
  }
  s.statics.reserve(static_count);
  for (std::size_t i = 0; i < static_count; ++i) s.statics.push_back(get_record(r, cbits, s.codebook_size, i));
  r.align();
  s.dynamics.reserve(dyn_records);
  for (std::size_t i = 0; i < dyn_records; ++i)
    s.dynamics.push_back(get_record(r, cbits, s.codebook_size, static_count + i));
  r.align();
  if (embed) {
    s.embedded_codebook.resize(cb_bytes / 4);
    for (auto& f : s.embedded_codebook) f = std::bit_cast<float>(static_cast<std::uint32_t>(r.get(32, "codebook")));
  }
  if (r.byte_pos() != bytes.size()) {
    throw CodecError(CodecError::Kind::Inconsistent, "trailing bytes after the last section");
  }
  return s;
}

std::string describe(const TokenStream& s) {
  std::ostringstream os;
  const std::size_t bytes = serialize(s).size();
  const auto rate = bitrate(s, 4 * (s.time_steps - 1u) + 1, 4u * s.grid_height, 4u * s.grid_width);
  os << "magic=GVT1 version=" << int{kStreamVersion} << (s.embedded_codebook.empty() ? "" : "+codebook") << '\n'
     << "T=" << s.time_steps << " K=" << s.count << " S=" << s.static_count() << " D=" << int{s.gaussian_dim}
     << " L=" << s.codebook_size << " grid=" << s.grid_height << 'x' << s.grid_width << '\n'
     << "codebook_hash=" << std::hex << s.codebook_hash << std::dec << '\n'
     << "tokens=" << s.token_count() << '\n'
     << "record_bits=" << record_bits(s.codebook_size) << '\n'
     << "payload_bits=" << rate.payload_bits << '\n'
     << "bits=" << rate.bits << '\n'
     << "bytes=" << bytes << '\n'
     << "bpp=" << rate.bpp << '\n';
  return os.str();
}

RatePoint bitrate(const TokenStream& s, std::size_t frames, std::size_t height, std::size_t width) {
  RatePoint p;
  p.tokens = s.token_count();
  p.static_count = s.static_count();
  p.payload_bits = payload_bits(p.tokens, s.codebook_size);
  const std::size_t rb = record_bits(s.codebook_size);
  auto padded = [](std::size_t bits) { return (bits + 7) / 8 * 8; };
  p.bits = (kHeaderBytes - kMagicBytes) * 8 + padded(s.count) + padded(s.statics.size() * rb) +
           padded(s.dynamics.size() * rb) + s.embedded_codebook.size() * 32;
  p.bpp = static_cast<double>(p.bits) / static_cast<double>(frames * height * width);
  return p;
}

}  // namespace gvt
