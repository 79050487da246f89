#include <random>

#include "doctest.h"
#include "gvt/codec.hpp"
#include "gvt/gsp.hpp"
#include "gvt/harness.hpp"
#include "gvt/pipeline.hpp"

using namespace gvt;

namespace {

TokenRecord random_record(std::mt19937_64& rng, std::size_t l) {
  TokenRecord r;
  r.geometry.qx = static_cast<std::uint32_t>(rng() % 64);
  r.geometry.qy = static_cast<std::uint32_t>(rng() % 64);
  r.geometry.qtheta = static_cast<std::uint32_t>(rng() % 8);
  r.geometry.qs1 = static_cast<std::uint32_t>(rng() % 32);
  r.geometry.qs2 = static_cast<std::uint32_t>(rng() % 32);
  r.code = static_cast<std::uint32_t>(rng() % l);
  return r;
}

TokenStream random_stream(std::mt19937_64& rng) {
  TokenStream s;
  s.time_steps = static_cast<std::uint16_t>(1 + rng() % 6);
  s.count = static_cast<std::uint16_t>(1 + rng() % 40);
  s.codebook_size = static_cast<std::uint16_t>(std::size_t{1} << (1 + rng() % 12));
  s.gaussian_dim = static_cast<std::uint8_t>(6 + rng() % 10);
  s.codebook_hash = rng();
  s.grid_height = static_cast<std::uint16_t>(1 + rng() % 32);
  s.grid_width = static_cast<std::uint16_t>(1 + rng() % 32);
  s.mask.resize(s.count);
  std::size_t dynamic = 0;
  for (auto& m : s.mask) dynamic += (m = static_cast<std::uint8_t>(rng() % 2));
  for (std::size_t i = 0; i < s.count - dynamic; ++i) s.statics.push_back(random_record(rng, s.codebook_size));
  for (std::size_t i = 0; i < s.time_steps * dynamic; ++i) s.dynamics.push_back(random_record(rng, s.codebook_size));
  if (rng() % 4 == 0) {
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    s.embedded_codebook.resize(static_cast<std::size_t>(s.codebook_size) * (s.gaussian_dim - 5u));
    for (auto& f : s.embedded_codebook) f = u(rng);
  }
  return s;
}

TokenStream single_record() {
  TokenStream s;
  s.time_steps = 1;
  s.count = 1;
  s.codebook_size = 4096;
  s.mask = {1};
  s.dynamics = {TokenRecord{{63, 0, 7, 31, 5}, 4095}};
  return s;
}

CodecError::Kind error_kind(std::span<const std::uint8_t> bytes, const std::uint64_t* hash = nullptr) {
  try {
    deserialize(bytes, hash);
  } catch (const CodecError& e) {
    return e.kind();
  }
  FAIL("expected a CodecError");
  return CodecError::Kind::Inconsistent;
}

}  // namespace

TEST_CASE("record widths") {
  CHECK(code_bits(4096) == 12);
  CHECK(code_bits(2) == 1);
  CHECK(code_bits(1024) == 10);
  CHECK(record_bits(4096) == 37);
  CHECK(payload_bits(1, 4096) == 37);
  CHECK(payload_bits(token_count(512, 5, 173), 4096) == 69116);
  CHECK(payload_bits(token_count(512, 5, 0), 4096) == 2560 * 37);
}

TEST_CASE("single record stream") {
  const auto s = single_record();
  const auto bytes = serialize(s);
  // header 26, mask 1, dynamic section ceil(37 / 8) = 5
  CHECK(bytes.size() == kHeaderBytes + 1 + 5);
  const auto rate = bitrate(s, 1, 4, 4);
  CHECK(rate.payload_bits == 37);
  CHECK(rate.tokens == 1);
  CHECK(rate.bits == 176 + 8 + 40);
  CHECK(rate.bits == (bytes.size() - kMagicBytes) * 8);
  CHECK(rate.bpp == doctest::Approx(224.0 / 16.0));
  CHECK(deserialize(bytes) == s);
}

TEST_CASE("header bytes are big-endian in declared order") {
  TokenStream s = single_record();
  s.time_steps = 0x0102;
  s.dynamics.assign(0x0102, s.dynamics[0]);
  s.codebook_hash = 0x1122334455667788ULL;
  s.grid_height = 0x0A0B;
  s.grid_width = 0x0C0D;
  const auto b = serialize(s);
  CHECK(b[0] == 'G');
  CHECK(b[3] == '1');
  CHECK(b[4] == kStreamVersion);
  CHECK(b[5] == 0x01);
  CHECK(b[6] == 0x02);
  CHECK(b[7] == 0x00);
  CHECK(b[8] == 0x01);  // K
  CHECK(b[10] == 0x00);  // S
  CHECK(b[11] == 13);
  CHECK(b[12] == 0x10);  // L = 4096
  CHECK(b[13] == 0x00);
  CHECK(b[14] == 0x11);
  CHECK(b[21] == 0x88);
  CHECK(b[22] == 0x0A);
  CHECK(b[25] == 0x0D);
  CHECK(b[26] == 0x80);  // mask bit, padded
}

TEST_CASE("record bit packing") {
  const auto b = serialize(single_record());
  // 111111 000000 111 11111 00101 111111111111 then three zero pad bits
  CHECK(b[27] == 0b11111100);
  CHECK(b[28] == 0b00001111);
  CHECK(b[29] == 0b11110010);
  CHECK(b[30] == 0b11111111);
  CHECK(b[31] == 0b11111000);
}

TEST_CASE("serialize is deterministic") {
  std::mt19937_64 rng(3);
  const auto s = random_stream(rng);
  CHECK(serialize(s) == serialize(s));
}

TEST_CASE("fuzzed round trip") {
  std::mt19937_64 rng(2026);
  for (int i = 0; i < 1000; ++i) {
    const auto s = random_stream(rng);
    const auto bytes = serialize(s);
    const auto back = deserialize(bytes);
    REQUIRE(back == s);
    CHECK(serialize(back) == bytes);
    const auto rate = bitrate(s, 4 * (s.time_steps - 1u) + 1, 4u * s.grid_height, 4u * s.grid_width);
    CHECK(rate.payload_bits == s.token_count() * record_bits(s.codebook_size));
    CHECK(rate.bits == (bytes.size() - kMagicBytes) * 8);
  }
}

TEST_CASE("decode errors are distinct") {
  const auto s = single_record();
  auto bytes = serialize(s);

  auto bad = bytes;
  bad[0] = 'X';
  CHECK(error_kind(bad) == CodecError::Kind::BadMagic);
  CHECK(error_kind(std::span(bytes).first(2)) == CodecError::Kind::BadMagic);

  bad = bytes;
  bad[4] = 2;
  CHECK(error_kind(bad) == CodecError::Kind::BadVersion);

  for (std::size_t n = kMagicBytes; n < bytes.size(); ++n)
    CHECK(error_kind(std::span(bytes).first(n)) == CodecError::Kind::Truncated);

  const std::uint64_t wrong = s.codebook_hash + 1;
  CHECK(error_kind(bytes, &wrong) == CodecError::Kind::HashMismatch);
  const std::uint64_t right = s.codebook_hash;
  CHECK_NOTHROW(deserialize(bytes, &right));

  bytes.push_back(0);
  CHECK(error_kind(bytes) == CodecError::Kind::Inconsistent);
}

TEST_CASE("out-of-range codes name the record") {
  auto s = single_record();
  s.dynamics[0].code = 4096;
  try {
    serialize(s);
    FAIL("expected OutOfRange");
  } catch (const CodecError& e) {
    CHECK(e.kind() == CodecError::Kind::OutOfRange);
    CHECK(std::string(e.what()).find("record 0") != std::string::npos);
  }
  s = single_record();
  s.dynamics[0].geometry.qtheta = 8;
  CHECK_THROWS_AS(serialize(s), CodecError);
  s = single_record();
  s.codebook_size = 1000;
  CHECK_THROWS_AS(serialize(s), CodecError);
}

TEST_CASE("rate linearity") {
  TokenStream s;
  s.count = 16;
  s.codebook_size = 4096;
  s.mask.assign(16, 1);
  std::mt19937_64 rng(8);
  auto with_t = [&](std::uint16_t t) {
    s.time_steps = t;
    s.dynamics.clear();
    for (std::size_t i = 0; i < std::size_t{t} * 16; ++i) s.dynamics.push_back(random_record(rng, 4096));
    return bitrate(s, 1, 1, 1).payload_bits;
  };
  const auto p3 = with_t(3);
  CHECK(with_t(6) == 2 * p3);

  // S -> K at fixed K, T reduces the payload by a factor of T.
  TokenStream all_static = s;
  all_static.time_steps = 6;
  all_static.mask.assign(16, 0);
  all_static.dynamics.clear();
  for (int i = 0; i < 16; ++i) all_static.statics.push_back(random_record(rng, 4096));
  CHECK(bitrate(all_static, 1, 1, 1).payload_bits * 6 == with_t(6));
}

TEST_CASE("halving K reduces the payload bound") {
  for (std::size_t k : {512, 128, 64, 2}) CHECK(payload_bits(k / 2 * 5, 4096) < payload_bits(k * 5, 4096));
}

TEST_CASE("describe reports token accounting") {
  const auto text = describe(single_record());
  CHECK(text.find("tokens=1\n") != std::string::npos);
  CHECK(text.find("payload_bits=37\n") != std::string::npos);
  CHECK(text.find("bits=224\n") != std::string::npos);
}

TEST_CASE("model encode and decode") {
  auto cfg = micro_config();
  GvtModel model(cfg);
  const auto clips = synthetic_suite(1, cfg.model.frame_height, cfg.model.frame_width, cfg.model.frames(), 4);
  const auto stream = model.encode(clips[0]);
  const auto fwd = model.forward(clips[0]);
  CHECK(stream.token_count() == fwd.tokens);
  CHECK(stream.codebook_hash == codebook_hash(model.codebook()));
  CHECK(deserialize(serialize(stream)) == stream);
  const auto out = model.decode(stream);
  CHECK(out.frames == clips[0].frames);
  CHECK(out.height == clips[0].height);
  CHECK(out.width == clips[0].width);

  auto other = stream;
  other.codebook_hash ^= 1;
  CHECK_THROWS_AS(model.decode(other), CodecError);

  const auto embedded = model.encode(clips[0], true);
  CHECK(embedded.embedded_codebook.size() == cfg.model.codebook_size * cfg.model.coeff_dim());
  CHECK(deserialize(serialize(embedded)) == embedded);
}

TEST_CASE("rd_sweep rows are sorted by bits") {
  auto cfg = micro_config();
  const auto clips = synthetic_suite(1, cfg.model.frame_height, cfg.model.frame_width, cfg.model.frames(), 1);
  const auto rows = rd_sweep(clips, {{8, 0.5}, {4, 0.25}}, cfg, 2);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].bits <= rows[1].bits);
  for (const auto& r : rows) {
    CHECK(r.tokens <= r.initial_gaussians * cfg.model.time_steps);
    CHECK(r.payload_bits == r.tokens * record_bits(cfg.model.codebook_size));
  }
}
