// Copyright 2026 The GVT Authors
// SPDX-License-Identifier: Apache-2.0

// "GVCK" checkpoints: magic, u32 version, u32 config length, config text,
// u32 parameter count, then per parameter: u32 name length, name, u32 rank,
// u32 dims, f64 values. Integers and floats are big-endian.

#include <bit>
#include <fstream>

#include "gvt/pipeline.hpp"

namespace gvt {

namespace {

constexpr std::uint32_t kCheckpointVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) os.put(static_cast<char>((v >> s) & 0xff));
}

void put_u64(std::ostream& os, std::uint64_t v) {
  for (int s = 56; s >= 0; s -= 8) os.put(static_cast<char>((v >> s) & 0xff));
}

std::uint64_t get_be(std::istream& is, int bytes, const std::string& path) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    const int c = is.get();
    if (c == EOF) throw std::runtime_error(path + ": truncated checkpoint");
    v = (v << 8) | static_cast<std::uint8_t>(c);
  }
  return v;
}

std::string get_string(std::istream& is, std::size_t n, const std::string& path) {
  std::string s(n, '\0');
  if (!is.read(s.data(), static_cast<std::streamsize>(n))) throw std::runtime_error(path + ": truncated checkpoint");
  return s;
}

}  // namespace

void save_checkpoint(const std::string& path, GvtModel& model) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path);
  os.write("GVCK", 4);
  put_u32(os, kCheckpointVersion);
  const std::string cfg = format_config(model.config());
  put_u32(os, static_cast<std::uint32_t>(cfg.size()));
  os.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
  const auto& params = model.store().all();
  put_u32(os, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    put_u32(os, static_cast<std::uint32_t>(p.name.size()));
    os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put_u32(os, static_cast<std::uint32_t>(p.tensor.rank()));
    for (auto d : p.tensor.shape()) put_u32(os, static_cast<std::uint32_t>(d));
    for (double v : p.tensor.data()) put_u64(os, std::bit_cast<std::uint64_t>(v));
  }
  if (!os) throw std::runtime_error("failed writing " + path);
}

std::unique_ptr<GvtModel> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  if (get_string(is, 4, path) != "GVCK") throw std::runtime_error(path + ": not a GVCK checkpoint");
  if (get_be(is, 4, path) != kCheckpointVersion) throw std::runtime_error(path + ": unsupported checkpoint version");
  const auto cfg_len = get_be(is, 4, path);
  auto model = std::make_unique<GvtModel>(parse_config(get_string(is, cfg_len, path)));
  const auto count = get_be(is, 4, path);
  if (count != model->store().all().size()) throw std::runtime_error(path + ": parameter count mismatch");
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::string name = get_string(is, get_be(is, 4, path), path);
    const auto* param = model->store().find(name);
    if (!param) throw std::runtime_error(path + ": unknown parameter '" + name + "'");
    nn::Tensor t = param->tensor;
    const auto rank = get_be(is, 4, path);
    nn::Shape shape;
    for (std::uint64_t d = 0; d < rank; ++d) shape.push_back(get_be(is, 4, path));
    if (shape != t.shape()) throw std::runtime_error(path + ": shape mismatch for '" + name + "'");
    for (auto& v : t.mutable_data()) v = std::bit_cast<double>(get_be(is, 8, path));
  }
  return model;
}

}  // namespace gvt
