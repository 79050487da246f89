// Copyright 2026 The GVT Authors
// SPDX-License-Identifier: Apache-2.0

#include "gvt/harness.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numbers>
#include <random>
#include <stdexcept>

namespace gvt {

namespace fs = std::filesystem;

std::array<double, 2> sprite_center(const Sprite& s, std::size_t frame) {
  const auto t = static_cast<double>(frame);
  return {s.origin[0] + s.velocity[0] * t, s.origin[1] + s.velocity[1] * t};
}

bool sprite_covers(const Sprite& s, std::size_t frame, double px, double py) {
  const auto c = sprite_center(s, frame);
  const double dx = px - c[0], dy = py - c[1], r = 0.5 * s.size;
  if (s.shape == Sprite::Shape::Square) return std::abs(dx) <= r && std::abs(dy) <= r;
  return dx * dx + dy * dy <= r * r;
}

SyntheticClip synth_clip(const SyntheticSpec& spec, std::uint64_t seed) {
  const std::size_t h = spec.height, w = spec.width;
  for (const auto& s : spec.sprites) {
    for (std::size_t t = 0; t < spec.frames; ++t) {
      const auto c = sprite_center(s, t);
      const double r = 0.5 * s.size;
      if (c[0] - r < 0 || c[1] - r < 0 || c[0] + r > static_cast<double>(w) || c[1] + r > static_cast<double>(h)) {
        throw std::invalid_argument("synth_clip: sprite leaves the canvas at frame " + std::to_string(t));
      }
    }
  }
  // Low-frequency texture: a few plane waves per channel around mid grey.
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  struct Wave {
    double fx, fy, phase, amp;
  };
  std::array<std::vector<Wave>, 3> waves;
  std::array<double, 3> base{};
  for (std::size_t c = 0; c < 3; ++c) {
    base[c] = 0.35 + 0.3 * u(rng);
    for (int i = 0; i < 3; ++i) {
      waves[c].push_back({std::floor(u(rng) * 3.0) - 1.0 + (i == 0 ? 1.0 : 0.0), std::floor(u(rng) * 3.0) - 1.0,
                          2.0 * std::numbers::pi * u(rng), 0.06 + 0.06 * u(rng)});
    }
  }
  SyntheticClip out;
  out.clip = VideoClip(spec.frames, h, w);
  out.static_pixels.assign(h * w, 1);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double nx = (static_cast<double>(x) + 0.5) / static_cast<double>(w);
      const double ny = (static_cast<double>(y) + 0.5) / static_cast<double>(h);
      std::array<double, 3> bg{};
      for (std::size_t c = 0; c < 3; ++c) {
        double v = base[c];
        for (const auto& wv : waves[c]) v += wv.amp * std::sin(2.0 * std::numbers::pi * (wv.fx * nx + wv.fy * ny) + wv.phase);
        bg[c] = std::clamp(v, 0.0, 1.0);
      }
      for (std::size_t t = 0; t < spec.frames; ++t) {
        std::array<double, 3> px = bg;
        for (const auto& s : spec.sprites) {
          if (sprite_covers(s, t, static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5)) {
            px = s.color;
            out.static_pixels[y * w + x] = 0;
          }
        }
        for (std::size_t c = 0; c < 3; ++c) out.clip.at(t, y, x, c) = px[c];
      }
    }
  }
  return out;
}

SyntheticSpec random_spec(std::size_t height, std::size_t width, std::size_t frames, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SyntheticSpec spec;
  spec.height = height;
  spec.width = width;
  spec.frames = frames;
  const int count = 1 + static_cast<int>(rng() % 2);
  const double travel = static_cast<double>(frames > 0 ? frames - 1 : 0);
  for (int i = 0; i < count; ++i) {
    Sprite s;
    s.shape = (rng() % 2) ? Sprite::Shape::Disc : Sprite::Shape::Square;
    s.size = 5.0 + std::floor(u(rng) * 3.0);
    const double speed = 1.0;
    const double angle = std::floor(u(rng) * 8.0) * std::numbers::pi / 4.0;
    s.velocity = {std::round(std::cos(angle)) * speed, std::round(std::sin(angle)) * speed};
    // Pick an origin so the whole trajectory fits.
    const double r = 0.5 * s.size;
    for (int axis = 0; axis < 2; ++axis) {
      const double extent = static_cast<double>(axis == 0 ? width : height);
      const double shift = s.velocity[axis] * travel;
      const double lo = r + std::max(0.0, -shift), hi = extent - r - std::max(0.0, shift);
      s.origin[axis] = std::floor(lo + u(rng) * std::max(0.0, hi - lo)) + 0.5;
      s.origin[axis] = std::clamp(s.origin[axis], lo, hi);
    }
    const double hue = u(rng);
    s.color = {0.5 + 0.5 * std::cos(2.0 * std::numbers::pi * hue), 0.5 + 0.5 * std::cos(2.0 * std::numbers::pi * (hue - 1.0 / 3.0)),
               0.5 + 0.5 * std::cos(2.0 * std::numbers::pi * (hue - 2.0 / 3.0))};
    spec.sprites.push_back(s);
  }
  return spec;
}

std::vector<VideoClip> synthetic_suite(std::size_t count, std::size_t height, std::size_t width, std::size_t frames,
                                       std::uint64_t seed) {
  std::vector<VideoClip> clips;
  for (std::size_t i = 0; i < count; ++i) {
    clips.push_back(synth_clip(random_spec(height, width, frames, seed + i), seed + i).clip);
  }
  return clips;
}

namespace {

void require_same_shape(const VideoClip& a, const VideoClip& b, const char* op) {
  if (a.frames != b.frames || a.height != b.height || a.width != b.width || a.data.size() != b.data.size()) {
    throw std::invalid_argument(std::string(op) + ": clip shapes differ");
  }
}

}  // namespace

double mse(const VideoClip& a, const VideoClip& b) {
  require_same_shape(a, b, "mse");
  double s = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    s += d * d;
  }
  return a.data.empty() ? 0.0 : s / static_cast<double>(a.data.size());
}

double psnr(const VideoClip& a, const VideoClip& b) {
  const double m = mse(a, b);
  if (m <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, -10.0 * std::log10(m));
}

double ssim(const VideoClip& a, const VideoClip& b) {
  require_same_shape(a, b, "ssim");
  constexpr std::size_t kWin = 7;
  constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  if (a.height < kWin || a.width < kWin) throw std::invalid_argument("ssim: frames smaller than the 7x7 window");
  const double n = static_cast<double>(kWin * kWin);
  double total = 0.0;
  std::size_t planes = 0;
  for (std::size_t t = 0; t < a.frames; ++t) {
    for (std::size_t c = 0; c < VideoClip::kChannels; ++c) {
      double plane = 0.0;
      std::size_t windows = 0;
      for (std::size_t y = 0; y + kWin <= a.height; ++y) {
        for (std::size_t x = 0; x + kWin <= a.width; ++x) {
          double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
          for (std::size_t dy = 0; dy < kWin; ++dy)
            for (std::size_t dx = 0; dx < kWin; ++dx) {
              const double va = a.at(t, y + dy, x + dx, c), vb = b.at(t, y + dy, x + dx, c);
              sa += va;
              sb += vb;
              saa += va * va;
              sbb += vb * vb;
              sab += va * vb;
            }
          const double ma = sa / n, mb = sb / n;
          const double va = saa / n - ma * ma, vb = sbb / n - mb * mb, cov = sab / n - ma * mb;
          plane += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
          ++windows;
        }
      }
      total += plane / static_cast<double>(windows);
      ++planes;
    }
  }
  return planes ? total / static_cast<double>(planes) : 1.0;
}

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                     static_cast<char>(v)};
  os.write(b, 4);
}

std::uint64_t get_be(std::istream& is, int bytes, const std::string& path) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), bytes)) throw std::runtime_error(path + ": truncated clip file");
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v = (v << 8) | b[i];
  return v;
}

}  // namespace

void write_clip(const std::string& path, const VideoClip& clip, SampleType type) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path);
  os.write("GVCL", 4);
  put_u32(os, 1);
  put_u32(os, static_cast<std::uint32_t>(type));
  put_u32(os, VideoClip::kChannels);
  put_u32(os, static_cast<std::uint32_t>(clip.frames));
  put_u32(os, static_cast<std::uint32_t>(clip.height));
  put_u32(os, static_cast<std::uint32_t>(clip.width));
  for (std::size_t c = 0; c < VideoClip::kChannels; ++c)
    for (std::size_t t = 0; t < clip.frames; ++t)
      for (std::size_t y = 0; y < clip.height; ++y)
        for (std::size_t x = 0; x < clip.width; ++x) {
          const double v = clip.at(t, y, x, c);
          if (type == SampleType::Float32) {
            put_u32(os, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
          } else {
            const auto bits = std::bit_cast<std::uint64_t>(v);
            put_u32(os, static_cast<std::uint32_t>(bits >> 32));
            put_u32(os, static_cast<std::uint32_t>(bits));
          }
        }
  if (!os) throw std::runtime_error("failed writing " + path);
}

VideoClip read_clip(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  char magic[4];
  if (!is.read(magic, 4) || std::string(magic, 4) != "GVCL") throw std::runtime_error(path + ": not a GVCL clip");
  if (get_be(is, 4, path) != 1) throw std::runtime_error(path + ": unsupported clip version");
  const auto type = get_be(is, 4, path);
  if (type > 1) throw std::runtime_error(path + ": unknown sample type");
  const auto channels = get_be(is, 4, path);
  if (channels != VideoClip::kChannels) throw std::runtime_error(path + ": expected 3 channels");
  const auto t = get_be(is, 4, path), h = get_be(is, 4, path), w = get_be(is, 4, path);
  if (t * h * w > (1ULL << 28)) throw std::runtime_error(path + ": clip too large");
  VideoClip clip(t, h, w);
  for (std::size_t c = 0; c < VideoClip::kChannels; ++c)
    for (std::size_t ti = 0; ti < t; ++ti)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
          clip.at(ti, y, x, c) = type == 0 ? std::bit_cast<float>(static_cast<std::uint32_t>(get_be(is, 4, path)))
                                           : std::bit_cast<double>(get_be(is, 8, path));
        }
  return clip;
}

namespace {

struct PngImage {
  std::size_t height = 0, width = 0;
  std::vector<std::uint8_t> rgb;
};

PngImage read_png(const std::string& path) {
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> fp(std::fopen(path.c_str(), "rb"), &std::fclose);
  if (!fp) throw std::runtime_error("cannot open " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) throw std::runtime_error("libpng initialisation failed");
  PngImage img;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error(path + ": invalid PNG");
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  png_set_strip_16(png);
  png_set_palette_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  png_set_gray_to_rgb(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);
  img.width = png_get_image_width(png, info);
  img.height = png_get_image_height(png, info);
  img.rgb.resize(img.height * img.width * 3);
  rows.resize(img.height);
  for (std::size_t y = 0; y < img.height; ++y) rows[y] = img.rgb.data() + y * img.width * 3;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

}  // namespace

VideoClip read_png_sequence(const std::string& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw std::runtime_error(dir + ": no PNG frames");
  VideoClip clip;
  for (std::size_t t = 0; t < files.size(); ++t) {
    const auto img = read_png(files[t].string());
    if (t == 0) clip = VideoClip(files.size(), img.height, img.width);
    if (img.height != clip.height || img.width != clip.width) throw std::runtime_error(files[t].string() + ": frame size differs");
    for (std::size_t i = 0; i < img.rgb.size(); ++i) clip.data[t * img.rgb.size() + i] = img.rgb[i] / 255.0;
  }
  return clip;
}

std::vector<VideoClip> load_clip_dir(const std::string& dir) {
  std::vector<fs::path> entries;
  for (const auto& e : fs::directory_iterator(dir)) entries.push_back(e.path());
  std::sort(entries.begin(), entries.end());
  std::vector<VideoClip> clips;
  for (const auto& p : entries) {
    if (fs::is_regular_file(p) && p.extension() == ".gvcl") clips.push_back(read_clip(p.string()));
    else if (fs::is_directory(p)) clips.push_back(read_png_sequence(p.string()));
  }
  if (clips.empty()) throw std::runtime_error(dir + ": no clips found");
  return clips;
}

VideoClip VideoClip::from_tensor(const nn::Tensor& t) {
  if (t.rank() != 4 || t.dim(3) != kChannels) throw nn::NumericsError("VideoClip: expected [T,H,W,3]");
  VideoClip clip(t.dim(0), t.dim(1), t.dim(2));
  std::copy(t.data().begin(), t.data().end(), clip.data.begin());
  return clip;
}

}  // namespace gvt
