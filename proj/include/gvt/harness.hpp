// Copyright 2026 The GVT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "gvt/video.hpp"

namespace gvt {

struct Sprite {
  enum class Shape { Square, Disc };
  Shape shape = Shape::Square;
  double size = 6.0;                 // edge length or diameter, pixels
  std::array<double, 2> origin{};    // center (x, y) at frame 0, pixels
  std::array<double, 2> velocity{};  // pixels per frame
  std::array<double, 3> color{1.0, 0.0, 0.0};
};

struct SyntheticSpec {
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t frames = 9;
  std::vector<Sprite> sprites;
};

struct SyntheticClip {
  VideoClip clip;
  std::vector<std::uint8_t> static_pixels;  // [H' * W'], 1 = never covered by a sprite
};

std::array<double, 2> sprite_center(const Sprite& s, std::size_t frame);
bool sprite_covers(const Sprite& s, std::size_t frame, double px, double py);

/// Background is smooth seeded noise shared by every frame; sprites are drawn
/// on top in list order. Throws if a sprite leaves the canvas.
SyntheticClip synth_clip(const SyntheticSpec& spec, std::uint64_t seed);

/// Spec with one or two random sprites that stay inside the canvas.
SyntheticSpec random_spec(std::size_t height, std::size_t width, std::size_t frames, std::uint64_t seed);

/// `count` clips seeded seed, seed+1, ...
std::vector<VideoClip> synthetic_suite(std::size_t count, std::size_t height, std::size_t width, std::size_t frames,
                                       std::uint64_t seed);

inline constexpr double kPsnrCap = 99.0;

double mse(const VideoClip& a, const VideoClip& b);
/// 10 log10(1 / MSE), capped at 99 dB.
double psnr(const VideoClip& a, const VideoClip& b);
/// 7x7 uniform-window SSIM per frame and channel, then the mean.
double ssim(const VideoClip& a, const VideoClip& b);

/// "GVCL" clip files: magic, u32 version, u32 dtype (0 f32, 1 f64), u32 C, T,
/// H, W, then planar [C][T][H][W] samples, all big-endian.
enum class SampleType : std::uint32_t { Float32 = 0, Float64 = 1 };
void write_clip(const std::string& path, const VideoClip& clip, SampleType type = SampleType::Float64);
VideoClip read_clip(const std::string& path);

/// Frames from the *.png files of a directory, in name order.
VideoClip read_png_sequence(const std::string& dir);

/// *.gvcl files and PNG-sequence subdirectories of `dir`, in name order.
std::vector<VideoClip> load_clip_dir(const std::string& dir);

}  // namespace gvt
