#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "planepose/pose.hpp"
#include "planepose/volume.hpp"

namespace planepose {

/// 8-bit grayscale raster, row-major.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(int row, int col) const {
    return pixels[static_cast<std::size_t>(row) * width + col];
  }
};

struct SliceImage {
  static constexpr int kSize = 128;

  std::vector<std::uint8_t> pixels = std::vector<std::uint8_t>(kSize * kSize);
  Pose6D pose;
  std::string volume_id;
  double pixel_pitch_norm = 2.0 / kSize;

  std::uint8_t at(int row, int col) const {
    return pixels[static_cast<std::size_t>(row) * kSize + col];
  }
  GrayImage gray() const { return {kSize, kSize, pixels}; }
};

inline constexpr double kDefaultSideNorm = 2.0;

/// Samples an n×n grid of the plane into `out` (unquantized). Pixel (r, c)
/// sits at plane coordinates u = (c + ½)·side/n − side/2 along the plane x
/// axis (column 0 of R) and v likewise from r along the plane y axis
/// (column 1); the plane normal is column 2.
void render_plane(const Volume& v, const Pose6D& pose, double side_norm, int n,
                  std::span<double> out);

/// 128×128 slice at `pose`, trilinear sampling, round-half-up quantization.
SliceImage extract_slice(const Volume& v, const Pose6D& pose,
                         double side_norm = kDefaultSideNorm);

std::uint8_t quantize(double value);

/// Binary PGM (P5, maxval 255).
std::string encode_pgm(const GrayImage& img);
GrayImage decode_pgm(std::string_view bytes);
void write_pgm(const std::filesystem::path& path, const GrayImage& img);
GrayImage read_pgm(const std::filesystem::path& path);

/// ColorJitter-style factors. Saturation is carried for completeness and is
/// the identity on grayscale.
struct AugmentParams {
  double brightness = 1.0;
  double contrast = 1.0;
  double saturation = 1.0;
};

/// p' = clamp(p·b); p'' = clamp(mean(p') + c·(p' − mean(p'))); rounded half up.
SliceImage augment(const SliceImage& img, const AugmentParams& params);

/// Factors drawn uniformly from [max(0, 1 − s), 1 + s]. Throws BadStrength
/// unless s ∈ [0, 1].
AugmentParams sample_augment_params(std::mt19937_64& rng, double strength);

}  // namespace planepose
