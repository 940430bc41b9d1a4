#include "planepose/slicer.hpp"

#include <algorithm>
#include <cmath>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <iterator>

#include "planepose/error.hpp"

namespace planepose {

void render_plane(const Volume& v, const Pose6D& pose, double side_norm, int n,
                  std::span<double> out) {
  if (!(side_norm > 0.0 && side_norm <= 4.0)) {
    throw Error(ErrorKind::InvalidArgument, "side_norm must lie in (0, 4]");
  }
  if (n <= 0 || out.size() != static_cast<std::size_t>(n) * n) {
    throw Error(ErrorKind::InvalidArgument, "render_plane output size mismatch");
  }
  const Mat3 r = pose.rotation().matrix();
  // work in voxel index space: one affine map per pixel
  const double half = v.half_extent_voxels();
  const Vec3 origin = v.normalized_to_voxel(pose.t());
  const double pitch = side_norm / n;
  const Vec3 ex = r.col(0) * (pitch * half);
  const Vec3 ey = r.col(1) * (pitch * half);
  const double c0 = 0.5 - n / 2.0;
  for (int row = 0; row < n; ++row) {
    const Vec3 row_base = origin + ey * (row + c0);
    double* dst = out.data() + static_cast<std::size_t>(row) * n;
    for (int col = 0; col < n; ++col) {
      const Vec3 p = row_base + ex * (col + c0);
      dst[col] = v.sample_voxel(p.x(), p.y(), p.z());
    }
  }
}

std::uint8_t quantize(double value) {
  return static_cast<std::uint8_t>(std::clamp(std::floor(value + 0.5), 0.0, 255.0));
}

SliceImage extract_slice(const Volume& v, const Pose6D& pose, double side_norm) {
  constexpr int n = SliceImage::kSize;
  std::vector<double> buf(n * n);
  render_plane(v, pose, side_norm, n, buf);
  SliceImage img;
  std::transform(buf.begin(), buf.end(), img.pixels.begin(), quantize);
  img.pose = pose;
  img.volume_id = v.id();
  img.pixel_pitch_norm = side_norm / n;
  return img;
}

std::string encode_pgm(const GrayImage& img) {
  std::string out = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) +
                    "\n255\n";
  out.append(reinterpret_cast<const char*>(img.pixels.data()), img.pixels.size());
  return out;
}

namespace {

// Reads the next whitespace-delimited header token, skipping # comments.
std::string next_token(std::string_view bytes, std::size_t& pos) {
  while (pos < bytes.size()) {
    const char c = bytes[pos];
    if (c == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      ++pos;
    } else {
      break;
    }
  }
  const std::size_t start = pos;
  while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
  return std::string(bytes.substr(start, pos - start));
}

int parse_positive(const std::string& tok) {
  if (tok.empty() || tok.size() > 9 ||
      !std::all_of(tok.begin(), tok.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    throw Error(ErrorKind::FormatError, "bad PGM header field '" + tok + "'");
  }
  return std::stoi(tok);
}

}  // namespace

GrayImage decode_pgm(std::string_view bytes) {
  std::size_t pos = 0;
  if (next_token(bytes, pos) != "P5") throw Error(ErrorKind::FormatError, "not a P5 PGM");
  GrayImage img;
  img.width = parse_positive(next_token(bytes, pos));
  img.height = parse_positive(next_token(bytes, pos));
  if (parse_positive(next_token(bytes, pos)) != 255) {
    throw Error(ErrorKind::FormatError, "only maxval 255 is supported");
  }
  ++pos;  // single whitespace byte before the raster
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  if (img.width == 0 || img.height == 0 || pos > bytes.size() || bytes.size() - pos != n) {
    throw Error(ErrorKind::FormatError, "PGM raster size mismatch");
  }
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end());
  return img;
}

void write_pgm(const std::filesystem::path& path, const GrayImage& img) {
  const std::string data = encode_pgm(img);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  out.flush();
  if (!out) throw Error(ErrorKind::IoError, "write failed: " + path.string());
}

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  const std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_pgm(data);
}

SliceImage augment(const SliceImage& img, const AugmentParams& params) {
  if (!(params.brightness >= 0.0 && params.contrast >= 0.0 && params.saturation >= 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "augmentation factors must be >= 0");
  }
  std::vector<double> p(img.pixels.size());
  double mean = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::clamp(img.pixels[i] * params.brightness, 0.0, 255.0);
    mean += p[i];
  }
  mean /= static_cast<double>(p.size());
  SliceImage out = img;
  for (std::size_t i = 0; i < p.size(); ++i) {
    out.pixels[i] = quantize(std::clamp(mean + params.contrast * (p[i] - mean), 0.0, 255.0));
  }
  return out;
}

AugmentParams sample_augment_params(std::mt19937_64& rng, double strength) {
  if (!(strength >= 0.0 && strength <= 1.0)) {
    throw Error(ErrorKind::BadStrength, "augmentation strength must lie in [0, 1]");
  }
  const double lo = std::max(0.0, 1.0 - strength);
  const double hi = 1.0 + strength;
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  AugmentParams out;
  out.brightness = lo + (hi - lo) * uni(rng);
  out.contrast = lo + (hi - lo) * uni(rng);
  out.saturation = lo + (hi - lo) * uni(rng);
  return out;
}

}  // namespace planepose
