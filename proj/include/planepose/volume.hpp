#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "planepose/pose.hpp"

namespace planepose {

using Dims = std::array<int, 3>;

/// Isotropic 8-bit scalar grid, x-fastest. The normalized frame puts the grid
/// centre at the origin and maps the largest axis' end voxel centres to ±1;
/// all axes share that one scale.
class Volume {
 public:
  Volume(Dims dims, double spacing_mm, std::vector<std::uint8_t> voxels,
         std::optional<std::vector<std::uint8_t>> mask = std::nullopt, std::string id = {});

  const Dims& dims() const { return dims_; }
  double spacing_mm() const { return spacing_; }
  const std::vector<std::uint8_t>& voxels() const { return voxels_; }
  const std::optional<std::vector<std::uint8_t>>& mask() const { return mask_; }
  bool has_mask() const { return mask_.has_value(); }
  const std::string& id() const { return id_; }
  void set_id(std::string id) { id_ = std::move(id); }

  std::size_t voxel_count() const { return voxels_.size(); }
  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(dims_[0]) *
               (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims_[1]) * k);
  }
  std::uint8_t at(int i, int j, int k) const { return voxels_[index(i, j, k)]; }

  /// Voxels per normalized unit.
  double half_extent_voxels() const { return half_; }
  /// Millimetres per normalized unit.
  double scale_mm_per_norm() const { return half_ * spacing_; }

  Vec3 normalized_to_voxel(const Vec3& p) const { return center_ + p * half_; }
  Vec3 voxel_to_normalized(const Vec3& idx) const { return (idx - center_) / half_; }
  /// Millimetre frame: voxel (0,0,0) centre at the origin, axes along the grid.
  Vec3 voxel_to_mm(const Vec3& idx) const { return idx * spacing_; }
  Vec3 mm_to_voxel(const Vec3& mm) const { return mm / spacing_; }
  Vec3 normalized_to_mm(const Vec3& p) const { return voxel_to_mm(normalized_to_voxel(p)); }
  Vec3 mm_to_normalized(const Vec3& mm) const { return voxel_to_normalized(mm_to_voxel(mm)); }

  /// Trilinear sample at a fractional voxel index; 0 outside voxel support.
  double sample_voxel(double x, double y, double z) const {
    if (!(x >= 0.0 && y >= 0.0 && z >= 0.0 && x <= max_idx_[0] && y <= max_idx_[1] &&
          z <= max_idx_[2])) {
      return 0.0;
    }
    int i = static_cast<int>(x);
    int j = static_cast<int>(y);
    int k = static_cast<int>(z);
    if (i > dims_[0] - 2) i = dims_[0] - 2;
    if (j > dims_[1] - 2) j = dims_[1] - 2;
    if (k > dims_[2] - 2) k = dims_[2] - 2;
    const double fx = x - i, fy = y - j, fz = z - k;
    const std::uint8_t* base = voxels_.data() + index(i, j, k);
    const std::size_t sy = static_cast<std::size_t>(dims_[0]);
    const std::size_t sz = sy * static_cast<std::size_t>(dims_[1]);
    const double c00 = base[0] * (1.0 - fx) + base[1] * fx;
    const double c10 = base[sy] * (1.0 - fx) + base[sy + 1] * fx;
    const double c01 = base[sz] * (1.0 - fx) + base[sz + 1] * fx;
    const double c11 = base[sz + sy] * (1.0 - fx) + base[sz + sy + 1] * fx;
    const double c0 = c00 * (1.0 - fy) + c10 * fy;
    const double c1 = c01 * (1.0 - fy) + c11 * fy;
    return c0 * (1.0 - fz) + c1 * fz;
  }

  /// Trilinear sample at a normalized point.
  double sample(const Vec3& p) const {
    const Vec3 idx = normalized_to_voxel(p);
    return sample_voxel(idx.x(), idx.y(), idx.z());
  }

  /// Trilinear sample at a point in the millimetre frame.
  double sample_mm(const Vec3& mm) const {
    return sample_voxel(mm.x() / spacing_, mm.y() / spacing_, mm.z() / spacing_);
  }

 private:
  Dims dims_;
  double spacing_;
  std::vector<std::uint8_t> voxels_;
  std::optional<std::vector<std::uint8_t>> mask_;
  std::string id_;
  Vec3 center_;
  double half_;
  std::array<double, 3> max_idx_;
};

inline double sample_trilinear(const Volume& v, const Vec3& p) { return v.sample(p); }

/// Reads `<stem>.json` plus its `<stem>.raw` sidecar. The volume id is the stem.
Volume load_volume(const std::filesystem::path& header_path);
/// `meta`, when given, is stored verbatim under the header's "meta" key.
void save_volume(const Volume& v, const std::filesystem::path& header_path,
                 const nlohmann::json& meta = nullptr);

struct Landmark {
  std::string label;
  Vec3 mm = Vec3::Zero();
};

struct Landmarks {
  std::string volume_id;
  std::vector<Landmark> points;

  const Landmark* find(const std::string& label) const;
};

/// CSV with header `label,x_mm,y_mm,z_mm`; labels must be unique.
Landmarks load_landmarks(const std::filesystem::path& path, std::string volume_id = {});
void save_landmarks(const Landmarks& lm, const std::filesystem::path& path);
/// Throws InvalidArgument if any landmark lies outside the volume's extent.
void check_landmarks_inside(const Landmarks& lm, const Volume& v);

}  // namespace planepose
