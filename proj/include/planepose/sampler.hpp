#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "planepose/pose.hpp"
#include "planepose/slicer.hpp"
#include "planepose/volume.hpp"

namespace planepose {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Dataset recipe: uniformly random planes plus a dense cluster around an
/// annotated standard plane. Near-plane steps are half-widths.
struct SamplingSpec {
  int n_random = 20699;
  int n_near_sp = 1330;
  std::array<Interval, 3> t_range = {{{-0.35, 0.35}, {-0.35, 0.35}, {-0.35, 0.35}}};
  double near_sp_t_step = 0.001;
  double near_sp_rot_step_deg = 1.9;
  Pose6D sp_pose;
  std::uint64_t seed = 0;
  double augment_strength = 0.0;  // 0 disables augmentation
  double side_norm = kDefaultSideNorm;

  /// Throws InvalidArgument on negative counts, non-positive steps, or a
  /// translation range outside [-1, 1]³.
  void validate() const;
};

nlohmann::json spec_to_json(const SamplingSpec& s);
SamplingSpec spec_from_json(const nlohmann::json& j);

/// Uniform t in the range; rotation uniform on SO(3) (normalized 4D Gaussian).
Pose6D sample_random_pose(std::mt19937_64& rng, const SamplingSpec& spec);

/// sp_pose perturbed by per-axis uniform translation and a rotation about a
/// uniformly random axis with angle uniform in [0, rot step], applied in the
/// plane's local frame.
Pose6D sample_near_sp_pose(std::mt19937_64& rng, const SamplingSpec& spec);

enum class Category { Random, NearSp };
const char* to_string(Category c);
Category category_from_string(const std::string& s);

struct ManifestRow {
  std::string path;  // relative to the dataset directory
  std::string volume_id;
  Pose6D pose;
  Category category = Category::Random;
  std::optional<std::uint64_t> aug_seed;
};

struct DatasetManifest {
  std::vector<ManifestRow> rows;
};

inline constexpr const char* kManifestHeader =
    "path,volume_id,tx,ty,tz,qw,qx,qy,qz,category,aug_seed";

std::string manifest_row_csv(const ManifestRow& row);
std::string manifest_to_csv(const DatasetManifest& m);
DatasetManifest read_manifest(const std::filesystem::path& csv_path);

/// Draws every row's pose (already snapped to manifest precision) without
/// rendering anything. Row order: all random rows, then all near-SP rows.
DatasetManifest plan_dataset(const Volume& v, const SamplingSpec& spec);

/// The stored image for a row: the slice at its pose, augmented when the row
/// carries an augmentation seed.
SliceImage render_row(const Volume& v, const ManifestRow& row, const SamplingSpec& spec);

/// Writes images/<id>_NNNNNN.pgm, manifest.csv and spec.json under out_dir.
/// A `.partial` marker exists in out_dir until every file is written; a
/// failed run leaves it in place and throws IoError.
DatasetManifest generate_dataset(const Volume& v, const SamplingSpec& spec,
                                 const std::filesystem::path& out_dir, int threads = 1);

}  // namespace planepose
