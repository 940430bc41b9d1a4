#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "planepose/pose.hpp"
#include "planepose/sampler.hpp"
#include "planepose/slicer.hpp"
#include "planepose/volume.hpp"

namespace planepose {

enum class Metric { Ncc, Msd };
const char* to_string(Metric m);
Metric metric_from_string(const std::string& s);

/// How starting poses are chosen.
///  AroundInit: start 0 is the init pose, the rest are init perturbed within
///              the init spreads.
///  Uniform:    uniform t in the search range, uniform rotation.
///  Screened:   `screen_candidates` uniform draws scored at the coarsest
///              level; the best n_starts become starts.
enum class StartMode { AroundInit, Uniform, Screened };
const char* to_string(StartMode m);
StartMode start_mode_from_string(const std::string& s);

struct RecoveryConfig {
  int n_starts = 32;
  Metric metric = Metric::Ncc;
  int max_iters = 300;          // per start and per resolution level
  double param_tol = 1e-4;      // simplex size (radians / normalized units)
  std::array<Interval, 3> t_search_range = {{{-0.35, 0.35}, {-0.35, 0.35}, {-0.35, 0.35}}};
  StartMode rot_search_mode = StartMode::Screened;
  std::optional<Pose6D> init;
  double init_t_spread = 0.05;
  double init_rot_spread_deg = 5.0;
  int screen_candidates = 20000;
  std::vector<int> levels = {32, 64, 128};  // image sizes, coarse to fine
  std::uint64_t seed = 0;
  double side_norm = kDefaultSideNorm;
  int threads = 1;

  void validate() const;
};

struct StartOutcome {
  Pose6D start;
  Pose6D pose;
  double score = 0.0;  // full-resolution similarity at `pose`
  int iterations = 0;
  /// Best similarity after each optimizer iteration, one list per level.
  std::vector<std::vector<double>> score_history;
};

struct RecoveryResult {
  Pose6D pose;
  double score = 0.0;
  /// The other member of the in-plane flip pair (plane turned over about its
  /// x axis) and its score; `pose` is whichever of the two scores higher.
  Pose6D flipped_pose;
  double flipped_score = 0.0;
  std::size_t best_start = 0;
  std::vector<StartOutcome> starts;
};

/// pose ∘ Rx(180°): same plane, mirrored image.
Pose6D flip_pose(const Pose6D& p);

/// Normalized cross-correlation of two equally sized rasters; 0 when either
/// is constant.
double ncc(std::span<const double> a, std::span<const double> b);

/// Optimization-based slice-to-volume pose estimation. Holds a resolution
/// pyramid of the volume; reusable across images and thread-safe for
/// concurrent recover() calls.
class PoseRecoverer {
 public:
  PoseRecoverer(const Volume& v, RecoveryConfig cfg);

  /// Throws FlatImage for a zero-variance image under NCC and
  /// InvalidArgument unless the image is 128×128.
  RecoveryResult recover(const GrayImage& img) const;
  RecoveryResult recover(const GrayImage& img, const RecoveryConfig& cfg) const;

  /// Full-resolution similarity (higher is better: NCC, or −MSD).
  double score(const GrayImage& img, const Pose6D& pose) const;

  const RecoveryConfig& config() const { return cfg_; }

 private:
  struct Level {
    const Volume* volume;
    double factor;  // fine voxels per level voxel
  };
  struct Target;

  void render(const Pose6D& pose, int n, std::span<double> out) const;
  double objective(const Target& t, const Pose6D& pose, std::span<double> scratch) const;
  Target make_target(const GrayImage& img, int n, Metric metric) const;
  StartOutcome run_start(const std::vector<Target>& targets, const Target& full,
                         const Pose6D& start, const RecoveryConfig& cfg) const;
  std::vector<Pose6D> choose_starts(const std::vector<Target>& targets,
                                    const RecoveryConfig& cfg) const;

  const Volume* volume_;
  RecoveryConfig cfg_;
  std::vector<Volume> pyramid_;  // 2×, 4×, ... averaged copies
};

/// Single-shot convenience wrapper.
RecoveryResult recover_pose(const SliceImage& img, const Volume& v, const RecoveryConfig& cfg);

struct BatchRecoveryOptions {
  /// Seed starts from each row's manifest pose, perturbed by up to these
  /// amounts (uniform per-axis translation, random-axis rotation).
  bool init_from_row_pose = false;
  double init_perturb_t = 0.0;
  double init_perturb_rot_deg = 0.0;
};

struct BatchRecoveryRow {
  std::size_t row = 0;
  std::optional<RecoveryResult> result;
  std::string error;  // set when the row failed
};

/// Recovers every manifest row's pose from its stored image (paths relative
/// to dataset_dir). Order-preserving; a failing row is reported, not thrown.
std::vector<BatchRecoveryRow> recover_pose_batch(const DatasetManifest& manifest,
                                                 const std::filesystem::path& dataset_dir,
                                                 const Volume& v, const RecoveryConfig& cfg,
                                                 const BatchRecoveryOptions& opts = {});

inline constexpr const char* kPredictionsHeader =
    "path,volume_id,tx,ty,tz,qw,qx,qy,qz,category,aug_seed,score,status";

/// Predictions CSV: manifest columns carrying the predicted pose, plus score
/// and status ("ok" or "failed: ...").
std::string predictions_to_csv(const DatasetManifest& manifest,
                               std::span<const BatchRecoveryRow> rows);

/// Averages 2×2×2 blocks; odd trailing slices are dropped.
Volume downsample2(const Volume& v);

}  // namespace planepose
