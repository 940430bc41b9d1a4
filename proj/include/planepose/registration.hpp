#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "planepose/pose.hpp"
#include "planepose/volume.hpp"

namespace planepose {

/// y = s·R·x + t, mapping moving-volume millimetres to fixed-volume millimetres.
struct SimilarityTransform {
  RotationMatrix rotation;
  Vec3 t_mm = Vec3::Zero();
  double scale = 1.0;

  Vec3 apply(const Vec3& x) const { return scale * (rotation * x) + t_mm; }
  SimilarityTransform inverse() const;
  /// (a ∘ b)(x) = a(b(x))
  friend SimilarityTransform operator*(const SimilarityTransform& a, const SimilarityTransform& b);
};

nlohmann::json similarity_to_json(const SimilarityTransform& t);
SimilarityTransform similarity_from_json(const nlohmann::json& j);

/// Least-squares similarity (Umeyama) between paired points.
/// Throws TooFewPoints below 3 pairs, Collinear when the cross-covariance's
/// second singular value is below 1e-9 of the largest.
SimilarityTransform fit_similarity_points(std::span<const Vec3> src, std::span<const Vec3> dst);

/// Pairs landmarks by label and fits src → dst.
SimilarityTransform fit_similarity_landmarks(const Landmarks& src, const Landmarks& dst);

/// RMS of ‖T(src_i) − dst_i‖ in mm. Both sets must carry the same labels
/// (LabelMismatch otherwise).
double landmark_rms(const SimilarityTransform& t, const Landmarks& src, const Landmarks& dst);

/// Mean squared intensity difference between the fixed volume and the
/// moving volume pulled back through T, over a deterministic stride
/// subsample of the masked fixed voxels (stride = ceil(count / max_samples)).
class MaskedMsdObjective {
 public:
  MaskedMsdObjective(const Volume& moving, const Volume& fixed,
                     std::span<const std::uint8_t> mask, std::size_t max_samples = 200000);

  double operator()(const SimilarityTransform& t) const;

  std::size_t stride() const { return stride_; }
  std::size_t sample_count() const { return fixed_values_.size(); }

 private:
  const Volume* moving_;
  std::size_t stride_ = 1;
  std::vector<Vec3> fixed_points_mm_;
  std::vector<double> fixed_values_;
};

struct RefineOptions {
  int max_iters = 500;
  double x_tol = 1e-6;
  double rot_step_deg = 2.0;
  double t_step_mm = 2.0;
  double log_scale_step = 0.02;
  std::size_t max_samples = 200000;
};

struct RefineResult {
  SimilarityTransform transform;
  double initial_objective = 0.0;
  double final_objective = 0.0;
  int iterations = 0;
  std::size_t stride = 1;
};

/// Nelder–Mead over (axis-angle increment, translation mm, log scale), with
/// rotation and scale increments applied about the fixed volume's centre.
/// The objective at the result never exceeds the objective at `init`.
/// Throws EmptyMask if the mask selects nothing.
RefineResult refine_similarity_masked(const Volume& moving, const Volume& fixed,
                                      const SimilarityTransform& init,
                                      std::span<const std::uint8_t> mask,
                                      const RefineOptions& opts = {});

/// Resamples `src` so that out(x) = src(T(x)); the result registers back
/// onto `src` with transform T. Mask is carried along (nearest).
Volume warp_volume(const Volume& src, const SimilarityTransform& t);

/// One comparison row: landmark RMS in mm before and after each method.
struct RegistrationRow {
  std::string volume;
  std::optional<double> initial;
  std::optional<double> automatic;
  std::optional<double> mask;
  std::optional<double> fid_mask;
  std::optional<double> score_automatic;
  std::optional<double> score_mask;
  std::optional<double> score_fid_mask;
};

/// Markdown comparison table, two decimals, blank cells for missing values.
std::string render_registration_table(std::span<const RegistrationRow> rows);

}  // namespace planepose
