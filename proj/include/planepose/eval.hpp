#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "planepose/pose.hpp"
#include "planepose/sampler.hpp"

namespace planepose {

struct ErrorRecord {
  std::string row_id;
  double translation_mm = 0.0;
  double rotation_deg = 0.0;
  std::string category;
};

/// Euclidean plane-origin distance (scaled to mm) and geodesic angle.
ErrorRecord plane_errors(const Pose6D& gt, const Pose6D& pred, double scale_mm_per_norm);

struct Summary {
  double median = 0.0;
  double mean = 0.0;
  double sd = 0.0;  // population SD
  double min = 0.0;
  double max = 0.0;
};

/// Median (mean of the central pair for even n), mean, population SD, min, max.
Summary summarize(std::span<const double> values);

struct FoldReport {
  std::string fold_id;
  std::size_t n = 0;
  Summary translation;
  Summary rotation;
};

FoldReport distribution_stats(std::span<const ErrorRecord> records, std::string fold_id = {});

/// Each statistic is the unweighted mean of the per-fold statistics.
FoldReport loocv_aggregate(std::span<const FoldReport> folds);

/// Alternative aggregate: statistics of all records pooled together.
FoldReport pooled_aggregate(std::span<const std::vector<ErrorRecord>> folds);

/// Translation statistics in mm (scaled) and rotation statistics in degrees
/// of a set of annotated standard-plane poses. Needs at least two poses.
PoseSetStats sp_variance_report(std::span<const Pose6D> sp_poses, double scale_mm_per_norm);

/// One row per group (e.g. registration method): RMS translation and
/// rotation variance, as a Markdown table.
std::string render_sp_variance_table(const std::map<std::string, PoseSetStats>& groups);

/// Markdown table in the layout Median | Mean±SD | Min | Max for translation
/// then rotation, two decimals.
std::string render_fold_table(std::span<const FoldReport> folds);
std::string fold_report_csv(std::span<const FoldReport> folds);

/// Joins ground-truth and prediction CSVs on `path` and computes per-row
/// errors; rows whose prediction failed are counted, not scored.
struct EvaluationInput {
  std::vector<ErrorRecord> records;
  std::size_t failed = 0;
  std::size_t missing = 0;
};

EvaluationInput join_predictions(const DatasetManifest& gt, const std::filesystem::path& pred_csv,
                                 double scale_mm_per_norm);

/// Writes errors.csv, summary.csv and report.md (with input hashes) to out_dir.
void write_evaluation_report(const std::filesystem::path& gt_csv,
                             const std::filesystem::path& pred_csv, double scale_mm_per_norm,
                             const std::filesystem::path& out_dir);

}  // namespace planepose
