#include "planepose/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <unordered_map>

#include "planepose/error.hpp"
#include "planepose/pose_io.hpp"
#include "planepose/util.hpp"

namespace planepose {

namespace fs = std::filesystem;

ErrorRecord plane_errors(const Pose6D& gt, const Pose6D& pred, double scale_mm_per_norm) {
  if (!(scale_mm_per_norm > 0.0)) throw Error(ErrorKind::InvalidArgument, "scale must be > 0");
  ErrorRecord r;
  r.translation_mm = (gt.t() - pred.t()).norm() * scale_mm_per_norm;
  r.rotation_deg = geodesic_deg(gt.rotation(), pred.rotation());
  return r;
}

Summary summarize(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorKind::EmptySet, "no values to summarize");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  Summary s;
  s.median = n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(n);
  double sq = 0.0;
  for (double x : v) sq += (x - s.mean) * (x - s.mean);
  s.sd = std::sqrt(sq / static_cast<double>(n));
  s.min = v.front();
  s.max = v.back();
  return s;
}

FoldReport distribution_stats(std::span<const ErrorRecord> records, std::string fold_id) {
  if (records.empty()) throw Error(ErrorKind::EmptySet, "no error records");
  std::vector<double> t, r;
  for (const auto& rec : records) {
    t.push_back(rec.translation_mm);
    r.push_back(rec.rotation_deg);
  }
  FoldReport f;
  f.fold_id = std::move(fold_id);
  f.n = records.size();
  f.translation = summarize(t);
  f.rotation = summarize(r);
  return f;
}

namespace {

Summary mean_of(std::span<const FoldReport> folds, Summary FoldReport::*field) {
  Summary s;
  for (const auto& f : folds) {
    const Summary& x = f.*field;
    s.median += x.median;
    s.mean += x.mean;
    s.sd += x.sd;
    s.min += x.min;
    s.max += x.max;
  }
  const double k = static_cast<double>(folds.size());
  s.median /= k;
  s.mean /= k;
  s.sd /= k;
  s.min /= k;
  s.max /= k;
  return s;
}

}  // namespace

FoldReport loocv_aggregate(std::span<const FoldReport> folds) {
  if (folds.empty()) throw Error(ErrorKind::EmptySet, "no folds to aggregate");
  FoldReport out;
  out.fold_id = "fold mean";
  for (const auto& f : folds) out.n += f.n;
  out.translation = mean_of(folds, &FoldReport::translation);
  out.rotation = mean_of(folds, &FoldReport::rotation);
  return out;
}

FoldReport pooled_aggregate(std::span<const std::vector<ErrorRecord>> folds) {
  std::vector<ErrorRecord> all;
  for (const auto& f : folds) all.insert(all.end(), f.begin(), f.end());
  return distribution_stats(all, "pooled");
}

PoseSetStats sp_variance_report(std::span<const Pose6D> sp_poses, double scale_mm_per_norm) {
  if (sp_poses.size() < 2) throw Error(ErrorKind::EmptySet, "need at least two standard planes");
  return pose_set_stats(sp_poses, scale_mm_per_norm);
}

std::string render_sp_variance_table(const std::map<std::string, PoseSetStats>& groups) {
  std::string out = "| Group | N | RMS translation (mm) | RMS rotation (deg) |\n|---|---|---|---|\n";
  char buf[256];
  for (const auto& [name, s] : groups) {
    std::snprintf(buf, sizeof buf, "| %s | %zu | %.3f | %.3f |\n", name.c_str(),
                  s.per_item_translation_dist.size(), s.rms_translation, s.rms_rotation_deg);
    out += buf;
  }
  return out;
}

namespace {

std::string summary_cells(const Summary& s) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%.2f | %.2f±%.2f | %.2f | %.2f", s.median, s.mean, s.sd, s.min,
                s.max);
  return buf;
}

std::string summary_csv(const Summary& s) {
  char buf[200];
  std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f,%.6f,%.6f", s.median, s.mean, s.sd, s.min, s.max);
  return buf;
}

}  // namespace

std::string render_fold_table(std::span<const FoldReport> folds) {
  std::string out =
      "| Test Volume | Translation Median [mm] | Mean±SD | Min | Max | Rotation Median [deg] | "
      "Mean±SD | Min | Max |\n|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& f : folds) {
    out += "| " + f.fold_id + " | " + summary_cells(f.translation) + " | " +
           summary_cells(f.rotation) + " |\n";
  }
  return out;
}

std::string fold_report_csv(std::span<const FoldReport> folds) {
  std::string out =
      "fold,n,t_median,t_mean,t_sd,t_min,t_max,r_median,r_mean,r_sd,r_min,r_max\n";
  for (const auto& f : folds) {
    out += f.fold_id + "," + std::to_string(f.n) + "," + summary_csv(f.translation) + "," +
           summary_csv(f.rotation) + "\n";
  }
  return out;
}

EvaluationInput join_predictions(const DatasetManifest& gt, const fs::path& pred_csv,
                                 double scale_mm_per_norm) {
  const CsvTable pred = read_csv(pred_csv);
  const std::size_t c_path = pred.column("path"), c_tx = pred.column("tx"),
                    c_status = pred.column("status");
  std::unordered_map<std::string, const std::vector<std::string>*> by_path;
  for (const auto& r : pred.rows) by_path[r[c_path]] = &r;

  EvaluationInput in;
  for (const auto& row : gt.rows) {
    const auto it = by_path.find(row.path);
    if (it == by_path.end()) {
      ++in.missing;
      continue;
    }
    const auto& r = *it->second;
    if (r[c_status] != "ok") {
      ++in.failed;
      continue;
    }
    ErrorRecord rec = plane_errors(row.pose, pose_from_csv(std::span(r).subspan(c_tx, 7)),
                                   scale_mm_per_norm);
    rec.row_id = row.path;
    rec.category = to_string(row.category);
    in.records.push_back(std::move(rec));
  }
  return in;
}

void write_evaluation_report(const fs::path& gt_csv, const fs::path& pred_csv,
                             double scale_mm_per_norm, const fs::path& out_dir) {
  const DatasetManifest gt = read_manifest(gt_csv);
  const EvaluationInput in = join_predictions(gt, pred_csv, scale_mm_per_norm);
  if (in.records.empty()) throw Error(ErrorKind::EmptySet, "no scorable predictions");
  fs::create_directories(out_dir);

  std::string errors = "path,category,translation_mm,rotation_deg\n";
  char buf[128];
  for (const auto& r : in.records) {
    std::snprintf(buf, sizeof buf, "%.6f,%.6f", r.translation_mm, r.rotation_deg);
    errors += r.row_id + "," + r.category + "," + buf + "\n";
  }
  write_file_atomic(out_dir / "errors.csv", errors);

  std::vector<FoldReport> groups{distribution_stats(in.records, "all")};
  for (const char* cat : {"random", "near_sp"}) {
    std::vector<ErrorRecord> sub;
    std::copy_if(in.records.begin(), in.records.end(), std::back_inserter(sub),
                 [&](const ErrorRecord& r) { return r.category == cat; });
    if (!sub.empty()) groups.push_back(distribution_stats(sub, cat));
  }
  write_file_atomic(out_dir / "summary.csv", fold_report_csv(groups));

  std::string md = "# Pose error report\n\n";
  md += "- ground truth: `" + gt_csv.filename().string() + "` fnv1a64 " + file_hash(gt_csv) + "\n";
  md += "- predictions: `" + pred_csv.filename().string() + "` fnv1a64 " + file_hash(pred_csv) + "\n";
  std::snprintf(buf, sizeof buf, "%.6g", scale_mm_per_norm);
  md += std::string("- scale: ") + buf + " mm per normalized unit\n";
  md += "- scored rows: " + std::to_string(in.records.size()) + ", failed: " +
        std::to_string(in.failed) + ", missing: " + std::to_string(in.missing) + "\n";
  md += "- SD is the population standard deviation\n\n";
  md += render_fold_table(groups);
  write_file_atomic(out_dir / "report.md", md);
}

}  // namespace planepose
