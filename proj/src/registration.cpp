#include "planepose/registration.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include <Eigen/SVD>

#include "planepose/error.hpp"
#include "planepose/nelder_mead.hpp"

namespace planepose {

using nlohmann::json;

SimilarityTransform SimilarityTransform::inverse() const {
  SimilarityTransform inv;
  inv.rotation = rotation.transpose();
  inv.scale = 1.0 / scale;
  inv.t_mm = -(inv.rotation * t_mm) / scale;
  return inv;
}

SimilarityTransform operator*(const SimilarityTransform& a, const SimilarityTransform& b) {
  SimilarityTransform out;
  out.rotation = a.rotation * b.rotation;
  out.scale = a.scale * b.scale;
  out.t_mm = a.apply(b.t_mm);
  return out;
}

json similarity_to_json(const SimilarityTransform& t) {
  json r = json::array();
  for (int i = 0; i < 3; ++i) r.push_back({t.rotation(i, 0), t.rotation(i, 1), t.rotation(i, 2)});
  return json{{"R", r}, {"t_mm", {t.t_mm.x(), t.t_mm.y(), t.t_mm.z()}}, {"s", t.scale}};
}

SimilarityTransform similarity_from_json(const json& j) {
  try {
    Mat3 m;
    for (int i = 0; i < 3; ++i) {
      for (int k = 0; k < 3; ++k) m(i, k) = j.at("R").at(i).at(k).get<double>();
    }
    SimilarityTransform t;
    t.rotation = RotationMatrix(m);
    const auto& tj = j.at("t_mm");
    t.t_mm = Vec3(tj.at(0).get<double>(), tj.at(1).get<double>(), tj.at(2).get<double>());
    t.scale = j.at("s").get<double>();
    if (!(t.scale > 0.0)) throw Error(ErrorKind::FormatError, "scale must be positive");
    return t;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::FormatError, std::string("transform json: ") + e.what());
  }
}

SimilarityTransform fit_similarity_points(std::span<const Vec3> src, std::span<const Vec3> dst) {
  if (src.size() != dst.size()) throw Error(ErrorKind::InvalidArgument, "point count mismatch");
  if (src.size() < 3) throw Error(ErrorKind::TooFewPoints, "need at least 3 point pairs");
  const double n = static_cast<double>(src.size());
  Vec3 mu_x = Vec3::Zero(), mu_y = Vec3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    mu_x += src[i];
    mu_y += dst[i];
  }
  mu_x /= n;
  mu_y /= n;
  Mat3 cov = Mat3::Zero();
  double var_x = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const Vec3 dx = src[i] - mu_x;
    cov += (dst[i] - mu_y) * dx.transpose();
    var_x += dx.squaredNorm();
  }
  cov /= n;
  var_x /= n;

  Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 d = svd.singularValues();
  // rank <= 1 means the source points are collinear (or coincident)
  if (!(d(1) >= 1e-9 * d(0)) || d(0) <= 0.0) {
    throw Error(ErrorKind::Collinear, "landmarks are collinear");
  }
  const Mat3& u = svd.matrixU();
  const Mat3& v = svd.matrixV();
  const double sign = u.determinant() * v.determinant() < 0.0 ? -1.0 : 1.0;
  const Vec3 s_diag(1.0, 1.0, sign);

  SimilarityTransform out;
  out.rotation = RotationMatrix::trusted(u * s_diag.asDiagonal() * v.transpose());
  out.scale = d.dot(s_diag) / var_x;
  out.t_mm = mu_y - out.scale * (out.rotation * mu_x);
  return out;
}

SimilarityTransform fit_similarity_landmarks(const Landmarks& src, const Landmarks& dst) {
  std::vector<Vec3> a, b;
  for (const auto& p : src.points) {
    if (const Landmark* q = dst.find(p.label)) {
      a.push_back(p.mm);
      b.push_back(q->mm);
    }
  }
  return fit_similarity_points(a, b);
}

double landmark_rms(const SimilarityTransform& t, const Landmarks& src, const Landmarks& dst) {
  if (src.points.size() != dst.points.size()) {
    throw Error(ErrorKind::LabelMismatch, "landmark sets differ in size");
  }
  if (src.points.empty()) throw Error(ErrorKind::EmptySet, "no landmarks");
  double sq = 0.0;
  for (const auto& p : src.points) {
    const Landmark* q = dst.find(p.label);
    if (!q) throw Error(ErrorKind::LabelMismatch, "label " + p.label + " missing in target set");
    sq += (t.apply(p.mm) - q->mm).squaredNorm();
  }
  return std::sqrt(sq / static_cast<double>(src.points.size()));
}

MaskedMsdObjective::MaskedMsdObjective(const Volume& moving, const Volume& fixed,
                                       std::span<const std::uint8_t> mask,
                                       std::size_t max_samples)
    : moving_(&moving) {
  if (mask.size() != fixed.voxel_count()) {
    throw Error(ErrorKind::DimensionMismatch, "mask dims differ from fixed volume");
  }
  const auto count = static_cast<std::size_t>(std::count_if(
      mask.begin(), mask.end(), [](std::uint8_t m) { return m != 0; }));
  if (count == 0) throw Error(ErrorKind::EmptyMask, "registration mask selects no voxels");
  max_samples = std::max<std::size_t>(1, max_samples);
  stride_ = (count + max_samples - 1) / max_samples;

  const auto& d = fixed.dims();
  std::size_t seen = 0;
  for (int k = 0; k < d[2]; ++k) {
    for (int j = 0; j < d[1]; ++j) {
      for (int i = 0; i < d[0]; ++i) {
        const std::size_t idx = fixed.index(i, j, k);
        if (!mask[idx]) continue;
        if (seen++ % stride_ != 0) continue;
        fixed_points_mm_.push_back(fixed.voxel_to_mm(Vec3(i, j, k)));
        fixed_values_.push_back(fixed.voxels()[idx]);
      }
    }
  }
}

double MaskedMsdObjective::operator()(const SimilarityTransform& t) const {
  const SimilarityTransform inv = t.inverse();
  const Mat3 a = inv.scale * inv.rotation.matrix() / moving_->spacing_mm();
  const Vec3 b = inv.t_mm / moving_->spacing_mm();
  double sum = 0.0;
  for (std::size_t i = 0; i < fixed_values_.size(); ++i) {
    const Vec3 idx = a * fixed_points_mm_[i] + b;
    const double diff = moving_->sample_voxel(idx.x(), idx.y(), idx.z()) - fixed_values_[i];
    sum += diff * diff;
  }
  return sum / static_cast<double>(fixed_values_.size());
}

RefineResult refine_similarity_masked(const Volume& moving, const Volume& fixed,
                                      const SimilarityTransform& init,
                                      std::span<const std::uint8_t> mask,
                                      const RefineOptions& opts) {
  const MaskedMsdObjective objective(moving, fixed, mask, opts.max_samples);
  const Vec3 center = fixed.voxel_to_mm(
      Vec3((fixed.dims()[0] - 1) / 2.0, (fixed.dims()[1] - 1) / 2.0, (fixed.dims()[2] - 1) / 2.0));

  // increments act in the fixed frame about its centre:
  // T(x) = c + e^δ·Exp(ω)·(T0(x) − c) + Δt
  auto unpack = [&](std::span<const double> p) {
    const Vec3 omega(p[0], p[1], p[2]);
    const double angle = omega.norm();
    const RotationMatrix dr =
        angle > 0.0 ? RotationMatrix::axis_angle(omega / angle, angle) : RotationMatrix();
    const double ds = std::exp(p[6]);
    SimilarityTransform t;
    t.rotation = dr * init.rotation;
    t.scale = ds * init.scale;
    t.t_mm = center + ds * (dr * (init.t_mm - center)) + Vec3(p[3], p[4], p[5]);
    return t;
  };

  NelderMeadOptions nm;
  nm.max_iters = opts.max_iters;
  nm.x_tol = opts.x_tol;
  const double r = deg2rad(opts.rot_step_deg);
  nm.initial_step = {r, r, r, opts.t_step_mm, opts.t_step_mm, opts.t_step_mm, opts.log_scale_step};
  const auto f = [&](std::span<const double> p) { return objective(unpack(p)); };

  RefineResult out;
  out.stride = objective.stride();
  out.initial_objective = objective(init);
  const auto res = nelder_mead(f, std::vector<double>(7, 0.0), nm);
  out.iterations = res.iterations;
  if (res.f < out.initial_objective) {
    out.transform = unpack(res.x);
    out.final_objective = res.f;
  } else {
    out.transform = init;
    out.final_objective = out.initial_objective;
  }
  return out;
}

Volume warp_volume(const Volume& src, const SimilarityTransform& t) {
  const auto& d = src.dims();
  std::vector<std::uint8_t> vox(src.voxel_count());
  std::optional<std::vector<std::uint8_t>> mask;
  if (src.has_mask()) mask.emplace(src.voxel_count());
  for (int k = 0; k < d[2]; ++k) {
    for (int j = 0; j < d[1]; ++j) {
      for (int i = 0; i < d[0]; ++i) {
        const Vec3 y = t.apply(src.voxel_to_mm(Vec3(i, j, k)));
        const std::size_t idx = src.index(i, j, k);
        vox[idx] = static_cast<std::uint8_t>(
            std::clamp(std::floor(src.sample_mm(y) + 0.5), 0.0, 255.0));
        if (mask) {
          const Vec3 n = src.mm_to_voxel(y);
          const int ni = static_cast<int>(std::lround(n.x()));
          const int nj = static_cast<int>(std::lround(n.y()));
          const int nk = static_cast<int>(std::lround(n.z()));
          const bool inside = ni >= 0 && nj >= 0 && nk >= 0 && ni < d[0] && nj < d[1] && nk < d[2];
          (*mask)[idx] = inside ? (*src.mask())[src.index(ni, nj, nk)] : 0;
        }
      }
    }
  }
  return Volume(d, src.spacing_mm(), std::move(vox), std::move(mask), src.id() + "_warped");
}

namespace {

std::string cell(const std::optional<double>& v, const char* fmt = "%.2f") {
  if (!v) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, *v);
  return buf;
}

}  // namespace

std::string render_registration_table(std::span<const RegistrationRow> rows) {
  bool scores = false;
  for (const auto& r : rows) {
    scores = scores || r.score_automatic || r.score_mask || r.score_fid_mask;
  }
  std::string out = "| Volume | Initial RMS (mm) | Automatic | Mask | Fid + Mask |";
  std::string rule = "|---|---|---|---|---|";
  if (scores) {
    out += " Score Automatic | Score Mask | Score Fid + Mask |";
    rule += "---|---|---|";
  }
  out += "\n" + rule + "\n";
  for (const auto& r : rows) {
    out += "| " + r.volume + " | " + cell(r.initial) + " | " + cell(r.automatic) + " | " +
           cell(r.mask) + " | " + cell(r.fid_mask) + " |";
    if (scores) {
      out += " " + cell(r.score_automatic, "%g") + " | " + cell(r.score_mask, "%g") + " | " +
             cell(r.score_fid_mask, "%g") + " |";
    }
    out += "\n";
  }
  return out;
}

}  // namespace planepose
