#include "planepose/pose.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/SVD>

#include "planepose/error.hpp"

namespace planepose {

namespace {


}  // namespace

RotationMatrix::RotationMatrix(const Mat3& m, double tol) : m_(m) {
  if (!m.allFinite()) throw Error(ErrorKind::InvalidRotation, "non-finite matrix");
  const double ortho = (m.transpose() * m - Mat3::Identity()).cwiseAbs().maxCoeff();
  const double det = m.determinant();
  if (ortho > tol || std::abs(det - 1.0) > tol) {
    throw Error(ErrorKind::InvalidRotation, "orthonormality error " + std::to_string(ortho) +
                                                ", det " + std::to_string(det));
  }
}

RotationMatrix RotationMatrix::from_quaternion(const Quat& q) {
  return RotationMatrix(q.normalized().toRotationMatrix(), Unchecked{});
}

RotationMatrix RotationMatrix::axis_angle(const Vec3& axis, double angle_rad) {
  const double n = axis.norm();
  if (!(n > 0.0)) return RotationMatrix();
  return RotationMatrix(Eigen::AngleAxisd(angle_rad, axis / n).toRotationMatrix(), Unchecked{});
}

Quat RotationMatrix::to_quaternion() const { return canonical_quaternion(Quat(m_)); }

Quat canonical_quaternion(const Quat& q) {
  const double w = q.w(), x = q.x(), y = q.y(), z = q.z();
  bool flip = w < 0.0;
  if (w == 0.0) {
    const double first = x != 0.0 ? x : (y != 0.0 ? y : z);
    flip = first < 0.0;
  }
  return flip ? Quat(-w, -x, -y, -z) : q;
}

Pose6D::Pose6D(const Vec3& t, const Quat& q) : t_(t) {
  const double n = q.norm();
  if (!t.allFinite() || !std::isfinite(n) || n == 0.0) {
    throw Error(ErrorKind::InvalidArgument, "pose needs finite t and a nonzero finite quaternion");
  }
  // already-unit input is kept bit-for-bit so that serialization round trips exactly
  q_ = canonical_quaternion(std::abs(n - 1.0) <= 4e-16 ? q : Quat(q.coeffs() / n));
}

Pose6D::Pose6D(const Vec3& t, const RotationMatrix& r) : Pose6D(t, Quat(r.matrix())) {}

RotationMatrix rot6d_to_matrix(const Rot6D& r) {
  const Vec3 a1 = r.first();
  const Vec3 a2 = r.second();
  if (!r.r.allFinite()) throw Error(ErrorKind::DegenerateInput, "non-finite 6D vector");
  const double n1 = a1.norm();
  const double n2 = a2.norm();
  if (n1 < 1e-12 || n2 < 1e-12) throw Error(ErrorKind::DegenerateInput, "zero column");
  // angle between columns must exceed 1e-6 rad
  const double sin_angle = a1.cross(a2).norm() / (n1 * n2);
  if (sin_angle <= std::sin(1e-6)) throw Error(ErrorKind::DegenerateInput, "parallel columns");

  const Vec3 b1 = a1 / n1;
  const Vec3 b2 = (a2 - b1.dot(a2) * b1).normalized();
  const Vec3 b3 = b1.cross(b2);
  Mat3 m;
  m << b1, b2, b3;
  return RotationMatrix::trusted(m);
}

Rot6D matrix_to_rot6d(const RotationMatrix& r) {
  // revalidate: a trusted matrix may have drifted
  const RotationMatrix checked(r.matrix());
  Rot6D out;
  out.r << checked.matrix().col(0), checked.matrix().col(1);
  return out;
}

double geodesic_deg(const RotationMatrix& a, const RotationMatrix& b) {
  // acos((tr - 1) / 2) written as atan2(sin, cos): same angle, no precision loss near 0 and 180
  const Mat3 rel = a.matrix().transpose() * b.matrix();
  const Vec3 s(rel(2, 1) - rel(1, 2), rel(0, 2) - rel(2, 0), rel(1, 0) - rel(0, 1));
  return rad2deg(std::atan2(0.5 * s.norm(), 0.5 * (rel.trace() - 1.0)));
}

double quaternion_angle_deg(const Quat& qa, const Quat& qb) {
  if (std::abs(qa.norm() - 1.0) > 1e-6 || std::abs(qb.norm() - 1.0) > 1e-6) {
    throw Error(ErrorKind::NotUnit, "quaternion norm deviates from 1 by more than 1e-6");
  }
  const Quat rel = qa.conjugate() * qb;
  return rad2deg(2.0 * std::atan2(rel.vec().norm(), std::abs(rel.w())));
}

TranslationStats translation_stats(std::span<const Vec3> points) {
  if (points.empty()) throw Error(ErrorKind::EmptySet, "translation_stats on empty set");
  TranslationStats out;
  for (const auto& p : points) out.centroid += p;
  out.centroid /= static_cast<double>(points.size());
  double sq = 0.0;
  out.distances.reserve(points.size());
  for (const auto& p : points) {
    const double d = (p - out.centroid).norm();
    out.distances.push_back(d);
    sq += d * d;
  }
  out.rms = std::sqrt(sq / static_cast<double>(points.size()));
  return out;
}

double chordal_cost(std::span<const RotationMatrix> rotations, const RotationMatrix& candidate) {
  double cost = 0.0;
  for (const auto& r : rotations) cost += (r.matrix() - candidate.matrix()).squaredNorm();
  return cost;
}

RotationMatrix chordal_mean(std::span<const RotationMatrix> rotations) {
  if (rotations.empty()) throw Error(ErrorKind::EmptySet, "chordal_mean on empty set");
  Mat3 sum = Mat3::Zero();
  for (const auto& r : rotations) sum += r.matrix();

  Eigen::JacobiSVD<Mat3> svd(sum, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat3& u = svd.matrixU();
  const Mat3& v = svd.matrixV();
  const Vec3 sigma = svd.singularValues();
  const double det = (u * v.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  if (sigma(1) + sigma(2) * det < 1e-12) {
    throw Error(ErrorKind::Degenerate, "summed rotations are rank-deficient; mean is ambiguous");
  }
  const Mat3 rc = u * Vec3(1.0, 1.0, det).asDiagonal() * v.transpose();
  return RotationMatrix::trusted(rc);
}

RotationStats rotation_stats(std::span<const RotationMatrix> rotations) {
  RotationStats out;
  out.mean = chordal_mean(rotations);
  double sq = 0.0;
  out.distances_deg.reserve(rotations.size());
  for (const auto& r : rotations) {
    const double d = geodesic_deg(r, out.mean);
    out.distances_deg.push_back(d);
    sq += d * d;
  }
  out.rms_deg = std::sqrt(sq / static_cast<double>(rotations.size()));
  return out;
}

PoseSetStats pose_set_stats(std::span<const Pose6D> poses, double translation_scale) {
  std::vector<Vec3> points;
  std::vector<RotationMatrix> rotations;
  points.reserve(poses.size());
  rotations.reserve(poses.size());
  for (const auto& p : poses) {
    points.push_back(p.t() * translation_scale);
    rotations.push_back(p.rotation());
  }
  const auto ts = translation_stats(points);
  const auto rs = rotation_stats(rotations);
  PoseSetStats out;
  out.centroid = ts.centroid;
  out.rms_translation = ts.rms;
  out.per_item_translation_dist = ts.distances;
  out.mean_rotation = rs.mean;
  out.rms_rotation_deg = rs.rms_deg;
  out.per_item_rotation_dist_deg = rs.distances_deg;
  return out;
}

Pose6D pose_compose(const Pose6D& a, const Pose6D& b) {
  return Pose6D(a.t() + a.q() * b.t(), a.q() * b.q());
}

Pose6D pose_inverse(const Pose6D& p) {
  const Quat inv = p.q().conjugate();
  return Pose6D(-(inv * p.t()), inv);
}

Vec3 pose_apply_point(const Pose6D& p, const Vec3& x) { return p.t() + p.q() * x; }

}  // namespace planepose
