#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace planepose {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;
using Vec6 = Eigen::Matrix<double, 6, 1>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
inline constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

/// A proper rotation. Construction from an arbitrary matrix validates
/// RᵀR = I and det R = +1 within the given tolerance.
class RotationMatrix {
 public:
  RotationMatrix() : m_(Mat3::Identity()) {}
  explicit RotationMatrix(const Mat3& m, double tol = 1e-6);

  /// Wraps a matrix the caller already knows to be a rotation (built from
  /// orthonormal factors); skips validation.
  static RotationMatrix trusted(const Mat3& m) { return RotationMatrix(m, Unchecked{}); }
  static RotationMatrix from_quaternion(const Quat& q);
  static RotationMatrix axis_angle(const Vec3& axis, double angle_rad);
  static RotationMatrix rx_deg(double deg) { return axis_angle(Vec3::UnitX(), deg2rad(deg)); }
  static RotationMatrix ry_deg(double deg) { return axis_angle(Vec3::UnitY(), deg2rad(deg)); }
  static RotationMatrix rz_deg(double deg) { return axis_angle(Vec3::UnitZ(), deg2rad(deg)); }

  const Mat3& matrix() const { return m_; }
  double operator()(int r, int c) const { return m_(r, c); }

  RotationMatrix transpose() const { return RotationMatrix(m_.transpose(), Unchecked{}); }
  RotationMatrix operator*(const RotationMatrix& other) const {
    return RotationMatrix(m_ * other.m_, Unchecked{});
  }
  Vec3 operator*(const Vec3& v) const { return m_ * v; }

  Quat to_quaternion() const;

 private:
  struct Unchecked {};
  RotationMatrix(const Mat3& m, Unchecked) : m_(m) {}

  Mat3 m_;
};

/// Continuous 6-parameter rotation encoding: two (not necessarily
/// orthonormal) columns of a rotation matrix, stacked.
struct Rot6D {
  Vec6 r = Vec6::Zero();

  Vec3 first() const { return r.head<3>(); }
  Vec3 second() const { return r.tail<3>(); }
};

/// Returns the canonical representative of ±q: w >= 0, and if w == 0 the
/// first nonzero of (x, y, z) is positive.
Quat canonical_quaternion(const Quat& q);

/// Plane pose relative to the volume centre: x_volume = t + R x_plane.
/// t is in normalized volume coordinates; q is kept unit and canonical.
class Pose6D {
 public:
  Pose6D() : t_(Vec3::Zero()), q_(Quat::Identity()) {}
  Pose6D(const Vec3& t, const Quat& q);
  Pose6D(const Vec3& t, const RotationMatrix& r);

  static Pose6D identity() { return {}; }

  const Vec3& t() const { return t_; }
  const Quat& q() const { return q_; }
  RotationMatrix rotation() const { return RotationMatrix::from_quaternion(q_); }

  friend bool operator==(const Pose6D& a, const Pose6D& b) {
    return a.t_ == b.t_ && a.q_.coeffs() == b.q_.coeffs();
  }

 private:
  Vec3 t_;
  Quat q_;
};

RotationMatrix rot6d_to_matrix(const Rot6D& r);
Rot6D matrix_to_rot6d(const RotationMatrix& r);

/// Angle of Ra⁻¹Rb in degrees, from the trace.
double geodesic_deg(const RotationMatrix& a, const RotationMatrix& b);

/// 2·acos(|s|) with s the scalar part of qa⁻¹·qb, in degrees.
double quaternion_angle_deg(const Quat& qa, const Quat& qb);

struct TranslationStats {
  Vec3 centroid = Vec3::Zero();
  std::vector<double> distances;
  double rms = 0.0;
};

TranslationStats translation_stats(std::span<const Vec3> points);

/// Sum of squared Frobenius distances from `candidate` to every rotation.
double chordal_cost(std::span<const RotationMatrix> rotations, const RotationMatrix& candidate);

/// Closed-form chordal L2 mean: SVD projection of the summed matrices onto SO(3).
RotationMatrix chordal_mean(std::span<const RotationMatrix> rotations);

struct RotationStats {
  RotationMatrix mean;
  std::vector<double> distances_deg;
  double rms_deg = 0.0;
};

RotationStats rotation_stats(std::span<const RotationMatrix> rotations);

struct PoseSetStats {
  Vec3 centroid = Vec3::Zero();
  double rms_translation = 0.0;
  RotationMatrix mean_rotation;
  double rms_rotation_deg = 0.0;
  std::vector<double> per_item_translation_dist;
  std::vector<double> per_item_rotation_dist_deg;
};

/// Centroid/RMS and chordal-mean/RMS statistics of a pose set. Translations
/// are multiplied by `translation_scale` first (e.g. mm per normalized unit).
PoseSetStats pose_set_stats(std::span<const Pose6D> poses, double translation_scale = 1.0);

Pose6D pose_compose(const Pose6D& a, const Pose6D& b);
Pose6D pose_inverse(const Pose6D& p);
Vec3 pose_apply_point(const Pose6D& p, const Vec3& x);

}  // namespace planepose
