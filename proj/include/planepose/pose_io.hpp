#pragma once

#include <span>
#include <string>
#include <string_view>

#include <json.hpp>

#include "planepose/pose.hpp"

namespace planepose {

/// {"t":[tx,ty,tz],"q":[w,x,y,z]} at full double precision.
nlohmann::json pose_to_json(const Pose6D& p);
Pose6D pose_from_json(const nlohmann::json& j);

/// "tx,ty,tz,qw,qx,qy,qz" with 7 decimal digits.
std::string pose_to_csv(const Pose6D& p);
/// Parses the seven numeric fields written by pose_to_csv.
Pose6D pose_from_csv(std::span<const std::string> fields);

/// The pose a CSV reader reconstructs from pose_to_csv(p). Anything that is
/// persisted as CSV and later re-rendered must be rendered from this pose.
Pose6D snap_to_csv_precision(const Pose6D& p);

/// Intrinsic x-y-z Euler angles in degrees: R = Rx(a)·Ry(b)·Rz(c).
Vec3 to_euler_xyz_deg(const RotationMatrix& r);
RotationMatrix from_euler_xyz_deg(const Vec3& angles_deg);

/// Strict decimal parse; throws FormatError on trailing garbage.
double parse_double(std::string_view s);

}  // namespace planepose
