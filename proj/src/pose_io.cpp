#include "planepose/pose_io.hpp"

#include <charconv>
#include <cstdio>
#include <vector>

#include "planepose/error.hpp"

namespace planepose {

using nlohmann::json;

json pose_to_json(const Pose6D& p) {
  const auto& t = p.t();
  const auto& q = p.q();
  return json{{"t", {t.x(), t.y(), t.z()}}, {"q", {q.w(), q.x(), q.y(), q.z()}}};
}

Pose6D pose_from_json(const json& j) {
  try {
    const auto& t = j.at("t");
    const auto& q = j.at("q");
    if (t.size() != 3 || q.size() != 4) throw Error(ErrorKind::FormatError, "pose arity");
    return Pose6D(Vec3(t[0].get<double>(), t[1].get<double>(), t[2].get<double>()),
                  Quat(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(),
                       q[3].get<double>()));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::FormatError, std::string("pose json: ") + e.what());
  }
}

std::string pose_to_csv(const Pose6D& p) {
  const auto& t = p.t();
  const auto& q = p.q();
  char buf[256];
  std::snprintf(buf, sizeof buf, "%.7f,%.7f,%.7f,%.7f,%.7f,%.7f,%.7f", t.x(), t.y(), t.z(), q.w(),
                q.x(), q.y(), q.z());
  return buf;
}

double parse_double(std::string_view s) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw Error(ErrorKind::FormatError, "not a number: '" + std::string(s) + "'");
  }
  return v;
}

Pose6D pose_from_csv(std::span<const std::string> fields) {
  if (fields.size() != 7) throw Error(ErrorKind::FormatError, "pose needs 7 csv fields");
  double v[7];
  for (int i = 0; i < 7; ++i) v[i] = parse_double(fields[i]);
  return Pose6D(Vec3(v[0], v[1], v[2]), Quat(v[3], v[4], v[5], v[6]));
}

namespace {

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.push_back(line.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return fields;
}

}  // namespace

Pose6D snap_to_csv_precision(const Pose6D& p) {
  // Parsing renormalizes q, which can move the 7th digit; iterate to a pose
  // whose text form parses back to itself.
  Pose6D cur = p;
  for (int i = 0; i < 16; ++i) {
    const std::string text = pose_to_csv(cur);
    const Pose6D next = pose_from_csv(split_commas(text));
    if (pose_to_csv(next) == text) return next;
    cur = next;
  }
  return cur;
}

Vec3 to_euler_xyz_deg(const RotationMatrix& r) {
  const Vec3 a = r.matrix().eulerAngles(0, 1, 2);
  return Vec3(rad2deg(a.x()), rad2deg(a.y()), rad2deg(a.z()));
}

RotationMatrix from_euler_xyz_deg(const Vec3& angles_deg) {
  return RotationMatrix::rx_deg(angles_deg.x()) * RotationMatrix::ry_deg(angles_deg.y()) *
         RotationMatrix::rz_deg(angles_deg.z());
}

}  // namespace planepose
