#pragma once

#include <filesystem>
#include <optional>
#include <random>
#include <string>

#include "planepose/error.hpp"
#include "planepose/pose.hpp"

namespace testutil {

namespace fs = std::filesystem;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = fs::temp_directory_path() /
            ("planepose_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& s) const { return path_ / s; }

 private:
  fs::path path_;
};

inline planepose::Quat random_quat(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  planepose::Quat q(g(rng), g(rng), g(rng), g(rng));
  q.normalize();
  return q;
}

inline planepose::RotationMatrix random_rotation(std::mt19937_64& rng) {
  return planepose::RotationMatrix::from_quaternion(random_quat(rng));
}

inline planepose::Pose6D random_pose(std::mt19937_64& rng, double t_scale = 0.5) {
  std::uniform_real_distribution<double> u(-t_scale, t_scale);
  return planepose::Pose6D(planepose::Vec3(u(rng), u(rng), u(rng)), random_quat(rng));
}

inline std::string fixture(const std::string& name) {
  return std::string(PLANEPOSE_FIXTURES) + "/" + name;
}

/// Kind of the planepose::Error thrown by f, or nullopt if nothing is thrown.
template <class F>
std::optional<planepose::ErrorKind> error_kind(F&& f) {
  try {
    f();
  } catch (const planepose::Error& e) {
    return e.kind();
  }
  return std::nullopt;
}

}  // namespace testutil
