#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "helpers.hpp"
#include "planepose/phantom.hpp"
#include "planepose/pose_io.hpp"
#include "planepose/sampler.hpp"
#include "planepose/util.hpp"

using namespace planepose;
using testutil::error_kind;
using testutil::TempDir;

namespace {

// One-sample Kolmogorov-Smirnov statistic against U(lo, hi).
double ks_uniform(std::vector<double> x, double lo, double hi) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = (x[i] - lo) / (hi - lo);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  return d;
}

}  // namespace

TEST_CASE("spec validation and json") {
  SamplingSpec s;
  CHECK(s.n_random + s.n_near_sp == 22029);
  CHECK_NOTHROW(s.validate());
  s.n_random = -1;
  CHECK(error_kind([&] { s.validate(); }) == ErrorKind::InvalidArgument);
  s.n_random = 3;
  s.t_range[1] = {-1.5, 0.0};
  CHECK(error_kind([&] { s.validate(); }) == ErrorKind::InvalidArgument);
  s.t_range[1] = {-0.2, 0.1};
  s.near_sp_rot_step_deg = 0;
  CHECK(error_kind([&] { s.validate(); }) == ErrorKind::InvalidArgument);
  s.near_sp_rot_step_deg = 3;
  s.seed = 0xFFFFFFFFFFFFFFFFULL;
  s.sp_pose = Pose6D(Vec3(0.1, 0.2, 0.3), Quat(0.9, 0.1, 0.2, 0.3));
  const auto back = spec_from_json(spec_to_json(s));
  CHECK(back.seed == s.seed);
  CHECK(back.n_random == 3);
  CHECK(back.t_range[1].lo == -0.2);
  CHECK(back.sp_pose == s.sp_pose);
}

TEST_CASE("random poses: zero range, KS uniformity, quaternion moments") {
  SamplingSpec zero;
  for (auto& r : zero.t_range) r = {0.0, 0.0};
  std::mt19937_64 rng(40);
  for (int i = 0; i < 100; ++i) CHECK(sample_random_pose(rng, zero).t().norm() == 0.0);

  SamplingSpec s;
  s.t_range = {{{-0.35, 0.35}, {-0.2, 0.5}, {0.0, 0.1}}};
  const int n = 100000;
  std::vector<double> xs[3];
  Eigen::Matrix4d moment = Eigen::Matrix4d::Zero();
  for (int i = 0; i < n; ++i) {
    const Pose6D p = sample_random_pose(rng, s);
    for (int a = 0; a < 3; ++a) xs[a].push_back(p.t()[a]);
    const Eigen::Vector4d q(p.q().w(), p.q().x(), p.q().y(), p.q().z());
    moment += q * q.transpose();
  }
  const double crit = 1.628 / std::sqrt(static_cast<double>(n));  // alpha = 0.01
  for (int a = 0; a < 3; ++a) CHECK(ks_uniform(xs[a], s.t_range[a].lo, s.t_range[a].hi) < crit);
  moment /= n;
  CHECK((moment - 0.25 * Eigen::Matrix4d::Identity()).cwiseAbs().maxCoeff() < 0.02);
}

TEST_CASE("near-plane poses") {
  SamplingSpec s;
  s.sp_pose = Pose6D(Vec3(0.05, -0.1, 0.02), Quat(0.3, -0.5, 0.2, 0.7));
  std::mt19937_64 rng(41);
  double max_angle = 0.0;
  for (int i = 0; i < 20000; ++i) {
    const Pose6D p = sample_near_sp_pose(rng, s);
    CHECK((p.t() - s.sp_pose.t()).cwiseAbs().maxCoeff() <= 0.001 + 1e-15);
    CHECK((p.t() - s.sp_pose.t()).norm() <= 0.001 * std::sqrt(3.0) + 1e-15);
    const double ang = geodesic_deg(p.rotation(), s.sp_pose.rotation());
    CHECK(ang <= 1.9 + 1e-9);
    max_angle = std::max(max_angle, ang);
  }
  CHECK(max_angle > 1.85);

  SamplingSpec tiny = s;
  tiny.near_sp_t_step = 1e-300;
  tiny.near_sp_rot_step_deg = 1e-300;
  const Pose6D p = sample_near_sp_pose(rng, tiny);
  CHECK((p.t() - s.sp_pose.t()).norm() == 0.0);
  CHECK(quaternion_angle_deg(p.q(), s.sp_pose.q()) < 1e-6);

  std::mt19937_64 a(42), b(42);
  for (int i = 0; i < 10; ++i) CHECK(sample_near_sp_pose(a, s) == sample_near_sp_pose(b, s));
}

TEST_CASE("manifest csv") {
  DatasetManifest m;
  m.rows.push_back({"images/a.pgm", "v", Pose6D(Vec3(0.1, 0, 0), Quat::Identity()), Category::Random, std::nullopt});
  m.rows.push_back({"images/b.pgm", "v", snap_to_csv_precision(Pose6D(Vec3(0, 0.2, 0), Quat(1, 2, 3, 4))),
                    Category::NearSp, 18446744073709551615ULL});
  const std::string csv = manifest_to_csv(m);
  CHECK(csv.rfind(std::string(kManifestHeader) + "\n", 0) == 0);
  TempDir dir("man");
  write_file_atomic(dir / "m.csv", csv);
  const auto back = read_manifest(dir / "m.csv");
  REQUIRE(back.rows.size() == 2);
  CHECK(back.rows[1].category == Category::NearSp);
  CHECK(back.rows[1].aug_seed == m.rows[1].aug_seed);
  CHECK(!back.rows[0].aug_seed);
  CHECK(back.rows[1].pose == m.rows[1].pose);
  CHECK(manifest_to_csv(back) == csv);
  CHECK(error_kind([] { category_from_string("other"); }) == ErrorKind::FormatError);
}

TEST_CASE("plan: counts, ordering, unique paths, reproducibility") {
  const Volume v = make_phantom(43, {40, 40, 40});
  SamplingSpec s;
  s.n_random = 2;
  s.n_near_sp = 1;
  s.seed = 9;
  const auto m = plan_dataset(v, s);
  REQUIRE(m.rows.size() == 3);
  CHECK(m.rows[0].category == Category::Random);
  CHECK(m.rows[2].category == Category::NearSp);
  std::set<std::string> paths;
  for (const auto& r : m.rows) paths.insert(r.path);
  CHECK(paths.size() == 3);
  CHECK(manifest_to_csv(plan_dataset(v, s)) == manifest_to_csv(m));
  s.seed = 10;
  CHECK(manifest_to_csv(plan_dataset(v, s)) != manifest_to_csv(m));
}

TEST_CASE("informative content of random slices on the default phantom") {
  const Volume v = make_phantom(44);
  SamplingSpec s;
  std::mt19937_64 rng(45);
  const int n = 400;
  int good = 0;
  for (int i = 0; i < n; ++i) {
    const auto img = extract_slice(v, sample_random_pose(rng, s));
    const auto nz = std::count_if(img.pixels.begin(), img.pixels.end(), [](auto p) { return p != 0; });
    good += nz >= 0.3 * img.pixels.size();
  }
  CHECK(good >= 0.95 * n);
}

TEST_CASE("generated dataset re-slices bit-exactly and is reproducible") {
  const Volume v = make_phantom(46, {48, 48, 48});
  SamplingSpec s;
  s.n_random = 12;
  s.n_near_sp = 6;
  s.seed = 5;
  s.augment_strength = 0.5;
  s.sp_pose = Pose6D(Vec3(0.01, 0.02, -0.03), RotationMatrix::rx_deg(20));
  TempDir a("gen_a"), b("gen_b");
  const auto m = generate_dataset(v, s, a.path(), 2);
  generate_dataset(v, s, b.path(), 1);
  CHECK(!std::filesystem::exists(a / ".partial"));
  REQUIRE(m.rows.size() == 18);
  const auto back = read_manifest(a / "manifest.csv");
  CHECK(read_file(a / "manifest.csv") == read_file(b / "manifest.csv"));
  CHECK(read_file(a / "spec.json") == read_file(b / "spec.json"));
  for (const auto& row : back.rows) {
    const auto stored = read_pgm(a / row.path);
    CHECK(read_file(a / row.path) == read_file(b / row.path));
    REQUIRE(row.aug_seed.has_value());
    CHECK(render_row(v, row, s).pixels == stored.pixels);
    // regenerate the augmentation from the stored seed by hand
    std::mt19937_64 rng(*row.aug_seed);
    const auto params = sample_augment_params(rng, s.augment_strength);
    CHECK(augment(extract_slice(v, row.pose, s.side_norm), params).pixels == stored.pixels);
  }
  const auto spec_back = spec_from_json(nlohmann::json::parse(read_file(a / "spec.json")));
  CHECK(spec_back.seed == 5);
}

TEST_CASE("unaugmented rows re-slice exactly from the manifest pose") {
  const Volume v = make_phantom(47, {48, 48, 48});
  SamplingSpec s;
  s.n_random = 2;
  s.n_near_sp = 1;
  s.seed = 77;
  TempDir dir("gen3");
  const auto m = generate_dataset(v, s, dir.path());
  CHECK(m.rows.size() == 3);
  std::size_t images = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir / "images")) images += e.is_regular_file();
  CHECK(images == 3);
  for (const auto& row : read_manifest(dir / "manifest.csv").rows) {
    CHECK(!row.aug_seed);
    CHECK(extract_slice(v, row.pose).pixels == read_pgm(dir / row.path).pixels);
  }
}

TEST_CASE("failed generation leaves the partial marker") {
  const Volume v = make_phantom(48, {40, 40, 40});
  SamplingSpec s;
  s.n_random = 2;
  s.n_near_sp = 0;
  TempDir dir("genfail");
  // a regular file where the images directory should go
  write_file_atomic(dir / "images", "x");
  CHECK(error_kind([&] { generate_dataset(v, s, dir.path()); }) == ErrorKind::IoError);
  CHECK(std::filesystem::exists(dir / ".partial"));
  CHECK(!std::filesystem::exists(dir / "manifest.csv"));
}
