#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Geometry>

#include "helpers.hpp"
#include "planepose/phantom.hpp"
#include "planepose/registration.hpp"

using namespace planepose;
using testutil::error_kind;

namespace {

std::vector<Vec3> random_points(std::mt19937_64& rng, int n, double scale = 20.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<Vec3> pts;
  for (int i = 0; i < n; ++i) pts.emplace_back(u(rng), u(rng), u(rng));
  return pts;
}

Landmarks as_landmarks(const std::vector<Vec3>& pts, std::vector<std::string> labels = {}) {
  Landmarks lm;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    lm.points.push_back({labels.empty() ? "p" + std::to_string(i) : labels[i], pts[i]});
  }
  return lm;
}

}  // namespace

TEST_CASE("similarity fit examples") {
  std::mt19937_64 rng(50);
  const auto src = random_points(rng, 5);
  const auto id = fit_similarity_points(src, src);
  CHECK((id.rotation.matrix() - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(std::abs(id.scale - 1.0) < 1e-12);
  CHECK(id.t_mm.norm() < 1e-10);

  const RotationMatrix rz = RotationMatrix::rz_deg(25);
  std::vector<Vec3> dst;
  for (const auto& p : src) dst.push_back(1.1 * (rz * p) + Vec3(3, -2, 7));
  const auto t = fit_similarity_points(src, dst);
  CHECK(std::abs(t.scale - 1.1) < 1e-9);
  CHECK(geodesic_deg(t.rotation, rz) < 1e-9);
  CHECK((t.t_mm - Vec3(3, -2, 7)).norm() < 1e-9);

  CHECK(error_kind([&] {
          fit_similarity_points(std::span(src).first(2), std::span(dst).first(2));
        }) == ErrorKind::TooFewPoints);
  std::vector<Vec3> line = {Vec3(0, 0, 0), Vec3(1, 1, 1), Vec3(2, 2, 2), Vec3(-3, -3, -3)};
  CHECK(error_kind([&] { fit_similarity_points(line, line); }) == ErrorKind::Collinear);
  CHECK(error_kind([&] { fit_similarity_points(src, std::span(dst).first(4)); }).has_value());
}

TEST_CASE("similarity fit agrees with Eigen's umeyama on noisy data") {
  std::mt19937_64 rng(51);
  std::normal_distribution<double> noise(0.0, 0.5);
  for (int trial = 0; trial < 100; ++trial) {
    const auto src = random_points(rng, 4 + trial % 7);
    const auto r = testutil::random_rotation(rng);
    std::vector<Vec3> dst;
    for (const auto& p : src) dst.push_back(0.8 * (r * p) + Vec3(1, 2, 3) + Vec3(noise(rng), noise(rng), noise(rng)));
    Eigen::Matrix3Xd a(3, src.size()), b(3, src.size());
    for (std::size_t i = 0; i < src.size(); ++i) {
      a.col(i) = src[i];
      b.col(i) = dst[i];
    }
    const Eigen::Matrix4d oracle = Eigen::umeyama(a, b, true);
    const auto t = fit_similarity_points(src, dst);
    Eigen::Matrix4d got = Eigen::Matrix4d::Identity();
    got.topLeftCorner<3, 3>() = t.scale * t.rotation.matrix();
    got.topRightCorner<3, 1>() = t.t_mm;
    CHECK((got - oracle).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("similarity fit is exact on noise-free sets and order invariant") {
  std::mt19937_64 rng(52);
  std::uniform_real_distribution<double> s(0.5, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    const auto src = random_points(rng, 3 + trial % 10);
    const auto r = testutil::random_rotation(rng);
    const double scale = s(rng);
    const Vec3 t = random_points(rng, 1)[0];
    std::vector<Vec3> dst;
    for (const auto& p : src) dst.push_back(scale * (r * p) + t);
    const auto fit = fit_similarity_points(src, dst);
    double worst = 0;
    for (std::size_t i = 0; i < src.size(); ++i) worst = std::max(worst, (fit.apply(src[i]) - dst[i]).norm());
    CHECK(worst <= 1e-9);
    auto ps = src, pd = dst;
    std::reverse(ps.begin(), ps.end());
    std::reverse(pd.begin(), pd.end());
    CHECK(std::abs(fit_similarity_points(ps, pd).scale - fit.scale) < 1e-12);
  }
}

TEST_CASE("similarity transform algebra and json") {
  std::mt19937_64 rng(53);
  for (int i = 0; i < 200; ++i) {
    SimilarityTransform t{testutil::random_rotation(rng), random_points(rng, 1)[0], 0.5 + 0.01 * i};
    const Vec3 x = random_points(rng, 1)[0];
    CHECK((t.inverse().apply(t.apply(x)) - x).norm() < 1e-9);
    const SimilarityTransform u{testutil::random_rotation(rng), random_points(rng, 1)[0], 1.3};
    CHECK(((t * u).apply(x) - t.apply(u.apply(x))).norm() < 1e-9);
    const auto back = similarity_from_json(similarity_to_json(t));
    CHECK((back.apply(x) - t.apply(x)).norm() < 1e-12);
  }
  const auto j = similarity_to_json(SimilarityTransform{});
  CHECK(j.contains("R"));
  CHECK(j.contains("t_mm"));
  CHECK(j.contains("s"));
}

TEST_CASE("landmark pairing and rms") {
  std::mt19937_64 rng(54);
  const auto pts = random_points(rng, 5);
  auto shifted = pts;
  for (auto& p : shifted) p += Vec3(0, 0, 3);
  const Landmarks a = as_landmarks(pts), b = as_landmarks(shifted);
  CHECK(landmark_rms(SimilarityTransform{}, a, a) == 0.0);
  CHECK(landmark_rms(SimilarityTransform{}, a, b) == doctest::Approx(3.0));
  const Landmarks one_a = as_landmarks({Vec3(1, 1, 1)}, {"x"});
  const Landmarks one_b = as_landmarks({Vec3(1, 1, 4)}, {"x"});
  CHECK(landmark_rms(SimilarityTransform{}, one_a, one_b) == doctest::Approx(3.0));
  const Landmarks other = as_landmarks({Vec3(1, 1, 4)}, {"y"});
  CHECK(error_kind([&] { landmark_rms(SimilarityTransform{}, one_a, other); }) == ErrorKind::LabelMismatch);

  // fit pairs by label regardless of order
  Landmarks shuffled = b;
  std::reverse(shuffled.points.begin(), shuffled.points.end());
  const auto t = fit_similarity_landmarks(a, shuffled);
  CHECK((t.t_mm - Vec3(0, 0, 3)).norm() < 1e-9);
}

TEST_CASE("masked refinement") {
  const Volume fixed = make_phantom(55, {48, 48, 48});
  SUBCASE("identical volumes stay at identity") {
    const auto r = refine_similarity_masked(fixed, fixed, SimilarityTransform{}, *fixed.mask());
    CHECK(r.initial_objective == 0.0);
    CHECK(r.final_objective == 0.0);
    CHECK((r.transform.rotation.matrix() - Mat3::Identity()).norm() == 0.0);
    CHECK(r.transform.t_mm.norm() == 0.0);
    CHECK(r.transform.scale == 1.0);
  }
  SUBCASE("empty mask") {
    const std::vector<std::uint8_t> none(fixed.voxel_count(), 0);
    CHECK(error_kind([&] { refine_similarity_masked(fixed, fixed, SimilarityTransform{}, none); }) ==
          ErrorKind::EmptyMask);
    const std::vector<std::uint8_t> wrong(7, 1);
    CHECK(error_kind([&] { refine_similarity_masked(fixed, fixed, SimilarityTransform{}, wrong); }) ==
          ErrorKind::DimensionMismatch);
  }
  SUBCASE("stride subsampling is deterministic") {
    const MaskedMsdObjective obj(fixed, fixed, *fixed.mask(), 1000);
    const auto count = std::count(fixed.mask()->begin(), fixed.mask()->end(), 1);
    CHECK(obj.stride() == static_cast<std::size_t>((count + 999) / 1000));
    CHECK(obj.sample_count() <= 1000);
    CHECK(obj(SimilarityTransform{}) == 0.0);
  }
  SUBCASE("never worse than init and improves a perturbed start") {
    const SimilarityTransform truth{RotationMatrix::axis_angle(Vec3(1, 1, 0).normalized(), deg2rad(4)),
                                    Vec3(1.5, -1.0, 0.5), 1.03};
    const Volume moving = warp_volume(fixed, truth.inverse());
    RefineOptions o;
    o.max_iters = 150;
    const SimilarityTransform init{RotationMatrix(), Vec3::Zero(), 1.0};
    const auto r = refine_similarity_masked(moving, fixed, init, *fixed.mask(), o);
    CHECK(r.final_objective <= r.initial_objective);
    CHECK(r.final_objective < 0.5 * r.initial_objective);
  }
}

TEST_CASE("warp carries the mask") {
  const Volume v = make_phantom(56, {40, 40, 40});
  const Volume w = warp_volume(v, SimilarityTransform{});
  CHECK(w.voxels() == v.voxels());
  REQUIRE(w.has_mask());
  CHECK(*w.mask() == *v.mask());
  const Volume shifted = warp_volume(v, SimilarityTransform{RotationMatrix(), Vec3(2, 0, 0), 1.0});
  CHECK(shifted.at(10, 20, 20) == v.at(12, 20, 20));
}

TEST_CASE("registration table") {
  std::vector<RegistrationRow> rows(1);
  rows[0].volume = "21 w";
  rows[0].initial = 6.02;
  rows[0].automatic = 8.21;
  rows[0].mask = 5.82;
  rows[0].fid_mask = 5.80;
  const std::string t = render_registration_table(rows);
  CHECK(t.find("| 21 w | 6.02 | 8.21 | 5.82 | 5.80 |") != std::string::npos);
  rows[0].mask.reset();
  CHECK(render_registration_table(rows).find("| 21 w | 6.02 | 8.21 |  | 5.80 |") != std::string::npos);
}
