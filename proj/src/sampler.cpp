#include "planepose/sampler.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include "planepose/error.hpp"
#include "planepose/pose_io.hpp"
#include "planepose/util.hpp"

namespace planepose {

namespace fs = std::filesystem;
using nlohmann::json;

void SamplingSpec::validate() const {
  if (n_random < 0 || n_near_sp < 0) throw Error(ErrorKind::InvalidArgument, "negative count");
  if (!(near_sp_t_step > 0.0) || !(near_sp_rot_step_deg > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "near-SP steps must be positive");
  }
  for (const auto& r : t_range) {
    if (!(r.lo <= r.hi && r.lo >= -1.0 && r.hi <= 1.0)) {
      throw Error(ErrorKind::InvalidArgument, "t_range must be a sub-interval of [-1, 1]");
    }
  }
  if (!(augment_strength >= 0.0 && augment_strength <= 1.0)) {
    throw Error(ErrorKind::BadStrength, "augment strength must lie in [0, 1]");
  }
  if (!(side_norm > 0.0 && side_norm <= 4.0)) {
    throw Error(ErrorKind::InvalidArgument, "side_norm must lie in (0, 4]");
  }
}

json spec_to_json(const SamplingSpec& s) {
  json tr = json::array();
  for (const auto& r : s.t_range) tr.push_back({r.lo, r.hi});
  return json{{"n_random", s.n_random},
              {"n_near_sp", s.n_near_sp},
              {"t_range", tr},
              {"near_sp_t_step", s.near_sp_t_step},
              {"near_sp_rot_step_deg", s.near_sp_rot_step_deg},
              {"sp_pose", pose_to_json(s.sp_pose)},
              {"seed", s.seed},
              {"augment_strength", s.augment_strength},
              {"side_norm", s.side_norm}};
}

SamplingSpec spec_from_json(const json& j) {
  try {
    SamplingSpec s;
    s.n_random = j.at("n_random").get<int>();
    s.n_near_sp = j.at("n_near_sp").get<int>();
    const auto& tr = j.at("t_range");
    if (tr.size() != 3) throw Error(ErrorKind::FormatError, "t_range needs 3 intervals");
    for (int a = 0; a < 3; ++a) s.t_range[a] = {tr[a].at(0).get<double>(), tr[a].at(1).get<double>()};
    s.near_sp_t_step = j.at("near_sp_t_step").get<double>();
    s.near_sp_rot_step_deg = j.at("near_sp_rot_step_deg").get<double>();
    s.sp_pose = pose_from_json(j.at("sp_pose"));
    s.seed = j.at("seed").get<std::uint64_t>();
    s.augment_strength = j.value("augment_strength", 0.0);
    s.side_norm = j.value("side_norm", kDefaultSideNorm);
    s.validate();
    return s;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::FormatError, std::string("sampling spec: ") + e.what());
  }
}

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  return lo + (hi - lo) * uni(rng);
}

Quat uniform_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  while (true) {
    const Quat q(gauss(rng), gauss(rng), gauss(rng), gauss(rng));
    if (q.norm() > 1e-9) return q.normalized();
  }
}

Vec3 uniform_unit_vector(std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  while (true) {
    const Vec3 v(gauss(rng), gauss(rng), gauss(rng));
    if (v.norm() > 1e-9) return v.normalized();
  }
}

}  // namespace

Pose6D sample_random_pose(std::mt19937_64& rng, const SamplingSpec& spec) {
  Vec3 t;
  for (int a = 0; a < 3; ++a) t[a] = uniform(rng, spec.t_range[a].lo, spec.t_range[a].hi);
  return Pose6D(t, uniform_rotation(rng));
}

Pose6D sample_near_sp_pose(std::mt19937_64& rng, const SamplingSpec& spec) {
  const double ts = spec.near_sp_t_step;
  Vec3 dt;
  for (int a = 0; a < 3; ++a) dt[a] = uniform(rng, -ts, ts);
  const Vec3 axis = uniform_unit_vector(rng);
  const double angle = deg2rad(uniform(rng, 0.0, spec.near_sp_rot_step_deg));
  const Quat dq(Eigen::AngleAxisd(angle, axis));
  return Pose6D(spec.sp_pose.t() + dt, spec.sp_pose.q() * dq);
}

const char* to_string(Category c) { return c == Category::Random ? "random" : "near_sp"; }

Category category_from_string(const std::string& s) {
  if (s == "random") return Category::Random;
  if (s == "near_sp") return Category::NearSp;
  throw Error(ErrorKind::FormatError, "unknown category '" + s + "'");
}

std::string manifest_row_csv(const ManifestRow& row) {
  std::string out = row.path + "," + row.volume_id + "," + pose_to_csv(row.pose) + "," +
                    to_string(row.category) + ",";
  if (row.aug_seed) out += std::to_string(*row.aug_seed);
  return out;
}

std::string manifest_to_csv(const DatasetManifest& m) {
  std::string out = std::string(kManifestHeader) + "\n";
  for (const auto& row : m.rows) out += manifest_row_csv(row) + "\n";
  return out;
}

DatasetManifest read_manifest(const fs::path& csv_path) {
  const CsvTable t = read_csv(csv_path);
  const std::size_t c_path = t.column("path"), c_vol = t.column("volume_id"),
                    c_tx = t.column("tx"), c_cat = t.column("category"),
                    c_aug = t.column("aug_seed");
  if (t.column("qz") != c_tx + 6) throw Error(ErrorKind::FormatError, "pose columns out of order");
  DatasetManifest m;
  for (const auto& r : t.rows) {
    ManifestRow row;
    row.path = r[c_path];
    row.volume_id = r[c_vol];
    row.pose = pose_from_csv(std::span(r).subspan(c_tx, 7));
    row.category = category_from_string(r[c_cat]);
    if (!r[c_aug].empty()) row.aug_seed = std::stoull(r[c_aug]);
    m.rows.push_back(std::move(row));
  }
  return m;
}

namespace {

bool within_near_sp_bounds(const Pose6D& p, const SamplingSpec& spec) {
  const Vec3 dt = (p.t() - spec.sp_pose.t()).cwiseAbs();
  return dt.maxCoeff() <= spec.near_sp_t_step &&
         quaternion_angle_deg(spec.sp_pose.q(), p.q()) <= spec.near_sp_rot_step_deg;
}

}  // namespace

DatasetManifest plan_dataset(const Volume& v, const SamplingSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  DatasetManifest m;
  const int total = spec.n_random + spec.n_near_sp;
  m.rows.reserve(static_cast<std::size_t>(total));
  for (int i = 0; i < total; ++i) {
    ManifestRow row;
    char name[64];
    std::snprintf(name, sizeof name, "_%06d.pgm", i);
    row.path = "images/" + v.id() + name;
    row.volume_id = v.id();
    row.category = i < spec.n_random ? Category::Random : Category::NearSp;
    if (row.category == Category::Random) {
      row.pose = snap_to_csv_precision(sample_random_pose(rng, spec));
    } else {
      // redraw the rare sample that rounding to manifest precision pushes past the box
      do {
        row.pose = snap_to_csv_precision(sample_near_sp_pose(rng, spec));
      } while (!within_near_sp_bounds(row.pose, spec));
    }
    if (spec.augment_strength > 0.0) row.aug_seed = derive_seed(spec.seed, static_cast<std::uint64_t>(i));
    m.rows.push_back(std::move(row));
  }
  return m;
}

SliceImage render_row(const Volume& v, const ManifestRow& row, const SamplingSpec& spec) {
  SliceImage img = extract_slice(v, row.pose, spec.side_norm);
  if (row.aug_seed) {
    std::mt19937_64 rng(*row.aug_seed);
    img = augment(img, sample_augment_params(rng, spec.augment_strength));
  }
  return img;
}

DatasetManifest generate_dataset(const Volume& v, const SamplingSpec& spec, const fs::path& out_dir,
                                 int threads) {
  DatasetManifest m = plan_dataset(v, spec);
  const fs::path partial = out_dir / ".partial";
  try {
    fs::create_directories(out_dir);
    std::ofstream(partial) << "generation in progress\n";
    fs::create_directories(out_dir / "images");
  } catch (const fs::filesystem_error& e) {
    throw Error(ErrorKind::IoError, e.what());
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= m.rows.size()) return;
      {
        std::lock_guard lock(failure_mu);
        if (failure) return;
      }
      try {
        write_pgm(out_dir / m.rows[i].path, render_row(v, m.rows[i], spec).gray());
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int n_threads = std::max(1, threads);
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  write_file_atomic(out_dir / "manifest.csv", manifest_to_csv(m));
  write_file_atomic(out_dir / "spec.json", spec_to_json(spec).dump(2) + "\n");
  fs::remove(partial);
  return m;
}

}  // namespace planepose
