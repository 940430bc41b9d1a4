#include "planepose/recovery.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <thread>
#include <atomic>
#include <exception>
#include <mutex>

#include "planepose/error.hpp"
#include "planepose/nelder_mead.hpp"
#include "planepose/pose_io.hpp"
#include "planepose/util.hpp"

namespace planepose {

const char* to_string(Metric m) { return m == Metric::Ncc ? "ncc" : "msd"; }

Metric metric_from_string(const std::string& s) {
  if (s == "ncc") return Metric::Ncc;
  if (s == "msd") return Metric::Msd;
  throw Error(ErrorKind::InvalidArgument, "unknown metric '" + s + "'");
}

const char* to_string(StartMode m) {
  switch (m) {
    case StartMode::AroundInit: return "around_init";
    case StartMode::Uniform: return "uniform";
    case StartMode::Screened: return "screened";
  }
  return "?";
}

StartMode start_mode_from_string(const std::string& s) {
  if (s == "around_init") return StartMode::AroundInit;
  if (s == "uniform") return StartMode::Uniform;
  if (s == "screened") return StartMode::Screened;
  throw Error(ErrorKind::InvalidArgument, "unknown start mode '" + s + "'");
}

void RecoveryConfig::validate() const {
  if (n_starts < 1) throw Error(ErrorKind::InvalidArgument, "n_starts must be >= 1");
  if (!(param_tol > 0.0) || max_iters < 1) {
    throw Error(ErrorKind::InvalidArgument, "tolerances and iteration limits must be positive");
  }
  if (levels.empty()) throw Error(ErrorKind::InvalidArgument, "at least one resolution level");
  for (int n : levels) {
    if (n < 4 || SliceImage::kSize % n != 0) {
      throw Error(ErrorKind::InvalidArgument, "levels must divide 128");
    }
  }
  if (rot_search_mode == StartMode::AroundInit && !init) {
    throw Error(ErrorKind::InvalidArgument, "around_init start mode needs an init pose");
  }
  if (rot_search_mode == StartMode::Screened && screen_candidates < n_starts) {
    throw Error(ErrorKind::InvalidArgument, "screen_candidates must be >= n_starts");
  }
  if (!(side_norm > 0.0 && side_norm <= 4.0)) {
    throw Error(ErrorKind::InvalidArgument, "side_norm must lie in (0, 4]");
  }
}

Pose6D flip_pose(const Pose6D& p) {
  return Pose6D(p.t(), p.q() * Quat(Eigen::AngleAxisd(kPi, Vec3::UnitX())));
}

double ncc(std::span<const double> a, std::span<const double> b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa <= 1e-12 || sbb <= 1e-12) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

Volume downsample2(const Volume& v) {
  const auto& d = v.dims();
  const Dims dc{d[0] / 2, d[1] / 2, d[2] / 2};
  for (int n : dc) {
    if (n < 2) throw Error(ErrorKind::BadDims, "volume too small to downsample");
  }
  std::vector<std::uint8_t> out(static_cast<std::size_t>(dc[0]) * dc[1] * dc[2]);
  std::size_t o = 0;
  for (int k = 0; k < dc[2]; ++k) {
    for (int j = 0; j < dc[1]; ++j) {
      for (int i = 0; i < dc[0]; ++i) {
        int sum = 0;
        for (int dz = 0; dz < 2; ++dz) {
          for (int dy = 0; dy < 2; ++dy) {
            for (int dx = 0; dx < 2; ++dx) sum += v.at(2 * i + dx, 2 * j + dy, 2 * k + dz);
          }
        }
        out[o++] = static_cast<std::uint8_t>((sum + 4) / 8);
      }
    }
  }
  return Volume(dc, v.spacing_mm() * 2.0, std::move(out), std::nullopt, v.id());
}

struct PoseRecoverer::Target {
  int n = 0;
  Metric metric = Metric::Ncc;
  std::vector<double> pixels;  // NCC: zero mean, unit norm
};

PoseRecoverer::PoseRecoverer(const Volume& v, RecoveryConfig cfg)
    : volume_(&v), cfg_(std::move(cfg)) {
  cfg_.validate();
  const Volume* cur = &v;
  while (*std::min_element(cur->dims().begin(), cur->dims().end()) >= 16 && pyramid_.size() < 3) {
    pyramid_.push_back(downsample2(*cur));
    cur = &pyramid_.back();
  }
}

void PoseRecoverer::render(const Pose6D& pose, int n, std::span<double> out) const {
  const double half = volume_->half_extent_voxels();
  const double pitch_vox = cfg_.side_norm * half / n;
  std::size_t level = 0;
  while (level < pyramid_.size() && std::ldexp(1.0, static_cast<int>(level) + 1) <= pitch_vox) {
    ++level;
  }
  const Volume& vol = level == 0 ? *volume_ : pyramid_[level - 1];
  const double f = std::ldexp(1.0, static_cast<int>(level));
  const double off = (f - 1.0) / 2.0;

  const Mat3 r = pose.rotation().matrix();
  const Vec3 origin = (volume_->normalized_to_voxel(pose.t()) - Vec3::Constant(off)) / f;
  const Vec3 ex = r.col(0) * (cfg_.side_norm / n * half / f);
  const Vec3 ey = r.col(1) * (cfg_.side_norm / n * half / f);
  const double c0 = 0.5 - n / 2.0;
  for (int row = 0; row < n; ++row) {
    const Vec3 row_base = origin + ey * (row + c0);
    double* dst = out.data() + static_cast<std::size_t>(row) * n;
    for (int col = 0; col < n; ++col) {
      const Vec3 p = row_base + ex * (col + c0);
      dst[col] = vol.sample_voxel(p.x(), p.y(), p.z());
    }
  }
}

PoseRecoverer::Target PoseRecoverer::make_target(const GrayImage& img, int n, Metric metric) const {
  Target t;
  t.n = n;
  t.metric = metric;
  const int k = SliceImage::kSize / n;
  t.pixels.assign(static_cast<std::size_t>(n) * n, 0.0);
  for (int r = 0; r < SliceImage::kSize; ++r) {
    for (int c = 0; c < SliceImage::kSize; ++c) {
      t.pixels[static_cast<std::size_t>(r / k) * n + c / k] += img.at(r, c);
    }
  }
  for (auto& p : t.pixels) p /= k * k;
  if (metric == Metric::Ncc) {
    const double mean = std::accumulate(t.pixels.begin(), t.pixels.end(), 0.0) / t.pixels.size();
    double ss = 0.0;
    for (auto& p : t.pixels) {
      p -= mean;
      ss += p * p;
    }
    if (ss <= 1e-9) throw Error(ErrorKind::FlatImage, "image has zero variance; NCC undefined");
    const double inv = 1.0 / std::sqrt(ss);
    for (auto& p : t.pixels) p *= inv;
  }
  return t;
}

// Lower is better: 1 − NCC, or MSD.
double PoseRecoverer::objective(const Target& t, const Pose6D& pose,
                                std::span<double> scratch) const {
  const std::size_t m = static_cast<std::size_t>(t.n) * t.n;
  std::span<double> buf = scratch.first(m);
  render(pose, t.n, buf);
  if (t.metric == Metric::Msd) {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double d = buf[i] - t.pixels[i];
      s += d * d;
    }
    return s / static_cast<double>(m);
  }
  double sb = 0.0, sbb = 0.0, sab = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    sb += buf[i];
    sbb += buf[i] * buf[i];
    sab += t.pixels[i] * buf[i];
  }
  const double var = sbb - sb * sb / static_cast<double>(m);
  if (var <= 1e-9) return 1.0;
  return 1.0 - sab / std::sqrt(var);
}

namespace {

double to_score(Metric m, double objective) { return m == Metric::Ncc ? 1.0 - objective : -objective; }

Pose6D perturb(const Pose6D& p, std::mt19937_64& rng, double t_spread, double rot_deg) {
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vec3 dt(uni(rng) * t_spread, uni(rng) * t_spread, uni(rng) * t_spread);
  Vec3 axis(gauss(rng), gauss(rng), gauss(rng));
  axis.normalize();
  const double angle = deg2rad(rot_deg) * (uni(rng) + 1.0) / 2.0;
  return Pose6D(p.t() + dt, p.q() * Quat(Eigen::AngleAxisd(angle, axis)));
}

Pose6D random_pose(std::mt19937_64& rng, const std::array<Interval, 3>& range) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vec3 t;
  for (int a = 0; a < 3; ++a) t[a] = range[a].lo + (range[a].hi - range[a].lo) * uni(rng);
  Quat q(gauss(rng), gauss(rng), gauss(rng), gauss(rng));
  if (q.norm() < 1e-9) q = Quat::Identity();
  return Pose6D(t, q);
}

// Local increment about the plane's own axes.
Pose6D apply_increment(const Pose6D& base, std::span<const double> p) {
  const Vec3 omega(p[0], p[1], p[2]);
  const double angle = omega.norm();
  const Quat dq = angle > 0.0 ? Quat(Eigen::AngleAxisd(angle, omega / angle)) : Quat::Identity();
  return Pose6D(base.t() + Vec3(p[3], p[4], p[5]), base.q() * dq);
}

template <class Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn) {
  const auto n_threads = static_cast<std::size_t>(std::max(1, threads));
  if (n_threads == 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < std::min(n_threads, count); ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(mu);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

StartOutcome PoseRecoverer::run_start(const std::vector<Target>& targets, const Target& full,
                                      const Pose6D& start, const RecoveryConfig& cfg) const {
  StartOutcome out;
  out.start = start;
  Pose6D cur = start;
  std::vector<double> scratch(static_cast<std::size_t>(SliceImage::kSize) * SliceImage::kSize);
  const int finest = targets.back().n;
  for (std::size_t l = 0; l < targets.size(); ++l) {
    const Target& t = targets[l];
    const double coarse = static_cast<double>(finest) / t.n;  // 1 at the finest level
    const double rot_step = deg2rad(1.0) * coarse * 1.5;
    const double t_step = 0.0075 * coarse * 1.5;
    NelderMeadOptions nm;
    nm.max_iters = cfg.max_iters;
    nm.x_tol = cfg.param_tol * coarse;
    nm.initial_step = {rot_step, rot_step, rot_step, t_step, t_step, t_step};
    const Pose6D base = cur;
    const auto f = [&](std::span<const double> p) {
      return objective(t, apply_increment(base, p), scratch);
    };
    const auto res = nelder_mead(f, std::vector<double>(6, 0.0), nm);
    cur = apply_increment(base, res.x);
    out.iterations += res.iterations;
    std::vector<double> hist;
    hist.reserve(res.best_history.size());
    for (double v : res.best_history) hist.push_back(to_score(t.metric, v));
    out.score_history.push_back(std::move(hist));
  }
  out.pose = cur;
  out.score = to_score(full.metric, objective(full, cur, scratch));
  return out;
}

std::vector<Pose6D> PoseRecoverer::choose_starts(const std::vector<Target>& targets,
                                                 const RecoveryConfig& cfg) const {
  std::vector<Pose6D> starts;
  const auto n = static_cast<std::size_t>(cfg.n_starts);
  switch (cfg.rot_search_mode) {
    case StartMode::AroundInit:
      starts.push_back(*cfg.init);
      for (std::size_t i = 1; i < n; ++i) {
        std::mt19937_64 rng(derive_seed(cfg.seed, i));
        starts.push_back(perturb(*cfg.init, rng, cfg.init_t_spread, cfg.init_rot_spread_deg));
      }
      break;
    case StartMode::Uniform:
      for (std::size_t i = 0; i < n; ++i) {
        std::mt19937_64 rng(derive_seed(cfg.seed, i));
        starts.push_back(random_pose(rng, cfg.t_search_range));
      }
      break;
    case StartMode::Screened: {
      const auto m = static_cast<std::size_t>(cfg.screen_candidates);
      std::vector<Pose6D> cand(m);
      std::vector<double> cost(m);
      const Target& coarse = targets.front();
      parallel_for(m, cfg.threads, [&](std::size_t i) {
        std::vector<double> scratch(static_cast<std::size_t>(coarse.n) * coarse.n);
        std::mt19937_64 rng(derive_seed(cfg.seed, i));
        cand[i] = random_pose(rng, cfg.t_search_range);
        cost[i] = objective(coarse, cand[i], scratch);
      });
      std::vector<std::size_t> idx(m);
      std::iota(idx.begin(), idx.end(), 0);
      std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n), idx.end(),
                        [&](auto a, auto b) { return cost[a] < cost[b] || (cost[a] == cost[b] && a < b); });
      for (std::size_t i = 0; i < n; ++i) starts.push_back(cand[idx[i]]);
      break;
    }
  }
  return starts;
}

RecoveryResult PoseRecoverer::recover(const GrayImage& img) const { return recover(img, cfg_); }

RecoveryResult PoseRecoverer::recover(const GrayImage& img, const RecoveryConfig& cfg) const {
  cfg.validate();
  if (img.width != SliceImage::kSize || img.height != SliceImage::kSize) {
    throw Error(ErrorKind::InvalidArgument, "recovery needs a 128x128 image");
  }
  std::vector<Target> targets;
  for (int n : cfg.levels) targets.push_back(make_target(img, n, cfg.metric));
  const Target full = make_target(img, SliceImage::kSize, cfg.metric);

  const auto starts = choose_starts(targets, cfg);
  RecoveryResult res;
  res.starts.resize(starts.size());
  parallel_for(starts.size(), cfg.threads,
               [&](std::size_t i) { res.starts[i] = run_start(targets, full, starts[i], cfg); });

  // argmax, lowest index wins ties
  for (std::size_t i = 1; i < res.starts.size(); ++i) {
    if (res.starts[i].score > res.starts[res.best_start].score) res.best_start = i;
  }
  const Pose6D best = res.starts[res.best_start].pose;
  const double best_score = res.starts[res.best_start].score;
  const Pose6D flipped = flip_pose(best);
  std::vector<double> scratch(static_cast<std::size_t>(SliceImage::kSize) * SliceImage::kSize);
  const double flipped_score = to_score(cfg.metric, objective(full, flipped, scratch));
  if (flipped_score > best_score) {
    res.pose = flipped;
    res.score = flipped_score;
    res.flipped_pose = best;
    res.flipped_score = best_score;
  } else {
    res.pose = best;
    res.score = best_score;
    res.flipped_pose = flipped;
    res.flipped_score = flipped_score;
  }
  return res;
}

double PoseRecoverer::score(const GrayImage& img, const Pose6D& pose) const {
  const Target full = make_target(img, SliceImage::kSize, cfg_.metric);
  std::vector<double> scratch(full.pixels.size());
  return to_score(cfg_.metric, objective(full, pose, scratch));
}

RecoveryResult recover_pose(const SliceImage& img, const Volume& v, const RecoveryConfig& cfg) {
  return PoseRecoverer(v, cfg).recover(img.gray());
}

std::vector<BatchRecoveryRow> recover_pose_batch(const DatasetManifest& manifest,
                                                 const std::filesystem::path& dataset_dir,
                                                 const Volume& v, const RecoveryConfig& cfg,
                                                 const BatchRecoveryOptions& opts) {
  std::vector<BatchRecoveryRow> out;
  if (manifest.rows.empty()) return out;
  const PoseRecoverer recoverer(v, cfg);
  out.reserve(manifest.rows.size());
  for (std::size_t i = 0; i < manifest.rows.size(); ++i) {
    BatchRecoveryRow row;
    row.row = i;
    try {
      const GrayImage img = read_pgm(dataset_dir / manifest.rows[i].path);
      RecoveryConfig row_cfg = cfg;
      row_cfg.seed = derive_seed(cfg.seed, i);
      if (opts.init_from_row_pose) {
        std::mt19937_64 rng(derive_seed(cfg.seed ^ 0x5eedULL, i));
        row_cfg.init = perturb(manifest.rows[i].pose, rng, opts.init_perturb_t,
                               opts.init_perturb_rot_deg);
        row_cfg.rot_search_mode = StartMode::AroundInit;
      }
      row.result = recoverer.recover(img, row_cfg);
    } catch (const Error& e) {
      row.error = e.what();
    }
    out.push_back(std::move(row));
  }
  return out;
}

std::string predictions_to_csv(const DatasetManifest& manifest,
                               std::span<const BatchRecoveryRow> rows) {
  std::string out = std::string(kPredictionsHeader) + "\n";
  for (const auto& r : rows) {
    const ManifestRow& m = manifest.rows.at(r.row);
    const std::string aug = m.aug_seed ? std::to_string(*m.aug_seed) : "";
    if (r.result) {
      ManifestRow pred = m;
      pred.pose = snap_to_csv_precision(r.result->pose);
      char score[64];
      std::snprintf(score, sizeof score, "%.7f", r.result->score);
      out += manifest_row_csv(pred) + "," + score + ",ok\n";
    } else {
      std::string msg = r.error;
      std::replace(msg.begin(), msg.end(), ',', ';');
      std::replace(msg.begin(), msg.end(), '\n', ' ');
      out += m.path + "," + m.volume_id + ",,,,,,,," + to_string(m.category) + "," + aug +
             ",,failed: " + msg + "\n";
    }
  }
  return out;
}

}  // namespace planepose
