#include "planepose/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include "planepose/annotation.hpp"
#include "planepose/error.hpp"
#include "planepose/phantom.hpp"
#include "planepose/pose_io.hpp"
#include "planepose/registration.hpp"
#include "planepose/sampler.hpp"
#include "planepose/slicer.hpp"
#include "planepose/util.hpp"
#include "planepose/volume.hpp"

namespace planepose::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string logfmt_value(const std::string& v) {
  const bool plain = !v.empty() && v.find_first_of(" =\"\t\n") == std::string::npos;
  if (plain) return v;
  std::string out = "\"";
  for (char c : v) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  return out + "\"";
}

using Fields = std::vector<std::pair<std::string, std::string>>;

void emit(const char* level, const std::string& msg, const Fields& kv = {}) {
  const auto now = std::chrono::system_clock::now();
  const std::time_t secs = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char ts[32];
  std::strftime(ts, sizeof ts, "%Y-%m-%dT%H:%M:%SZ", &tm);
  std::string line = std::string("ts=") + ts + " level=" + level + " msg=" + logfmt_value(msg);
  for (const auto& [k, v] : kv) line += " " + k + "=" + logfmt_value(v);
  std::cerr << line << '\n';
}

template <class T>
std::string str(const T& v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

json read_json_file(const fs::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::FormatError, path.string() + ": " + e.what());
  }
}

/// Inline JSON when the argument starts with '{', otherwise a file path.
Pose6D read_pose_arg(const std::string& arg) {
  if (!arg.empty() && arg.front() == '{') {
    try {
      return pose_from_json(json::parse(arg));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::FormatError, std::string("pose: ") + e.what());
    }
  }
  return pose_from_json(read_json_file(arg));
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string opt_cell(const std::optional<double>& v) { return v ? fixed2(*v) : std::string(); }

// ---------------------------------------------------------------- phantom

struct PhantomArgs {
  std::uint64_t seed = 0;
  std::string out;
  std::vector<int> dims = {96, 96, 96};
  double spacing = 1.0;
  double ga = 23.0;
  std::string landmarks;
};

void cmd_phantom(const PhantomArgs& a) {
  if (a.dims.size() != 3) throw Error(ErrorKind::BadDims, "--dims needs three values");
  const Dims dims{a.dims[0], a.dims[1], a.dims[2]};
  const Volume v = make_phantom(a.seed, dims, a.spacing, a.ga);
  const fs::path out(a.out);
  ensure_parent(out);
  save_volume(v, out,
              json{{"generator", "phantom"}, {"seed", a.seed}, {"ga_weeks", a.ga}});
  if (!a.landmarks.empty()) {
    Landmarks lm = phantom_landmarks(a.seed, dims, a.spacing, a.ga);
    lm.volume_id = out.stem().string();
    ensure_parent(a.landmarks);
    save_landmarks(lm, a.landmarks);
  }
  emit("info", "phantom written",
      {{"out", a.out}, {"seed", str(a.seed)}, {"ga_weeks", fmt(a.ga)},
       {"dims", str(a.dims[0]) + "x" + str(a.dims[1]) + "x" + str(a.dims[2])}});
}

// ---------------------------------------------------------------- slice

struct SliceArgs {
  std::string volume;
  std::string pose;
  std::string out;
  double side = kDefaultSideNorm;
};

void cmd_slice(const SliceArgs& a) {
  const Volume v = load_volume(a.volume);
  const Pose6D pose = a.pose.empty() ? Pose6D() : read_pose_arg(a.pose);
  const SliceImage img = extract_slice(v, pose, a.side);
  ensure_parent(a.out);
  write_pgm(a.out, img.gray());
  emit("info", "slice written", {{"out", a.out}, {"pose_hash", pose_hash(pose)}});
}

// ---------------------------------------------------------------- genplanes

struct GenArgs {
  std::string volume;
  std::string out;
  int n_random = 20699;
  int n_near = 1330;
  std::uint64_t seed = 0;
  std::string sp_pose;
  double augment_strength = 0.0;
  double t_half_range = 0.35;
  double near_t_step = 0.001;
  double near_rot_step = 1.9;
  double side = kDefaultSideNorm;
};

void cmd_genplanes(const GenArgs& a, int threads) {
  const Volume v = load_volume(a.volume);
  SamplingSpec spec;
  spec.n_random = a.n_random;
  spec.n_near_sp = a.n_near;
  spec.seed = a.seed;
  for (auto& r : spec.t_range) r = {-a.t_half_range, a.t_half_range};
  spec.near_sp_t_step = a.near_t_step;
  spec.near_sp_rot_step_deg = a.near_rot_step;
  spec.augment_strength = a.augment_strength;
  spec.side_norm = a.side;
  if (!a.sp_pose.empty()) spec.sp_pose = read_pose_arg(a.sp_pose);
  spec.validate();
  emit("info", "generating dataset",
      {{"volume", v.id()}, {"rows", str(a.n_random + a.n_near)}, {"seed", str(a.seed)},
       {"threads", str(threads)}});
  const auto m = generate_dataset(v, spec, a.out, threads);
  emit("info", "dataset written", {{"out", a.out}, {"rows", str(m.rows.size())}});
}

// ---------------------------------------------------------------- register

struct RegisterArgs {
  std::string moving;
  std::string fixed;
  std::string landmarks_moving;
  std::string landmarks_fixed;
  bool mask = false;
  std::string out;
  std::string report;
  int max_iters = 500;
};

void cmd_register(const RegisterArgs& a) {
  const Volume moving = load_volume(a.moving);
  const Volume fixed = load_volume(a.fixed);
  const Landmarks lm_moving = load_landmarks(a.landmarks_moving, moving.id());
  const Landmarks lm_fixed = load_landmarks(a.landmarks_fixed, fixed.id());
  check_landmarks_inside(lm_moving, moving);
  check_landmarks_inside(lm_fixed, fixed);

  RefineOptions ropts;
  ropts.max_iters = a.max_iters;
  const SimilarityTransform identity;
  const SimilarityTransform fiducial = fit_similarity_landmarks(lm_moving, lm_fixed);

  RegistrationRow row;
  row.volume = moving.id();
  row.initial = landmark_rms(identity, lm_moving, lm_fixed);
  const double fiducial_rms = landmark_rms(fiducial, lm_moving, lm_fixed);

  const std::vector<std::uint8_t> everything(fixed.voxel_count(), 1);
  const auto automatic = refine_similarity_masked(moving, fixed, identity, everything, ropts);
  row.automatic = landmark_rms(automatic.transform, lm_moving, lm_fixed);

  SimilarityTransform chosen = fiducial;
  std::string method = "fiducial";
  if (a.mask) {
    if (!fixed.has_mask()) throw Error(ErrorKind::EmptyMask, "fixed volume carries no mask");
    const auto& m = *fixed.mask();
    const auto masked = refine_similarity_masked(moving, fixed, identity, m, ropts);
    row.mask = landmark_rms(masked.transform, lm_moving, lm_fixed);
    const auto fid_mask = refine_similarity_masked(moving, fixed, fiducial, m, ropts);
    row.fid_mask = landmark_rms(fid_mask.transform, lm_moving, lm_fixed);
    chosen = fid_mask.transform;
    method = "fid+mask";
  }

  ensure_parent(a.out);
  json tj = similarity_to_json(chosen);
  tj["method"] = method;
  write_file_atomic(a.out, tj.dump(2) + "\n");

  std::string csv = "volume,landmarks,initial,fiducial,automatic,mask,fid_mask\n";
  csv += row.volume + "," + std::to_string(lm_moving.points.size()) + "," +
         opt_cell(row.initial) + "," + fixed2(fiducial_rms) + "," + opt_cell(row.automatic) +
         "," + opt_cell(row.mask) + "," + opt_cell(row.fid_mask) + "\n";
  ensure_parent(a.report);
  write_file_atomic(a.report, csv);
  emit("info", "registration done",
      {{"method", method}, {"initial_rms_mm", fmt(*row.initial)},
       {"fiducial_rms_mm", fmt(fiducial_rms)}, {"out", a.out}, {"report", a.report}});
}

// ---------------------------------------------------------------- recover

struct RecoverArgs {
  std::string volume;
  std::string image;
  std::string manifest;
  std::string dataset_dir;
  std::string out;
  int starts = 32;
  std::string metric = "ncc";
  std::string mode = "screened";
  std::string init;
  int screen = 20000;
  int max_iters = 300;
  std::uint64_t seed = 0;
  bool init_from_manifest = false;
  double init_perturb_t = 0.0;
  double init_perturb_rot = 0.0;
  double side = kDefaultSideNorm;
};

json result_to_json(const RecoveryResult& r, const RecoveryConfig& cfg) {
  json j = pose_to_json(r.pose);
  j["score"] = r.score;
  j["flipped"] = pose_to_json(r.flipped_pose);
  j["flipped"]["score"] = r.flipped_score;
  j["best_start"] = r.best_start;
  j["metric"] = to_string(cfg.metric);
  j["starts"] = cfg.n_starts;
  j["mode"] = to_string(cfg.rot_search_mode);
  j["seed"] = cfg.seed;
  return j;
}

void cmd_recover(const RecoverArgs& a, int threads) {
  const Volume v = load_volume(a.volume);
  RecoveryConfig cfg;
  cfg.n_starts = a.starts;
  cfg.metric = metric_from_string(a.metric);
  cfg.rot_search_mode = start_mode_from_string(a.mode);
  cfg.screen_candidates = a.screen;
  cfg.max_iters = a.max_iters;
  cfg.seed = a.seed;
  cfg.side_norm = a.side;
  cfg.threads = threads;
  if (!a.init.empty()) cfg.init = read_pose_arg(a.init);
  cfg.validate();

  if (a.image.empty() == a.manifest.empty()) {
    throw Error(ErrorKind::InvalidArgument, "give exactly one of --image or --manifest");
  }
  ensure_parent(a.out);
  if (!a.image.empty()) {
    PoseRecoverer rec(v, cfg);
    const auto result = rec.recover(read_pgm(a.image));
    write_file_atomic(a.out, result_to_json(result, cfg).dump(2) + "\n");
    emit("info", "pose recovered",
        {{"score", fmt(result.score)}, {"flipped_score", fmt(result.flipped_score)},
         {"seed", str(a.seed)}, {"out", a.out}});
    return;
  }
  const fs::path manifest_path(a.manifest);
  const fs::path dir = a.dataset_dir.empty() ? manifest_path.parent_path() : fs::path(a.dataset_dir);
  const auto manifest = read_manifest(manifest_path);
  BatchRecoveryOptions bopts;
  bopts.init_from_row_pose = a.init_from_manifest;
  bopts.init_perturb_t = a.init_perturb_t;
  bopts.init_perturb_rot_deg = a.init_perturb_rot;
  emit("info", "batch recovery", {{"rows", str(manifest.rows.size())}, {"seed", str(a.seed)}});
  const auto rows = recover_pose_batch(manifest, dir, v, cfg, bopts);
  write_file_atomic(a.out, predictions_to_csv(manifest, rows));
  const auto failed = std::count_if(rows.begin(), rows.end(),
                                    [](const BatchRecoveryRow& r) { return !r.result; });
  emit("info", "predictions written",
      {{"out", a.out}, {"rows", str(rows.size())}, {"failed", str(failed)}});
}

// ---------------------------------------------------------------- evaluate

struct EvaluateArgs {
  std::string gt;
  std::string pred;
  double scale_mm = 1.0;
  std::string out;
};

void cmd_evaluate(const EvaluateArgs& a) {
  if (!(a.scale_mm > 0.0)) throw Error(ErrorKind::InvalidArgument, "--scale-mm must be > 0");
  write_evaluation_report(a.gt, a.pred, a.scale_mm, a.out);
  emit("info", "evaluation written", {{"out", a.out}});
}

// ---------------------------------------------------------------- annotate-serve

struct ServeArgs {
  std::string addr = "127.0.0.1:8080";
  std::string data = "annotations";
  std::vector<std::string> volumes;
  std::string static_dir;
};

void cmd_serve(const ServeArgs& a) {
  const auto colon = a.addr.rfind(':');
  if (colon == std::string::npos) throw Error(ErrorKind::InvalidArgument, "--addr must be host:port");
  const std::string host = a.addr.substr(0, colon);
  const int port = std::atoi(a.addr.c_str() + colon + 1);
  if (port <= 0 || port > 65535) throw Error(ErrorKind::InvalidArgument, "bad port in --addr");

  AnnotationService service(a.data);
  for (const auto& p : a.volumes) {
    if (fs::is_directory(p)) {
      service.load_volume_dir(p);
    } else {
      service.add_volume(std::make_shared<const Volume>(load_volume(p)));
    }
  }
  httplib::Server server;
  register_routes(server, service,
                  a.static_dir.empty() ? std::nullopt : std::optional<fs::path>(a.static_dir));
  emit("info", "listening",
      {{"addr", a.addr}, {"data", a.data}, {"volumes", str(service.volumes().size())}});
  if (!server.listen(host, port)) throw Error(ErrorKind::IoError, "cannot listen on " + a.addr);
}

// ---------------------------------------------------------------- loocv

struct LoocvArgs {
  std::vector<std::string> volumes;
  int n_test = 8;
  int starts = 32;
  int screen = 20000;
  int max_iters = 300;
  std::string metric = "ncc";
  std::uint64_t seed = 0;
  std::string out;
};

void cmd_loocv(const LoocvArgs& a, int threads) {
  LoocvOptions o;
  for (const auto& v : a.volumes) o.volumes.emplace_back(v);
  o.n_test = a.n_test;
  o.seed = a.seed;
  o.recovery.n_starts = a.starts;
  o.recovery.screen_candidates = a.screen;
  o.recovery.max_iters = a.max_iters;
  o.recovery.metric = metric_from_string(a.metric);
  o.recovery.threads = threads;
  o.out_dir = a.out;
  const auto r = run_loocv(o);
  emit("info", "loocv done",
      {{"folds", str(r.folds.size())},
       {"median_mm", fmt(r.aggregate.translation.median)},
       {"median_deg", fmt(r.aggregate.rotation.median)},
       {"fixed_point", r.fixed_point_ok ? "ok" : "violated"},
       {"out", a.out}});
  if (!r.fixed_point_ok) throw Error(ErrorKind::InvalidArgument, "aggregate fixed point violated");
}

bool same_report(const FoldReport& a, const FoldReport& b) {
  auto eq = [](const Summary& x, const Summary& y) {
    auto close = [](double u, double w) { return std::abs(u - w) <= 1e-12 * std::max(1.0, std::abs(u)); };
    return close(x.median, y.median) && close(x.mean, y.mean) && close(x.sd, y.sd) &&
           close(x.min, y.min) && close(x.max, y.max);
  };
  return eq(a.translation, b.translation) && eq(a.rotation, b.rotation);
}

double nonzero_fraction(const SliceImage& img) {
  const auto n = std::count_if(img.pixels.begin(), img.pixels.end(),
                               [](std::uint8_t p) { return p != 0; });
  return static_cast<double>(n) / static_cast<double>(img.pixels.size());
}

}  // namespace

LoocvResult run_loocv(const LoocvOptions& opts) {
  if (opts.volumes.size() < 2) {
    throw Error(ErrorKind::InvalidArgument, "loocv needs at least two volumes");
  }
  if (opts.n_test < 1) throw Error(ErrorKind::InvalidArgument, "--n-test must be >= 1");
  opts.recovery.validate();

  std::vector<Volume> volumes;
  for (const auto& p : opts.volumes) volumes.push_back(load_volume(p));
  for (std::size_t i = 0; i < volumes.size(); ++i) {
    for (std::size_t j = i + 1; j < volumes.size(); ++j) {
      if (volumes[i].id() == volumes[j].id()) {
        throw Error(ErrorKind::InvalidArgument, "duplicate volume id '" + volumes[i].id() + "'");
      }
    }
  }
  std::vector<std::unique_ptr<PoseRecoverer>> recoverers;
  for (const auto& v : volumes) recoverers.push_back(std::make_unique<PoseRecoverer>(v, opts.recovery));

  fs::create_directories(opts.out_dir);
  LoocvResult out;
  std::vector<std::vector<ErrorRecord>> fold_records;

  SamplingSpec draw;
  for (std::size_t f = 0; f < volumes.size(); ++f) {
    const Volume& held = volumes[f];
    const fs::path fold_dir = opts.out_dir / ("fold_" + held.id());
    fs::create_directories(fold_dir / "images");
    std::mt19937_64 rng(derive_seed(opts.seed, f));

    DatasetManifest gt;
    std::vector<SliceImage> images;
    int attempts = 0;
    while (static_cast<int>(gt.rows.size()) < opts.n_test) {
      if (++attempts > 1000 * opts.n_test) {
        throw Error(ErrorKind::InvalidArgument, "cannot find informative test slices in " + held.id());
      }
      const Pose6D pose = snap_to_csv_precision(sample_random_pose(rng, draw));
      SliceImage img = extract_slice(held, pose, opts.recovery.side_norm);
      if (nonzero_fraction(img) < opts.min_content) continue;
      char name[64];
      std::snprintf(name, sizeof name, "images/%s_%04zu.pgm", held.id().c_str(), gt.rows.size());
      write_pgm(fold_dir / name, img.gray());
      gt.rows.push_back({name, held.id(), pose, Category::Random, std::nullopt});
      images.push_back(std::move(img));
    }
    write_file_atomic(fold_dir / "manifest.csv", manifest_to_csv(gt));

    std::vector<std::string> refs;
    for (std::size_t r = 0; r < volumes.size(); ++r) {
      if (r != f) refs.push_back(volumes[r].id());
    }
    out.references.push_back(refs);

    DatasetManifest pred = gt;
    std::vector<BatchRecoveryRow> rows;
    for (std::size_t i = 0; i < images.size(); ++i) {
      BatchRecoveryRow row;
      row.row = i;
      RecoveryConfig cfg = opts.recovery;
      cfg.seed = derive_seed(derive_seed(opts.seed, f), 1000 + i);
      for (std::size_t r = 0; r < volumes.size(); ++r) {
        if (r == f) continue;
        auto result = recoverers[r]->recover(images[i].gray(), cfg);
        if (!row.result || result.score > row.result->score) {
          row.result = std::move(result);
          pred.rows[i].volume_id = volumes[r].id();
        }
      }
      rows.push_back(std::move(row));
      emit("info", "loocv slice",
          {{"fold", held.id()}, {"slice", str(i)}, {"ref", pred.rows[i].volume_id},
           {"score", fmt(rows.back().result->score)}});
    }
    const fs::path pred_path = fold_dir / "predictions.csv";
    write_file_atomic(pred_path, predictions_to_csv(pred, rows));
    write_evaluation_report(fold_dir / "manifest.csv", pred_path, held.scale_mm_per_norm(),
                            fold_dir / "report");

    auto joined = join_predictions(gt, pred_path, held.scale_mm_per_norm());
    out.folds.push_back(distribution_stats(joined.records, held.id()));
    fold_records.push_back(std::move(joined.records));
  }

  out.aggregate = loocv_aggregate(out.folds);
  out.pooled = pooled_aggregate(fold_records);
  out.pooled.fold_id = "Pooled";
  out.fixed_point_ok = out.folds.size() == volumes.size();
  for (const auto& fold : out.folds) {
    const std::vector<FoldReport> copies(3, fold);
    out.fixed_point_ok = out.fixed_point_ok && same_report(loocv_aggregate(copies), fold);
  }

  std::vector<FoldReport> table = out.folds;
  table.push_back(out.aggregate);
  table.push_back(out.pooled);
  write_file_atomic(opts.out_dir / "folds.csv", fold_report_csv(table));
  std::string md = "# Leave-one-volume-out results\n\n";
  md += "Translation in mm (scaled by the held-out volume), rotation in degrees. ";
  md += "SD is the population SD. The averaged row is the mean of the per-fold statistics; ";
  md += "the pooled row uses all records together.\n\n";
  md += render_fold_table(table);
  md += "\nFixed-point check: " + std::string(out.fixed_point_ok ? "ok" : "violated") + "\n";
  write_file_atomic(opts.out_dir / "report.md", md);

  json cfg = {{"seed", opts.seed},
              {"n_test", opts.n_test},
              {"min_content", opts.min_content},
              {"n_starts", opts.recovery.n_starts},
              {"metric", to_string(opts.recovery.metric)},
              {"mode", to_string(opts.recovery.rot_search_mode)},
              {"screen_candidates", opts.recovery.screen_candidates},
              {"max_iters", opts.recovery.max_iters},
              {"fixed_point_ok", out.fixed_point_ok}};
  json folds = json::array();
  for (std::size_t f = 0; f < volumes.size(); ++f) {
    folds.push_back({{"held_out", volumes[f].id()},
                     {"volume", opts.volumes[f].string()},
                     {"references", out.references[f]}});
  }
  cfg["folds"] = folds;
  write_file_atomic(opts.out_dir / "loocv.json", cfg.dump(2) + "\n");
  return out;
}

int run(int argc, const char* const* argv) {
  CLI::App app{"Ultrasound plane-pose tooling", "planepose"};
  app.set_config("--config", "", "TOML config file; command-line flags take precedence");
  app.allow_config_extras(false);
  app.require_subcommand(1);
  int threads = 1;
  app.add_option("--threads", threads, "Worker threads")->check(CLI::Range(1, 256));

  PhantomArgs pa;
  auto* phantom = app.add_subcommand("phantom", "Write a synthetic head phantom volume");
  phantom->add_option("--seed", pa.seed)->required();
  phantom->add_option("--out", pa.out, "Volume header path (.json)")->required();
  phantom->add_option("--dims", pa.dims)->expected(3);
  phantom->add_option("--spacing", pa.spacing, "Voxel spacing in mm");
  phantom->add_option("--ga", pa.ga, "Gestational age in weeks (18..26)");
  phantom->add_option("--landmarks", pa.landmarks, "Also write the phantom's landmarks CSV");

  SliceArgs sa;
  auto* slice = app.add_subcommand("slice", "Extract one 128x128 slice as PGM");
  slice->add_option("--volume", sa.volume)->required();
  slice->add_option("--pose", sa.pose, "Pose JSON file or inline JSON (default identity)");
  slice->add_option("--out", sa.out)->required();
  slice->add_option("--side", sa.side, "Plane side length, normalized units");

  GenArgs ga;
  auto* gen = app.add_subcommand("genplanes", "Generate a slice dataset with manifest");
  gen->add_option("--volume", ga.volume)->required();
  gen->add_option("--out", ga.out)->required();
  gen->add_option("--n-random", ga.n_random);
  gen->add_option("--n-near", ga.n_near);
  gen->add_option("--seed", ga.seed)->required();
  gen->add_option("--sp-pose", ga.sp_pose, "Standard-plane pose JSON");
  gen->add_option("--augment-strength", ga.augment_strength)->check(CLI::Range(0.0, 1.0));
  gen->add_option("--t-range", ga.t_half_range, "Half-width of the translation box");
  gen->add_option("--near-t-step", ga.near_t_step);
  gen->add_option("--near-rot-step", ga.near_rot_step);
  gen->add_option("--side", ga.side);

  RegisterArgs ra;
  auto* reg = app.add_subcommand("register", "Similarity registration with a report");
  reg->add_option("--moving", ra.moving)->required();
  reg->add_option("--fixed", ra.fixed)->required();
  reg->add_option("--landmarks-moving", ra.landmarks_moving)->required();
  reg->add_option("--landmarks-fixed", ra.landmarks_fixed)->required();
  reg->add_flag("--mask", ra.mask, "Refine with the fixed volume's mask");
  reg->add_option("--out", ra.out)->required();
  reg->add_option("--report", ra.report)->required();
  reg->add_option("--max-iters", ra.max_iters);

  RecoverArgs rc;
  auto* rec = app.add_subcommand("recover", "Recover slice poses by image registration");
  rec->add_option("--volume", rc.volume)->required();
  rec->add_option("--image", rc.image, "Single PGM image");
  rec->add_option("--manifest", rc.manifest, "Batch mode: dataset manifest");
  rec->add_option("--dataset-dir", rc.dataset_dir, "Image root (default: manifest directory)");
  rec->add_option("--out", rc.out, "pose.json, or predictions CSV in batch mode")->required();
  rec->add_option("--starts", rc.starts);
  rec->add_option("--metric", rc.metric)->check(CLI::IsMember({"ncc", "msd"}));
  rec->add_option("--mode", rc.mode)->check(CLI::IsMember({"screened", "uniform", "around-init"}));
  rec->add_option("--init", rc.init, "Initial pose JSON (around-init mode)");
  rec->add_option("--screen", rc.screen, "Screened-mode candidate count");
  rec->add_option("--max-iters", rc.max_iters);
  rec->add_option("--seed", rc.seed);
  rec->add_flag("--init-from-manifest", rc.init_from_manifest);
  rec->add_option("--init-perturb-t", rc.init_perturb_t);
  rec->add_option("--init-perturb-rot", rc.init_perturb_rot);
  rec->add_option("--side", rc.side);

  EvaluateArgs ea;
  auto* eval = app.add_subcommand("evaluate", "Score predictions against a manifest");
  eval->add_option("--gt", ea.gt)->required();
  eval->add_option("--pred", ea.pred)->required();
  eval->add_option("--scale-mm", ea.scale_mm, "mm per normalized unit")->required();
  eval->add_option("--out", ea.out)->required();

  ServeArgs sv;
  auto* serve = app.add_subcommand("annotate-serve", "Run the annotation HTTP service");
  serve->add_option("--addr", sv.addr)->envname("PLANEPOSE_ADDR");
  serve->add_option("--data", sv.data)->envname("PLANEPOSE_DATA");
  serve->add_option("--volumes", sv.volumes, "Volume headers or directories");
  serve->add_option("--static", sv.static_dir, "Directory served at /");

  LoocvArgs la;
  auto* loocv = app.add_subcommand("loocv", "Leave-one-volume-out recovery evaluation");
  loocv->add_option("--volumes", la.volumes)->required()->expected(2, 64);
  loocv->add_option("--n-test", la.n_test);
  loocv->add_option("--starts", la.starts);
  loocv->add_option("--screen", la.screen);
  loocv->add_option("--max-iters", la.max_iters);
  loocv->add_option("--metric", la.metric)->check(CLI::IsMember({"ncc", "msd"}));
  loocv->add_option("--seed", la.seed);
  loocv->add_option("--out", la.out)->required();

  if (argc <= 1) {
    std::cerr << app.help();
    return 2;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n";
    const CLI::App* failed = &app;
    for (auto* sub : app.get_subcommands()) failed = sub;
    std::cerr << failed->help();
    return 2;
  }

  try {
    if (*phantom) cmd_phantom(pa);
    else if (*slice) cmd_slice(sa);
    else if (*gen) cmd_genplanes(ga, threads);
    else if (*reg) cmd_register(ra);
    else if (*rec) cmd_recover(rc, threads);
    else if (*eval) cmd_evaluate(ea);
    else if (*serve) cmd_serve(sv);
    else if (*loocv) cmd_loocv(la, threads);
    return 0;
  } catch (const Error& e) {
    emit("error", e.what(), {{"kind", std::string(to_string(e.kind()))}});
    return 1;
  } catch (const fs::filesystem_error& e) {
    emit("error", e.what(), {{"kind", "IoError"}});
    return 1;
  } catch (const std::exception& e) {
    emit("error", e.what(), {{"kind", "Internal"}});
    return 1;
  }
}

}  // namespace planepose::cli
