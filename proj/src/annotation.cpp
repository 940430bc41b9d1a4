#include "planepose/annotation.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include <httplib.h>

#include "planepose/error.hpp"
#include "planepose/pose_io.hpp"
#include "planepose/util.hpp"

namespace planepose {

namespace fs = std::filesystem;
using nlohmann::json;

std::string pose_hash(const Pose6D& p) { return hex64(fnv1a64(pose_to_json(p).dump())); }

NudgeAxis nudge_axis_from_string(const std::string& s) {
  if (s == "tx") return NudgeAxis::Tx;
  if (s == "ty") return NudgeAxis::Ty;
  if (s == "tz") return NudgeAxis::Tz;
  if (s == "rx") return NudgeAxis::Rx;
  if (s == "ry") return NudgeAxis::Ry;
  if (s == "rz") return NudgeAxis::Rz;
  throw Error(ErrorKind::InvalidArgument, "axis must be one of tx,ty,tz,rx,ry,rz");
}

Pose6D apply_nudge(const Pose6D& p, NudgeAxis axis, int direction, double multiplier,
                   double t_step, double rot_step_deg) {
  if (direction != 1 && direction != -1) {
    throw Error(ErrorKind::InvalidArgument, "direction must be +1 or -1");
  }
  if (!(multiplier >= 0.0)) throw Error(ErrorKind::InvalidArgument, "multiplier must be >= 0");
  if (multiplier == 0.0) return p;
  const double amount = direction * multiplier;
  switch (axis) {
    case NudgeAxis::Tx: return Pose6D(p.t() + Vec3::UnitX() * amount * t_step, p.q());
    case NudgeAxis::Ty: return Pose6D(p.t() + Vec3::UnitY() * amount * t_step, p.q());
    case NudgeAxis::Tz: return Pose6D(p.t() + Vec3::UnitZ() * amount * t_step, p.q());
    default: break;
  }
  const Vec3 local = axis == NudgeAxis::Rx ? Vec3::UnitX()
                     : axis == NudgeAxis::Ry ? Vec3::UnitY()
                                             : Vec3::UnitZ();
  return Pose6D(p.t(), p.q() * Quat(Eigen::AngleAxisd(deg2rad(amount * rot_step_deg), local)));
}

json session_to_json(const SessionState& s) {
  return json{{"id", s.id},
              {"volume_id", s.volume_id},
              {"pose", pose_to_json(s.pose)},
              {"pose_hash", pose_hash(s.pose)},
              {"t_step", s.t_step},
              {"rot_step_deg", s.rot_step_deg},
              {"undo_depth", s.undo_depth}};
}

json annotation_to_json(const Annotation& a) {
  return json{{"id", a.id},
              {"volume_id", a.volume_id},
              {"label", a.label},
              {"pose", pose_to_json(a.pose)},
              {"annotator", a.annotator},
              {"timestamp", a.timestamp},
              {"snapshot", a.snapshot}};
}

Annotation annotation_from_json(const json& j) {
  try {
    Annotation a;
    a.id = j.at("id").get<std::string>();
    a.volume_id = j.at("volume_id").get<std::string>();
    a.label = j.at("label").get<std::string>();
    a.pose = pose_from_json(j.at("pose"));
    a.annotator = j.at("annotator").get<std::string>();
    a.timestamp = j.at("timestamp").get<std::string>();
    a.snapshot = j.at("snapshot").get<std::string>();
    return a;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::FormatError, std::string("annotation: ") + e.what());
  }
}

namespace {

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch());
  const std::time_t secs = static_cast<std::time_t>(ms.count() / 1000);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec,
                static_cast<int>(ms.count() % 1000));
  return buf;
}

}  // namespace

AnnotationStore::AnnotationStore(fs::path data_dir) : dir_(std::move(data_dir)) {
  std::error_code ec;
  fs::create_directories(dir_ / "snapshots", ec);
  if (ec) throw Error(ErrorKind::StorageError, "cannot create " + dir_.string() + ": " + ec.message());
  const fs::path log = dir_ / "annotations.jsonl";
  if (!fs::exists(log)) return;
  const std::string data = read_file(log);
  needs_newline_ = !data.empty() && data.back() != '\n';
  std::istringstream in(data);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      Annotation a = annotation_from_json(json::parse(line));
      unsigned long long seq = 0;
      if (std::sscanf(a.id.c_str(), "ann-%llu", &seq) == 1 && seq >= next_seq_) next_seq_ = seq + 1;
      items_.push_back(std::move(a));
    } catch (const std::exception&) {
      // torn write
    }
  }
}

Annotation AnnotationStore::append(Annotation a, const GrayImage& snapshot) {
  std::lock_guard lock(mu_);
  char id[32];
  std::snprintf(id, sizeof id, "ann-%06llu", static_cast<unsigned long long>(next_seq_));
  a.id = id;
  a.timestamp = utc_timestamp();
  a.snapshot = "snapshots/" + a.id + ".pgm";
  try {
    write_file_atomic(dir_ / a.snapshot, encode_pgm(snapshot));
    std::ofstream out(dir_ / "annotations.jsonl", std::ios::app | std::ios::binary);
    if (!out) throw Error(ErrorKind::StorageError, "cannot open annotation log");
    if (needs_newline_) out << '\n';
    out << annotation_to_json(a).dump() << '\n';
    out.flush();
    if (!out) throw Error(ErrorKind::StorageError, "annotation log write failed");
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::StorageError) throw;
    throw Error(ErrorKind::StorageError, e.what());
  }
  needs_newline_ = false;
  ++next_seq_;
  items_.push_back(a);
  return a;
}

std::vector<Annotation> AnnotationStore::list(const std::string& volume_id) const {
  std::vector<Annotation> out;
  {
    std::lock_guard lock(mu_);
    for (const auto& a : items_) {
      if (volume_id.empty() || a.volume_id == volume_id) out.push_back(a);
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const Annotation& x, const Annotation& y) {
    return x.timestamp < y.timestamp;
  });
  return out;
}

AnnotationService::AnnotationService(fs::path data_dir) : store_(std::move(data_dir)) {}

void AnnotationService::add_volume(std::shared_ptr<const Volume> v) {
  std::unique_lock lock(mu_);
  volumes_[v->id()] = std::move(v);
}

void AnnotationService::load_volume_dir(const fs::path& dir) {
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    if (entry.path().extension() != ".json") continue;
    add_volume(std::make_shared<const Volume>(load_volume(entry.path())));
  }
  if (ec) throw Error(ErrorKind::IoError, "cannot list " + dir.string() + ": " + ec.message());
}

std::vector<std::shared_ptr<const Volume>> AnnotationService::volumes() const {
  std::shared_lock lock(mu_);
  std::vector<std::shared_ptr<const Volume>> out;
  for (const auto& [id, v] : volumes_) out.push_back(v);
  return out;
}

std::shared_ptr<const Volume> AnnotationService::find_volume(const std::string& id) const {
  std::shared_lock lock(mu_);
  const auto it = volumes_.find(id);
  if (it == volumes_.end()) throw Error(ErrorKind::UnknownVolume, "no volume '" + id + "'");
  return it->second;
}

std::shared_ptr<AnnotationService::Session> AnnotationService::find(const std::string& id) const {
  std::shared_lock lock(mu_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error(ErrorKind::SessionGone, "no session '" + id + "'");
  return it->second;
}

SessionState AnnotationService::create_session(const std::string& volume_id, double t_step,
                                               double rot_step_deg) {
  if (!(t_step > 0.0) || !(rot_step_deg > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "step sizes must be positive");
  }
  auto s = std::make_shared<Session>();
  s->volume = find_volume(volume_id);
  s->state.volume_id = volume_id;
  s->state.t_step = t_step;
  s->state.rot_step_deg = rot_step_deg;
  std::unique_lock lock(mu_);
  s->state.id = "s" + std::to_string(next_session_++);
  sessions_[s->state.id] = s;
  return s->state;
}

SessionState AnnotationService::session(const std::string& id) const {
  auto s = find(id);
  std::lock_guard lock(s->mu);
  return s->state;
}

SessionState AnnotationService::nudge(const std::string& id, NudgeAxis axis, int direction,
                                      double multiplier) {
  auto s = find(id);
  std::lock_guard lock(s->mu);
  const Pose6D next = apply_nudge(s->state.pose, axis, direction, multiplier, s->state.t_step,
                                  s->state.rot_step_deg);
  s->undo.push_back(s->state.pose);
  if (s->undo.size() > kUndoLimit) s->undo.pop_front();
  s->state.pose = next;
  s->state.undo_depth = s->undo.size();
  return s->state;
}

SessionState AnnotationService::undo(const std::string& id) {
  auto s = find(id);
  std::lock_guard lock(s->mu);
  if (!s->undo.empty()) {
    s->state.pose = s->undo.back();
    s->undo.pop_back();
  }
  s->state.undo_depth = s->undo.size();
  return s->state;
}

void AnnotationService::close_session(const std::string& id) {
  std::unique_lock lock(mu_);
  if (sessions_.erase(id) == 0) throw Error(ErrorKind::SessionGone, "no session '" + id + "'");
}

std::pair<std::string, Pose6D> AnnotationService::render(const std::string& id) const {
  auto s = find(id);
  Pose6D pose;
  {
    std::lock_guard lock(s->mu);
    pose = s->state.pose;
  }
  return {encode_pgm(extract_slice(*s->volume, pose).gray()), pose};
}

Annotation AnnotationService::save_annotation(const std::string& id, const std::string& label,
                                              const std::string& annotator) {
  if (label.empty()) throw Error(ErrorKind::InvalidArgument, "label must be nonempty");
  auto s = find(id);
  Annotation a;
  GrayImage snapshot;
  {
    std::lock_guard lock(s->mu);
    a.pose = s->state.pose;
    a.volume_id = s->state.volume_id;
  }
  a.label = label;
  a.annotator = annotator;
  snapshot = extract_slice(*s->volume, a.pose).gray();
  return store_.append(std::move(a), snapshot);
}

std::vector<Annotation> AnnotationService::list_annotations(const std::string& volume_id) const {
  return store_.list(volume_id);
}

namespace {

int http_status(ErrorKind k) {
  switch (k) {
    case ErrorKind::UnknownVolume:
    case ErrorKind::SessionGone: return 404;
    case ErrorKind::StorageError:
    case ErrorKind::IoError: return 500;
    default: return 400;
  }
}

void send_json(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

template <class Fn>
auto guarded(Fn fn) {
  return [fn](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const Error& e) {
      send_json(res, {{"error", std::string(to_string(e.kind()))}, {"message", e.what()}},
                http_status(e.kind()));
    } catch (const json::exception& e) {
      send_json(res, {{"error", "FormatError"}, {"message", e.what()}}, 400);
    }
  };
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  return json::parse(req.body);
}

}  // namespace

void register_routes(httplib::Server& server, AnnotationService& service,
                     const std::optional<fs::path>& static_dir) {
  server.Get("/volumes", guarded([&service](const httplib::Request&, httplib::Response& res) {
    json out = json::array();
    for (const auto& v : service.volumes()) {
      out.push_back({{"id", v->id()},
                     {"dims", {v->dims()[0], v->dims()[1], v->dims()[2]}},
                     {"spacing_mm", v->spacing_mm()},
                     {"scale_mm_per_norm", v->scale_mm_per_norm()}});
    }
    send_json(res, out);
  }));

  server.Post("/sessions", guarded([&service](const httplib::Request& req, httplib::Response& res) {
    const json body = parse_body(req);
    const auto state = service.create_session(body.at("volume_id").get<std::string>(),
                                              body.value("t_step", 0.01),
                                              body.value("rot_step_deg", 1.0));
    send_json(res, session_to_json(state), 201);
  }));

  server.Get(R"(/sessions/([^/]+))",
             guarded([&service](const httplib::Request& req, httplib::Response& res) {
               send_json(res, session_to_json(service.session(req.matches[1])));
             }));

  server.Delete(R"(/sessions/([^/]+))",
                guarded([&service](const httplib::Request& req, httplib::Response& res) {
                  service.close_session(req.matches[1]);
                  res.status = 204;
                }));

  server.Post(R"(/sessions/([^/]+)/nudge)",
              guarded([&service](const httplib::Request& req, httplib::Response& res) {
                const json body = parse_body(req);
                const auto state = service.nudge(
                    req.matches[1], nudge_axis_from_string(body.at("axis").get<std::string>()),
                    body.value("dir", 1), body.value("mult", 1.0));
                send_json(res, session_to_json(state));
              }));

  server.Post(R"(/sessions/([^/]+)/undo)",
              guarded([&service](const httplib::Request& req, httplib::Response& res) {
                send_json(res, session_to_json(service.undo(req.matches[1])));
              }));

  server.Get(R"(/sessions/([^/]+)/slice)",
             guarded([&service](const httplib::Request& req, httplib::Response& res) {
               auto [bytes, pose] = service.render(req.matches[1]);
               const std::string etag = "\"" + pose_hash(pose) + "\"";
               res.set_header("ETag", etag);
               res.set_header("X-Pose-Hash", pose_hash(pose));
               res.set_header("X-Pose", pose_to_json(pose).dump());
               if (req.get_header_value("If-None-Match") == etag) {
                 res.status = 304;
                 return;
               }
               res.set_content(bytes, "image/x-portable-graymap");
             }));

  server.Post(R"(/sessions/([^/]+)/annotations)",
              guarded([&service](const httplib::Request& req, httplib::Response& res) {
                const json body = parse_body(req);
                const auto a = service.save_annotation(req.matches[1],
                                                       body.at("label").get<std::string>(),
                                                       body.value("annotator", std::string()));
                send_json(res, annotation_to_json(a), 201);
              }));

  server.Get("/annotations", guarded([&service](const httplib::Request& req, httplib::Response& res) {
    json out = json::array();
    for (const auto& a : service.list_annotations(req.get_param_value("volume"))) {
      out.push_back(annotation_to_json(a));
    }
    send_json(res, out);
  }));

  if (static_dir) server.set_mount_point("/", static_dir->string());
}

}  // namespace planepose
