#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "planepose/pose.hpp"
#include "planepose/slicer.hpp"
#include "planepose/volume.hpp"

namespace httplib {
class Server;
}

namespace planepose {

/// Hex FNV-1a of the pose's canonical JSON; used as the slice ETag.
std::string pose_hash(const Pose6D& p);

enum class NudgeAxis { Tx, Ty, Tz, Rx, Ry, Rz };
NudgeAxis nudge_axis_from_string(const std::string& s);

/// Translation axes move t along the volume axes; rotation axes turn the
/// plane about its own local axes (x, y in-plane, z the normal).
Pose6D apply_nudge(const Pose6D& p, NudgeAxis axis, int direction, double multiplier,
                   double t_step, double rot_step_deg);

struct SessionState {
  std::string id;
  std::string volume_id;
  Pose6D pose;
  double t_step = 0.01;
  double rot_step_deg = 1.0;
  std::size_t undo_depth = 0;
};

nlohmann::json session_to_json(const SessionState& s);

struct Annotation {
  std::string id;
  std::string volume_id;
  std::string label;
  Pose6D pose;
  std::string annotator;
  std::string timestamp;  // ISO 8601 UTC, millisecond resolution
  std::string snapshot;   // path relative to the data directory
};

nlohmann::json annotation_to_json(const Annotation& a);
Annotation annotation_from_json(const nlohmann::json& j);

/// Append-only JSON-lines store plus PGM snapshots under one directory.
/// Lines that do not parse (a torn final write) are skipped on load.
class AnnotationStore {
 public:
  explicit AnnotationStore(std::filesystem::path data_dir);

  Annotation append(Annotation a, const GrayImage& snapshot);
  /// Timestamp-ordered; empty volume_id lists everything.
  std::vector<Annotation> list(const std::string& volume_id = {}) const;
  const std::filesystem::path& data_dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  mutable std::mutex mu_;
  std::vector<Annotation> items_;
  std::uint64_t next_seq_ = 1;
  bool needs_newline_ = false;
};

/// Session management, rendering and annotation persistence behind the
/// HTTP layer. Sessions live in memory only.
class AnnotationService {
 public:
  static constexpr std::size_t kUndoLimit = 256;

  explicit AnnotationService(std::filesystem::path data_dir);

  void add_volume(std::shared_ptr<const Volume> v);
  /// Loads every `*.json` volume header in `dir`.
  void load_volume_dir(const std::filesystem::path& dir);
  std::vector<std::shared_ptr<const Volume>> volumes() const;

  SessionState create_session(const std::string& volume_id, double t_step = 0.01,
                              double rot_step_deg = 1.0);
  SessionState session(const std::string& id) const;
  SessionState nudge(const std::string& id, NudgeAxis axis, int direction, double multiplier);
  SessionState undo(const std::string& id);
  void close_session(const std::string& id);

  /// PGM bytes of the slice at the session's current pose, plus that pose.
  std::pair<std::string, Pose6D> render(const std::string& id) const;

  Annotation save_annotation(const std::string& id, const std::string& label,
                             const std::string& annotator);
  std::vector<Annotation> list_annotations(const std::string& volume_id = {}) const;

 private:
  struct Session {
    mutable std::mutex mu;
    SessionState state;
    std::shared_ptr<const Volume> volume;
    std::deque<Pose6D> undo;
  };
  std::shared_ptr<Session> find(const std::string& id) const;
  std::shared_ptr<const Volume> find_volume(const std::string& id) const;

  mutable std::shared_mutex mu_;
  std::map<std::string, std::shared_ptr<const Volume>> volumes_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_session_ = 1;
  AnnotationStore store_;
};

/// Installs the JSON/HTTP routes on `server`. When `static_dir` is set it is
/// served at "/" (the browser client bundle).
void register_routes(httplib::Server& server, AnnotationService& service,
                     const std::optional<std::filesystem::path>& static_dir = std::nullopt);

}  // namespace planepose
