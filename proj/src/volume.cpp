#include "planepose/volume.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include <json.hpp>

#include "planepose/error.hpp"
#include "planepose/pose_io.hpp"

namespace planepose {

namespace fs = std::filesystem;
using nlohmann::json;

Volume::Volume(Dims dims, double spacing_mm, std::vector<std::uint8_t> voxels,
               std::optional<std::vector<std::uint8_t>> mask, std::string id)
    : dims_(dims), spacing_(spacing_mm), voxels_(std::move(voxels)), mask_(std::move(mask)),
      id_(std::move(id)) {
  if (!(spacing_mm > 0.0)) throw Error(ErrorKind::BadDims, "spacing must be positive");
  for (int n : dims) {
    if (n < 2) throw Error(ErrorKind::BadDims, "every dimension needs at least 2 voxels");
  }
  const std::size_t n = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  if (voxels_.size() != n) {
    throw Error(ErrorKind::DimensionMismatch, "voxel payload " + std::to_string(voxels_.size()) +
                                                  " != " + std::to_string(n));
  }
  if (mask_ && mask_->size() != n) {
    throw Error(ErrorKind::DimensionMismatch, "mask dims differ from volume dims");
  }
  const int largest = *std::max_element(dims.begin(), dims.end());
  half_ = (largest - 1) / 2.0;
  center_ = Vec3((dims[0] - 1) / 2.0, (dims[1] - 1) / 2.0, (dims[2] - 1) / 2.0);
  for (int a = 0; a < 3; ++a) max_idx_[a] = dims[a] - 1;
}

namespace {

fs::path raw_path_for(const fs::path& header) {
  fs::path raw = header;
  raw.replace_extension(".raw");
  return raw;
}

}  // namespace

Volume load_volume(const fs::path& header_path) {
  std::ifstream hin(header_path);
  if (!hin) throw Error(ErrorKind::IoError, "cannot open " + header_path.string());
  json h;
  try {
    hin >> h;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::FormatError, header_path.string() + ": " + e.what());
  }
  Dims dims{};
  double spacing = 0.0;
  bool has_mask = false;
  try {
    if (h.at("magic").get<std::string>() != "ppvol1") {
      throw Error(ErrorKind::FormatError, "bad magic in " + header_path.string());
    }
    if (h.at("dtype").get<std::string>() != "u8") {
      throw Error(ErrorKind::FormatError, "unsupported dtype");
    }
    const auto& d = h.at("dims");
    if (d.size() != 3) throw Error(ErrorKind::FormatError, "dims must have 3 entries");
    for (int a = 0; a < 3; ++a) dims[a] = d[a].get<int>();
    spacing = h.at("spacing_mm").get<double>();
    has_mask = h.at("mask").get<bool>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::FormatError, header_path.string() + ": " + e.what());
  }
  for (int n : dims) {
    if (n < 2) throw Error(ErrorKind::FormatError, "dims must all be >= 2");
  }

  const fs::path raw = raw_path_for(header_path);
  std::ifstream rin(raw, std::ios::binary);
  if (!rin) throw Error(ErrorKind::IoError, "cannot open " + raw.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(rin)),
                                  std::istreambuf_iterator<char>());
  const std::size_t n = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  const std::size_t expected = has_mask ? 2 * n : n;
  if (bytes.size() != expected) {
    throw Error(ErrorKind::DimensionMismatch, raw.string() + " holds " +
                                                  std::to_string(bytes.size()) + " bytes, header implies " +
                                                  std::to_string(expected));
  }
  std::optional<std::vector<std::uint8_t>> mask;
  if (has_mask) {
    mask.emplace(bytes.begin() + static_cast<std::ptrdiff_t>(n), bytes.end());
    for (auto& m : *mask) m = m ? 1 : 0;
    bytes.resize(n);
  }
  return Volume(dims, spacing, std::move(bytes), std::move(mask), header_path.stem().string());
}

void save_volume(const Volume& v, const fs::path& header_path, const json& meta) {
  json h = {{"magic", "ppvol1"},
                  {"dims", {v.dims()[0], v.dims()[1], v.dims()[2]}},
                  {"spacing_mm", v.spacing_mm()},
                  {"dtype", "u8"},
                  {"mask", v.has_mask()}};
  if (!meta.is_null()) h["meta"] = meta;
  {
    std::ofstream out(header_path);
    if (!out) throw Error(ErrorKind::IoError, "cannot write " + header_path.string());
    out << h.dump(2) << '\n';
    if (!out) throw Error(ErrorKind::IoError, "write failed: " + header_path.string());
  }
  const fs::path raw = raw_path_for(header_path);
  std::ofstream out(raw, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + raw.string());
  out.write(reinterpret_cast<const char*>(v.voxels().data()),
            static_cast<std::streamsize>(v.voxels().size()));
  if (v.has_mask()) {
    out.write(reinterpret_cast<const char*>(v.mask()->data()),
              static_cast<std::streamsize>(v.mask()->size()));
  }
  out.flush();
  if (!out) throw Error(ErrorKind::IoError, "write failed: " + raw.string());
}

const Landmark* Landmarks::find(const std::string& label) const {
  for (const auto& p : points) {
    if (p.label == label) return &p;
  }
  return nullptr;
}

Landmarks load_landmarks(const fs::path& path, std::string volume_id) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  Landmarks out;
  out.volume_id = volume_id.empty() ? path.stem().string() : std::move(volume_id);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::FormatError, "empty landmark file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "label,x_mm,y_mm,z_mm") {
    throw Error(ErrorKind::FormatError, "landmark header must be label,x_mm,y_mm,z_mm");
  }
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 4) throw Error(ErrorKind::FormatError, "landmark row needs 4 fields: " + line);
    if (!seen.insert(f[0]).second) {
      throw Error(ErrorKind::FormatError, "duplicate landmark label " + f[0]);
    }
    out.points.push_back({f[0], Vec3(parse_double(f[1]), parse_double(f[2]), parse_double(f[3]))});
  }
  return out;
}

void save_landmarks(const Landmarks& lm, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out << "label,x_mm,y_mm,z_mm\n";
  char buf[128];
  for (const auto& p : lm.points) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g", p.mm.x(), p.mm.y(), p.mm.z());
    out << p.label << ',' << buf << '\n';
  }
  if (!out) throw Error(ErrorKind::IoError, "write failed: " + path.string());
}

void check_landmarks_inside(const Landmarks& lm, const Volume& v) {
  for (const auto& p : lm.points) {
    for (int a = 0; a < 3; ++a) {
      const double hi = (v.dims()[a] - 1) * v.spacing_mm();
      if (p.mm[a] < 0.0 || p.mm[a] > hi) {
        throw Error(ErrorKind::InvalidArgument, "landmark " + p.label + " outside volume");
      }
    }
  }
}

}  // namespace planepose
