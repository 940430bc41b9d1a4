#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "planepose/error.hpp"
#include "planepose/eval.hpp"
#include "planepose/phantom.hpp"
#include "planepose/pose.hpp"
#include "planepose/pose_io.hpp"
#include "planepose/slicer.hpp"
#include "planepose/volume.hpp"

namespace py = pybind11;
using namespace planepose;

namespace {

Quat quat_from(const Eigen::Vector4d& wxyz) { return Quat(wxyz[0], wxyz[1], wxyz[2], wxyz[3]); }
Eigen::Vector4d quat_to(const Quat& q) { return {q.w(), q.x(), q.y(), q.z()}; }

std::vector<RotationMatrix> rotations_from(const std::vector<Mat3>& ms) {
  std::vector<RotationMatrix> out;
  out.reserve(ms.size());
  for (const auto& m : ms) out.emplace_back(m);
  return out;
}

py::array_t<std::uint8_t> image_array(const std::vector<std::uint8_t>& px, int h, int w) {
  py::array_t<std::uint8_t> a({h, w});
  std::copy(px.begin(), px.end(), a.mutable_data());
  return a;
}

}  // namespace

PYBIND11_MODULE(_planepose, m) {
  m.doc() = "Plane pose math, phantom volumes and slicing.";

  py::register_exception<Error>(m, "PlaneposeError", PyExc_ValueError);

  py::class_<Pose6D>(m, "Pose")
      .def(py::init([](const Vec3& t, const Eigen::Vector4d& q) { return Pose6D(t, quat_from(q)); }),
           py::arg("t"), py::arg("q"))
      .def(py::init([](const Vec3& t, const Mat3& r) { return Pose6D(t, RotationMatrix(r)); }),
           py::arg("t"), py::arg("rotation"))
      .def_static("identity", &Pose6D::identity)
      .def_property_readonly("t", [](const Pose6D& p) { return Vec3(p.t()); })
      .def_property_readonly("q", [](const Pose6D& p) { return quat_to(p.q()); }, "(w, x, y, z)")
      .def_property_readonly("rotation", [](const Pose6D& p) { return p.rotation().matrix(); })
      .def("compose", &pose_compose)
      .def("inverse", &pose_inverse)
      .def("to_json", [](const Pose6D& p) { return pose_to_json(p).dump(); })
      .def_static("from_json", [](const std::string& s) { return pose_from_json(nlohmann::json::parse(s)); })
      .def(py::self == py::self)
      .def("__repr__", [](const Pose6D& p) { return "Pose(" + pose_to_json(p).dump() + ")"; });

  m.def("rot6d_to_matrix", [](const Eigen::Matrix<double, 6, 1>& v) {
    return rot6d_to_matrix(Rot6D{v}).matrix();
  });
  m.def("matrix_to_rot6d", [](const Mat3& r) { return Eigen::Matrix<double, 6, 1>(matrix_to_rot6d(RotationMatrix(r)).r); });
  m.def("geodesic_deg", [](const Mat3& a, const Mat3& b) {
    return geodesic_deg(RotationMatrix(a), RotationMatrix(b));
  });
  m.def("quaternion_angle_deg", [](const Eigen::Vector4d& a, const Eigen::Vector4d& b) {
    return quaternion_angle_deg(quat_from(a), quat_from(b));
  });
  m.def("chordal_mean", [](const std::vector<Mat3>& rs) { return chordal_mean(rotations_from(rs)).matrix(); });
  m.def("chordal_cost", [](const std::vector<Mat3>& rs, const Mat3& c) {
    return chordal_cost(rotations_from(rs), RotationMatrix(c));
  });
  m.def(
      "pose_set_stats",
      [](const std::vector<Pose6D>& poses, double scale) {
        const auto s = pose_set_stats(poses, scale);
        py::dict d;
        d["centroid"] = Vec3(s.centroid);
        d["rms_translation"] = s.rms_translation;
        d["mean_rotation"] = s.mean_rotation.matrix();
        d["rms_rotation_deg"] = s.rms_rotation_deg;
        d["translation_dist"] = s.per_item_translation_dist;
        d["rotation_dist_deg"] = s.per_item_rotation_dist_deg;
        return d;
      },
      py::arg("poses"), py::arg("translation_scale") = 1.0);
  m.def("fold_average_medians", [](const std::vector<double>& t, const std::vector<double>& r) {
    if (t.size() != r.size()) throw Error(ErrorKind::DimensionMismatch, "fold lists differ in length");
    std::vector<FoldReport> folds(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
      folds[i].translation.median = t[i];
      folds[i].rotation.median = r[i];
    }
    const auto agg = loocv_aggregate(folds);
    return py::make_tuple(agg.translation.median, agg.rotation.median);
  });

  py::class_<Volume>(m, "Volume")
      .def_property_readonly("dims", [](const Volume& v) { return v.dims(); })
      .def_property_readonly("spacing_mm", &Volume::spacing_mm)
      .def_property_readonly("scale_mm_per_norm", &Volume::scale_mm_per_norm)
      .def_property_readonly("id", &Volume::id)
      .def("voxels", [](const Volume& v) {
        // (z, y, x) view of the x-fastest grid
        const auto& d = v.dims();
        py::array_t<std::uint8_t> a({d[2], d[1], d[0]});
        std::copy(v.voxels().begin(), v.voxels().end(), a.mutable_data());
        return a;
      })
      .def("save", [](const Volume& v, const std::string& path) { save_volume(v, path); });
  m.def("load_volume", [](const std::string& path) { return load_volume(path); });
  m.def("make_phantom", &make_phantom, py::arg("seed"), py::arg("dims") = Dims{96, 96, 96},
        py::arg("spacing_mm") = 1.0, py::arg("ga_weeks") = 23.0);
  m.def(
      "extract_slice",
      [](const Volume& v, const Pose6D& p, double side) {
        return image_array(extract_slice(v, p, side).pixels, SliceImage::kSize, SliceImage::kSize);
      },
      py::arg("volume"), py::arg("pose"), py::arg("side_norm") = kDefaultSideNorm);
}
