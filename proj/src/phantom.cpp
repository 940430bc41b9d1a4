#include "planepose/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "planepose/error.hpp"

namespace planepose {

namespace {

struct Wave {
  Vec3 k;
  double phase;
  double amplitude;
};

std::vector<Wave> draw_waves(std::mt19937_64& rng, int count, double min_cycles,
                             double max_cycles, double amplitude) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<Wave> waves;
  for (int i = 0; i < count; ++i) {
    Vec3 dir(gauss(rng), gauss(rng), gauss(rng));
    dir.normalize();
    // cycles across the [-1, 1] span
    const double cycles = min_cycles + (max_cycles - min_cycles) * uni(rng);
    waves.push_back({dir * (kPi * cycles), 2.0 * kPi * uni(rng), amplitude / count});
  }
  return waves;
}

double eval_waves(const std::vector<Wave>& waves, const Vec3& p) {
  double s = 0.0;
  for (const auto& w : waves) s += w.amplitude * std::sin(w.k.dot(p) + w.phase);
  return s;
}

// 1 inside, 0 outside, linear ramp of `width` across the boundary at d = 0.
double soft_inside(double d, double width) { return std::clamp(0.5 - d / width, 0.0, 1.0); }

struct Structures {
  std::vector<Wave> coarse, fine;
  Vec3 ventricle_c, cavum_c, plexus_c;  // ellipsoid-relative
};

Structures draw_structures(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Structures s;
  s.coarse = draw_waves(rng, 5, 1.2, 2.6, 70.0);
  s.fine = draw_waves(rng, 7, 4.0, 8.0, 36.0);
  std::uniform_real_distribution<double> jitter(-0.04, 0.04);
  s.ventricle_c = Vec3(0.30 + jitter(rng), 0.10 + jitter(rng), 0.08 + jitter(rng));
  s.cavum_c = Vec3(-0.06 + jitter(rng), 0.40 + jitter(rng), -0.05 + jitter(rng));
  s.plexus_c = Vec3(-0.32 + jitter(rng), -0.30 + jitter(rng), 0.28 + jitter(rng));
  return s;
}

}  // namespace

PhantomLayout phantom_layout(const Dims& dims, double ga_weeks) {
  if (!(ga_weeks >= 18.0 && ga_weeks <= 26.0)) {
    throw Error(ErrorKind::InvalidArgument, "ga_weeks must be within [18, 26]");
  }
  const int largest = *std::max_element(dims.begin(), dims.end());
  const double f = 1.0 + 0.03 * (ga_weeks - 23.0);
  PhantomLayout out;
  const Vec3 base(0.92, 0.80, 0.72);
  for (int a = 0; a < 3; ++a) {
    const double half = static_cast<double>(dims[a] - 1) / (largest - 1);
    out.semi_axes[a] = base[a] * half * f;
  }
  return out;
}

Volume make_phantom(std::uint64_t seed, Dims dims, double spacing_mm, double ga_weeks) {
  for (int n : dims) {
    if (n < 32) throw Error(ErrorKind::BadDims, "phantom dims must all be >= 32");
  }
  if (!(spacing_mm > 0.0)) throw Error(ErrorKind::BadDims, "spacing must be positive");
  const PhantomLayout layout = phantom_layout(dims, ga_weeks);
  const Vec3& ax = layout.semi_axes;

  const Structures st = draw_structures(seed);
  const auto& coarse = st.coarse;
  const auto& fine = st.fine;
  const Vec3& ventricle_c = st.ventricle_c;
  const Vec3 ventricle_r(0.10, 0.34, 0.16);
  const Vec3& cavum_c = st.cavum_c;
  const double cavum_r = 0.09;
  const Vec3& plexus_c = st.plexus_c;
  const double plexus_r = 0.15;

  Volume proto(dims, spacing_mm, std::vector<std::uint8_t>(
                                     static_cast<std::size_t>(dims[0]) * dims[1] * dims[2]));
  const double voxel = 1.0 / proto.half_extent_voxels();  // normalized units per voxel
  const double min_axis = ax.minCoeff();

  std::vector<std::uint8_t> vox(proto.voxel_count());
  std::vector<std::uint8_t> mask(proto.voxel_count());
  for (int k = 0; k < dims[2]; ++k) {
    for (int j = 0; j < dims[1]; ++j) {
      for (int i = 0; i < dims[0]; ++i) {
        const Vec3 p = proto.voxel_to_normalized(Vec3(i, j, k));
        const Vec3 e = p.cwiseQuotient(ax);
        const double r = e.norm();
        const std::size_t idx = proto.index(i, j, k);
        // approximate signed distance to the outer surface, normalized units
        const double d_out = (r - 1.0) * min_axis;
        const double in_head = soft_inside(d_out, 1.5 * voxel);
        mask[idx] = r <= 1.0 ? 1 : 0;
        if (in_head <= 0.0) {
          vox[idx] = 0;
          continue;
        }
        double val = 80.0 + eval_waves(coarse, p) + eval_waves(fine, p);
        const double midline = soft_inside(std::abs(p.x()) - 0.012, 1.5 * voxel);
        val += (165.0 - val) * midline;
        const double dv = ((e - ventricle_c).cwiseQuotient(ventricle_r).norm() - 1.0) * 0.1;
        val += (22.0 - val) * soft_inside(dv, 1.5 * voxel);
        const double dc = ((e - cavum_c).norm() - cavum_r) * min_axis;
        val += (205.0 - val) * soft_inside(dc, 1.5 * voxel);
        const double dp = ((e - plexus_c).norm() - plexus_r) * min_axis;
        val += (150.0 - val) * soft_inside(dp, 1.5 * voxel);
        const double d_in = (r - (1.0 - layout.shell_fraction)) * min_axis;
        val += (kPhantomSkull - val) * (1.0 - soft_inside(d_in, 1.5 * voxel));
        val *= in_head;
        vox[idx] = static_cast<std::uint8_t>(std::clamp(std::floor(val + 0.5), 0.0, 255.0));
      }
    }
  }
  return Volume(dims, spacing_mm, std::move(vox), std::move(mask), "phantom");
}

Landmarks phantom_landmarks(std::uint64_t seed, Dims dims, double spacing_mm, double ga_weeks) {
  const PhantomLayout layout = phantom_layout(dims, ga_weeks);
  const Structures st = draw_structures(seed);
  const Volume proto(dims, spacing_mm,
                     std::vector<std::uint8_t>(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2]));
  const Vec3& ax = layout.semi_axes;
  const double inner = 1.0 - 0.5 * layout.shell_fraction;
  const std::pair<const char*, Vec3> named[] = {
      {"ventricle", st.ventricle_c},
      {"cavum", st.cavum_c},
      {"plexus", st.plexus_c},
      {"skull_anterior", Vec3(0.0, inner, 0.0)},
      {"skull_left", Vec3(-inner, 0.0, 0.0)},
      {"skull_vertex", Vec3(0.0, 0.0, inner)},
  };
  Landmarks out;
  out.volume_id = "phantom";
  for (const auto& [label, e] : named) {
    const Vec3 p = e.cwiseProduct(ax);
    out.points.push_back({label, proto.voxel_to_mm(proto.normalized_to_voxel(p))});
  }
  return out;
}

}  // namespace planepose
