#pragma once

#include <cstdint>

#include "planepose/volume.hpp"

namespace planepose {

/// Geometry of the synthetic head phantom, in normalized volume coordinates.
struct PhantomLayout {
  Vec3 semi_axes = Vec3::Ones();  // skull ellipsoid, outer surface
  double shell_fraction = 0.07;   // skull thickness as a fraction of the radius
};

/// Semi-axes grow linearly with gestational age: factor 1 + 0.03·(ga − 23),
/// so 25 w vs 21 w is 1.06 / 0.94 ≈ 1.128 per axis. ga must lie in [18, 26].
PhantomLayout phantom_layout(const Dims& dims, double ga_weeks);

inline constexpr std::uint8_t kPhantomSkull = 235;

/// Deterministic fetal-head-like phantom: bright ellipsoidal skull, textured
/// parenchyma, midline echo, an off-centre dark lens ("ventricle"), a bright
/// blob ("cavum") and a mid-bright plexus blob. The mask is the ellipsoid.
/// Throws BadDims unless every dimension is >= 32.
Volume make_phantom(std::uint64_t seed, Dims dims = {96, 96, 96}, double spacing_mm = 1.0,
                    double ga_weeks = 23.0);

/// Anatomical reference points of the phantom with the same arguments (in
/// mm): the three structure centres and three skull-shell points.
Landmarks phantom_landmarks(std::uint64_t seed, Dims dims = {96, 96, 96}, double spacing_mm = 1.0,
                            double ga_weeks = 23.0);

}  // namespace planepose
