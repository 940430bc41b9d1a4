"""Plane pose math, phantom volumes and slicing."""

from ._planepose import (
    PlaneposeError,
    Pose,
    Volume,
    chordal_cost,
    chordal_mean,
    extract_slice,
    fold_average_medians,
    geodesic_deg,
    load_volume,
    make_phantom,
    matrix_to_rot6d,
    pose_set_stats,
    quaternion_angle_deg,
    rot6d_to_matrix,
)

__all__ = [
    "PlaneposeError",
    "Pose",
    "Volume",
    "chordal_cost",
    "chordal_mean",
    "extract_slice",
    "fold_average_medians",
    "geodesic_deg",
    "load_volume",
    "make_phantom",
    "matrix_to_rot6d",
    "pose_set_stats",
    "quaternion_angle_deg",
    "rot6d_to_matrix",
]
