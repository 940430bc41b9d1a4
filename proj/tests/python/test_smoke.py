import math

import numpy as np
import pytest

import planepose as pp


def rz(deg):
    a = math.radians(deg)
    return np.array([[math.cos(a), -math.sin(a), 0.0], [math.sin(a), math.cos(a), 0.0], [0.0, 0.0, 1.0]])


def test_rot6d_roundtrip():
    rng = np.random.default_rng(3)
    v = rng.normal(size=6)
    r = pp.rot6d_to_matrix(v)
    assert np.allclose(r.T @ r, np.eye(3), atol=1e-12)
    assert np.linalg.det(r) == pytest.approx(1.0)
    assert np.allclose(pp.rot6d_to_matrix(pp.matrix_to_rot6d(r)), r, atol=1e-12)


def test_geodesic_and_chordal_mean():
    assert pp.geodesic_deg(np.eye(3), rz(30)) == pytest.approx(30.0)
    mean = pp.chordal_mean([rz(10), rz(-10)])
    assert np.allclose(mean, np.eye(3), atol=1e-12)
    with pytest.raises(pp.PlaneposeError):
        pp.chordal_mean([])


def test_pose_set_stats():
    poses = [pp.Pose([0.0, 0.0, 0.0], rz(10)), pp.Pose([0.1, 0.0, 0.0], rz(-10))]
    s = pp.pose_set_stats(poses, 100.0)
    assert s["rms_translation"] == pytest.approx(5.0)
    assert s["rms_rotation_deg"] == pytest.approx(10.0)


def test_pose_json_roundtrip():
    p = pp.Pose([0.1, -0.2, 0.3], [0.9, 0.1, 0.2, 0.3])
    assert pp.Pose.from_json(p.to_json()) == p
    assert np.linalg.norm(p.q) == pytest.approx(1.0)


def test_phantom_slice():
    v = pp.make_phantom(3, [40, 40, 40])
    assert v.dims == [40, 40, 40]
    vox = v.voxels()
    assert vox.shape == (40, 40, 40)
    img = pp.extract_slice(v, pp.Pose.identity())
    assert img.shape == (128, 128)
    assert img.dtype == np.uint8
    assert img.max() > 0
    again = pp.extract_slice(pp.make_phantom(3, [40, 40, 40]), pp.Pose.identity())
    assert np.array_equal(img, again)


def test_fold_average():
    t, r = pp.fold_average_medians([2.0, 4.0], [1.0, 3.0])
    assert (t, r) == (3.0, 2.0)
