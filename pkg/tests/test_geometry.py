import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import rectified_depth, rotation_matrix

from shuttle3d.errors import BehindCamera, ConfigError, DegenerateRays
from shuttle3d.geometry import (
    CameraModel,
    PixelPoint,
    StereoRig,
    WorldPoint,
    default_rig,
    project,
    rectified_rig,
    reprojection_error,
    rig_from_dict,
    rig_to_dict,
    triangulate,
)


@pytest.fixture
def identity_cam():
    return CameraModel(1000.0, 1000.0, 640.0, 512.0, np.eye(3), np.zeros(3), 1280, 1024)


def identity_rig(baseline=0.8, fx=1000.0):
    left = CameraModel(fx, fx, 640.0, 512.0, np.eye(3), np.zeros(3), 1280, 1024)
    right = CameraModel(fx, fx, 640.0, 512.0, np.eye(3), np.array([-baseline, 0.0, 0.0]), 1280, 1024)
    return StereoRig(left, right, baseline)


def test_project_on_axis(identity_cam):
    assert project(WorldPoint(0, 0, 5), identity_cam) == (640.0, 512.0)


def test_project_offset(identity_cam):
    u, v = project(WorldPoint(0.5, 0, 5), identity_cam)
    assert u == pytest.approx(740.0, abs=1e-12)
    assert v == pytest.approx(512.0, abs=1e-12)


def test_project_behind(identity_cam):
    with pytest.raises(BehindCamera):
        project(WorldPoint(0, 0, -1), identity_cam)
    with pytest.raises(BehindCamera):
        project(WorldPoint(1, 1, 0), identity_cam)


def test_rectified_triangulation_closed_form():
    rig = identity_rig()
    p = triangulate(PixelPoint(740, 512), PixelPoint(640, 512), rig)
    z = rectified_depth(1000.0, 0.8, 100.0)
    assert z == 8.0
    assert p.z == pytest.approx(z, rel=1e-9)
    assert p.x == pytest.approx(0.8, rel=1e-9)
    assert p.y == pytest.approx(0.0, abs=1e-9)


def test_rectified_triangulation_world_frame():
    # level rig looking down +y: camera depth is world y, image row cy is camera height
    rig = rectified_rig(fx=1000.0)
    p = triangulate(PixelPoint(740, 512), PixelPoint(640, 512), rig)
    assert np.allclose(p, (0.8, 8.0, 1.8), rtol=1e-9, atol=1e-12)


def test_coincident_rays_are_degenerate():
    cam = CameraModel(1000.0, 1000.0, 640.0, 512.0, np.eye(3), np.zeros(3), 1280, 1024)
    # identical poses fail the baseline invariant, so bypass it the way a broken calibration would
    rig = object.__new__(StereoRig)
    object.__setattr__(rig, "left", cam)
    object.__setattr__(rig, "right", cam)
    object.__setattr__(rig, "baseline", 0.0)
    with pytest.raises(DegenerateRays):
        triangulate(PixelPoint(700, 500), PixelPoint(700, 500), rig)


def test_zero_disparity_is_degenerate():
    with pytest.raises(DegenerateRays):
        triangulate(PixelPoint(700, 500), PixelPoint(700, 500), identity_rig())


def test_non_finite_pixel_rejected(rig):
    with pytest.raises(DegenerateRays):
        triangulate(PixelPoint(math.nan, 1.0), PixelPoint(1.0, 1.0), rig)


def test_reprojection_error_exact_pair(rig):
    p = WorldPoint(0.3, 7.0, 2.4)
    pl, pr = project(p, rig.left), project(p, rig.right)
    assert reprojection_error(p, pl, pr, rig) == pytest.approx(0.0, abs=1e-9)


def test_reprojection_error_after_noise(rig):
    p = WorldPoint(0.3, 7.0, 2.4)
    pl, pr = project(p, rig.left), project(p, rig.right)
    noisy = PixelPoint(pl.u + 3, pl.v + 4)
    q = triangulate(noisy, pr, rig)
    assert reprojection_error(q, noisy, pr, rig) > 0


def test_reprojection_error_hand_value(rig):
    p = WorldPoint(0.3, 7.0, 2.4)
    pl, pr = project(p, rig.left), project(p, rig.right)
    assert reprojection_error(p, PixelPoint(pl.u + 2, pl.v), pr, rig) == pytest.approx(1.0, abs=1e-9)


def test_default_rig_matches_hardware_geometry(rig):
    assert rig.baseline == 0.8
    assert np.allclose(rig.left.center, (0, 0, 1.8))
    assert np.allclose(rig.right.center, (0.8, 0, 1.8))
    assert np.linalg.norm(rig.left.center - rig.right.center) == pytest.approx(0.8, abs=1e-9)
    assert (rig.left.image_width, rig.left.image_height) == (1280, 1024)
    assert (rig.left.cx, rig.left.cy) == (640.0, 512.0)


def test_camera_invariants():
    with pytest.raises(ConfigError):
        CameraModel(-1.0, 1.0, 640, 512, np.eye(3), np.zeros(3))
    with pytest.raises(ConfigError):
        CameraModel(1.0, 1.0, 2000, 512, np.eye(3), np.zeros(3))
    with pytest.raises(ConfigError):
        CameraModel(1.0, 1.0, 640, 512, 2 * np.eye(3), np.zeros(3))
    with pytest.raises(ConfigError):
        CameraModel(1.0, 1.0, 640, 512, np.diag([1.0, 1.0, -1.0]), np.zeros(3))


def test_baseline_must_match_centers(rig):
    with pytest.raises(ConfigError):
        StereoRig(rig.left, rig.right, 0.5)


def test_rig_json_round_trip(rig):
    again = rig_from_dict(rig_to_dict(rig))
    assert again.left == rig.left and again.right == rig.right and again.baseline == rig.baseline


def test_rig_json_defaults_and_unknown_keys():
    r = rig_from_dict({"baseline_m": 0.8, "height_m": 1.8, "fx": 1200})
    assert r.left == default_rig().left
    with pytest.raises(ConfigError):
        rig_from_dict({"baseline": 0.8})


def test_rig_json_general_pose():
    rot = np.array(rotation_matrix((0, 0, 1), 0.05)) @ rectified_rig().left.rotation
    r = rig_from_dict(
        {
            "baseline_m": 0.8,
            "left_pose": {"rotation": rot.tolist(), "center": [0, 0, 1.8]},
            "right_pose": {"rotation": rot.tolist(), "center": [0.8, 0, 1.8]},
        }
    )
    p = WorldPoint(0.5, 9.0, 3.0)
    q = triangulate(project(p, r.left), project(p, r.right), r)
    assert np.allclose(q, p, atol=1e-9)


def _in_view_point(rig, u, v, depth):
    cam = rig.left
    xc = np.array([(u - cam.cx) / cam.fx * depth, (v - cam.cy) / cam.fy * depth, depth])
    return cam.rotation.T @ (xc - cam.translation)


@settings(max_examples=300, deadline=None)
@given(
    u=st.floats(0, 1279.99),
    v=st.floats(0, 1023.99),
    depth=st.floats(1.0, 30.0),
    yaw=st.floats(-0.1, 0.1),
)
def test_round_trip_property(u, v, depth, yaw):
    base = rectified_rig()
    rot = np.array(rotation_matrix((0, 0, 1), yaw)) @ base.left.rotation
    rig = rig_from_dict(
        {"left_pose": {"rotation": rot.tolist(), "center": [0, 0, 1.8]},
         "right_pose": {"rotation": rot.tolist(), "center": [0.8, 0, 1.8]}}
    )
    p = _in_view_point(rig, u, v, depth)
    try:
        pr = project(p, rig.right)
    except BehindCamera:
        return
    q = triangulate(project(p, rig.left), pr, rig)
    assert np.linalg.norm(np.array(q) - p) < 1e-6


@settings(max_examples=200, deadline=None)
@given(u=st.floats(0, 1279), v=st.floats(0, 1023), d1=st.floats(0.5, 50), d2=st.floats(0.5, 50))
def test_projection_is_depth_invariant_along_ray(u, v, d1, d2):
    rig = default_rig()
    q1 = project(_in_view_point(rig, u, v, d1), rig.left)
    q2 = project(_in_view_point(rig, u, v, d2), rig.left)
    assert abs(q1.u - q2.u) < 1e-9 and abs(q1.v - q2.v) < 1e-9


@settings(max_examples=200, deadline=None)
@given(disparity=st.floats(5, 400), u=st.floats(300, 1000), v=st.floats(0, 1023))
def test_rectified_consistency_property(disparity, u, v):
    rig = identity_rig()
    p = triangulate(PixelPoint(u, v), PixelPoint(u - disparity, v), rig)
    assert p.z == pytest.approx(rectified_depth(1000.0, 0.8, disparity), rel=1e-9)
