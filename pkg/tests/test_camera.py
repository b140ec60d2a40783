from __future__ import annotations

import numpy as np
import pytest

from graspcheck.camera import CameraModel, look_at_pose, pan_tilt_offset


def make_camera(**overrides) -> CameraModel:
    params = dict(fx=500.0, fy=500.0, cx=320.0, cy=240.0, width=640, height=480)
    params.update(overrides)
    return CameraModel(**params)


def test_point_on_axis_projects_to_principal_point():
    cam = make_camera()
    uv, z = cam.project(np.array([[0.0, 0.0, 1.0]]))
    np.testing.assert_allclose(uv[0], [320.0, 240.0])
    assert z[0] == 1.0


def test_projection_closed_form():
    cam = make_camera()
    uv, _ = cam.project(np.array([[0.2, -0.1, 2.0]]))
    np.testing.assert_allclose(uv[0], [320.0 + 500.0 * 0.1, 240.0 - 500.0 * 0.05])


def test_behind_camera_not_in_frustum():
    cam = make_camera()
    mask = cam.in_frustum(np.array([[0.0, 0.0, -1.0], [0.0, 0.0, 1.0]]))
    assert list(mask) == [False, True]


def test_validation():
    with pytest.raises(ValueError):
        make_camera(fx=-1.0)
    with pytest.raises(ValueError):
        make_camera(cx=700.0)


def test_look_at_centers_target():
    eye = (0.0, 0.0, 1.2)
    target = (0.6, 0.1, 0.6)
    cam = make_camera(pose=look_at_pose(eye, target))
    uv, z = cam.project(np.array([target]))
    np.testing.assert_allclose(uv[0], [320.0, 240.0], atol=1e-9)
    assert z[0] > 0


def test_pan_tilt_offset_shifts_projection():
    eye = (0.0, 0.0, 1.2)
    target = (0.6, 0.0, 0.6)
    base = look_at_pose(eye, target)
    cam = make_camera(pose=pan_tilt_offset(base, pan=0.03, tilt=0.0))
    uv, _ = cam.project(np.array([target]))
    # small pan moves the target horizontally by roughly fx * tan(pan)
    assert abs(uv[0][0] - 320.0) == pytest.approx(500.0 * np.tan(0.03), rel=1e-6)
    assert uv[0][1] == pytest.approx(240.0, abs=1e-9)


def test_pan_tilt_preserves_rigidity():
    base = look_at_pose((0, 0, 1.0), (1, 0, 0.5))
    posed = pan_tilt_offset(base, 0.1, -0.05)
    r = posed.rotation
    np.testing.assert_allclose(r @ r.T, np.eye(3), atol=1e-12)
    assert np.linalg.det(r) == pytest.approx(1.0, abs=1e-12)


def test_camera_json_round_trip():
    cam = make_camera(pose=look_at_pose((0, 0, 1.0), (1, 0, 0.5)))
    restored = CameraModel.from_json(cam.from_json(cam.to_json()).to_json())
    np.testing.assert_allclose(restored.pose.rotation, cam.pose.rotation)
    np.testing.assert_allclose(restored.pose.translation, cam.pose.translation)
