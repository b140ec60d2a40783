"""Pinhole camera model used for annotation projection and frustum checks."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import RigidTransform

# points closer than this to the image plane are treated as behind the camera
NEAR_PLANE = 1e-6


@dataclass
class CameraModel:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    pose: RigidTransform = field(default_factory=RigidTransform.identity)  # world -> camera

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx <= self.width and 0 <= self.cy <= self.height):
            raise ValueError("principal point must lie within the image")

    def camera_points(self, world_points: np.ndarray) -> np.ndarray:
        return self.pose.apply(world_points)

    def project(self, world_points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Pixel coordinates and depths for world points; depth ≤ 0 is behind."""
        pc = self.camera_points(np.atleast_2d(world_points))
        z = pc[:, 2]
        safe = np.where(np.abs(z) < NEAR_PLANE, NEAR_PLANE, z)
        u = self.fx * pc[:, 0] / safe + self.cx
        v = self.fy * pc[:, 1] / safe + self.cy
        return np.stack([u, v], axis=1), z

    def in_frustum(self, world_points: np.ndarray) -> np.ndarray:
        """Mask of points in front of the camera projecting inside the image."""
        uv, z = self.project(world_points)
        return (
            (z > NEAR_PLANE)
            & (uv[:, 0] >= 0.0)
            & (uv[:, 0] <= self.width)
            & (uv[:, 1] >= 0.0)
            & (uv[:, 1] <= self.height)
        )

    def to_json(self) -> dict:
        return {
            "fx": float(self.fx),
            "fy": float(self.fy),
            "cx": float(self.cx),
            "cy": float(self.cy),
            "width": int(self.width),
            "height": int(self.height),
            "pose": self.pose.to_json(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "CameraModel":
        return cls(
            fx=float(data["fx"]),
            fy=float(data["fy"]),
            cx=float(data["cx"]),
            cy=float(data["cy"]),
            width=int(data["width"]),
            height=int(data["height"]),
            pose=RigidTransform.from_json(data["pose"]),
        )


def look_at_pose(eye, target, up=(0.0, 0.0, 1.0)) -> RigidTransform:
    """World→camera transform for a camera at ``eye`` looking at ``target``.

    Camera convention: +z forward (optical axis), +x right, +y down.
    """
    eye = np.asarray(eye, dtype=float)
    target = np.asarray(target, dtype=float)
    forward = target - eye
    norm = np.linalg.norm(forward)
    if norm < 1e-12:
        raise ValueError("eye and target coincide")
    forward /= norm
    up = np.asarray(up, dtype=float)
    right = np.cross(forward, up)
    if np.linalg.norm(right) < 1e-9:
        right = np.cross(forward, np.array([0.0, 1.0, 0.0]))
    right /= np.linalg.norm(right)
    down = np.cross(forward, right)
    r_cam_to_world = np.stack([right, down, forward], axis=1)
    world_to_cam = RigidTransform(r_cam_to_world.T, -r_cam_to_world.T @ eye)
    return world_to_cam


def pan_tilt_offset(pose: RigidTransform, pan: float, tilt: float) -> RigidTransform:
    """Rotate a world→camera pose by small pan (about camera y) and tilt (x)."""
    cp, sp = np.cos(pan), np.sin(pan)
    ct, st = np.cos(tilt), np.sin(tilt)
    r_pan = np.array([[cp, 0.0, sp], [0.0, 1.0, 0.0], [-sp, 0.0, cp]])
    r_tilt = np.array([[1.0, 0.0, 0.0], [0.0, ct, -st], [0.0, st, ct]])
    return RigidTransform(r_tilt @ r_pan @ pose.rotation, r_tilt @ r_pan @ pose.translation)
