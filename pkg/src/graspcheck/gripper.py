"""Articulated two-finger gripper model and grasp-related geometry.

The gripper frame has the palm face at x=0 with fingers extending along +x
and opening along ±y. The closing motion is a linear sweep: at aperture ``a``
(1 fully open, 0 fully closed) each finger's inner face sits at a lateral
offset of ``a * max_gap / 2``, so the inner gap equals ``a * max_gap``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .camera import CameraModel
from .dataset import BoundingBox
from .errors import GripperOutOfView, ObjectTooLarge, PreconditionViolation
from .geometry import (
    CONTACT_TOL,
    ConvexHullMesh,
    RigidTransform,
    _candidate_axes,
    box_mesh,
)


@dataclass(frozen=True)
class FingerSweep:
    """Prismatic closing parameterization: lateral axis and maximum gap."""

    axis: tuple[float, float, float] = (0.0, 1.0, 0.0)
    max_gap: float = 0.10

    def offset(self, aperture: float, side: int) -> np.ndarray:
        return np.asarray(self.axis, dtype=float) * (side * aperture * self.max_gap / 2.0)

    def to_json(self) -> dict:
        return {"axis": [float(v) for v in self.axis], "max_gap": float(self.max_gap)}

    @classmethod
    def from_json(cls, data: dict) -> "FingerSweep":
        return cls(axis=tuple(float(v) for v in data["axis"]), max_gap=float(data["max_gap"]))


@dataclass
class GripperGeometry:
    palm: ConvexHullMesh
    finger_left: ConvexHullMesh  # finger-local frame, inner face on the sweep axis
    finger_right: ConvexHullMesh
    finger_axis: FingerSweep = field(default_factory=FingerSweep)
    aperture: float = 1.0
    base_pose: RigidTransform = field(default_factory=RigidTransform.identity)
    finger_length: float = 0.06

    def __post_init__(self):
        if not 0.0 <= self.aperture <= 1.0:
            raise ValueError(f"aperture must be in [0, 1], got {self.aperture}")

    def finger_local(self, side: int, aperture: float | None = None) -> ConvexHullMesh:
        """Finger hull in the gripper frame at the given aperture. side: +1 left, -1 right."""
        a = self.aperture if aperture is None else aperture
        base = self.finger_left if side > 0 else self.finger_right
        return base.translated(self.finger_axis.offset(a, side))

    def hulls_world(self, aperture: float | None = None) -> list[ConvexHullMesh]:
        a = self.aperture if aperture is None else aperture
        return [
            self.palm.transformed(self.base_pose),
            self.finger_local(+1, a).transformed(self.base_pose),
            self.finger_local(-1, a).transformed(self.base_pose),
        ]

    def fingertips_world(self, aperture: float | None = None) -> np.ndarray:
        """Inner tip point of each finger, in world coordinates."""
        a = self.aperture if aperture is None else aperture
        axis = np.asarray(self.finger_axis.axis, dtype=float)
        tip = np.array([self.finger_length, 0.0, 0.0])
        local = np.stack(
            [tip + axis * (a * self.finger_axis.max_gap / 2.0),
             tip - axis * (a * self.finger_axis.max_gap / 2.0)]
        )
        return self.base_pose.apply(local)

    def fingertip_midpoint_local(self) -> np.ndarray:
        return np.array([self.finger_length, 0.0, 0.0])

    def with_state(self, aperture: float | None = None, base_pose: RigidTransform | None = None) -> "GripperGeometry":
        return GripperGeometry(
            palm=self.palm,
            finger_left=self.finger_left,
            finger_right=self.finger_right,
            finger_axis=self.finger_axis,
            aperture=self.aperture if aperture is None else aperture,
            base_pose=self.base_pose if base_pose is None else base_pose,
            finger_length=self.finger_length,
        )

    def to_json(self) -> dict:
        return {
            "palm": self.palm.to_json(),
            "finger_left": self.finger_left.to_json(),
            "finger_right": self.finger_right.to_json(),
            "finger_axis": self.finger_axis.to_json(),
            "aperture": float(self.aperture),
            "base_pose": self.base_pose.to_json(),
            "finger_length": float(self.finger_length),
        }

    @classmethod
    def from_json(cls, data: dict) -> "GripperGeometry":
        return cls(
            palm=ConvexHullMesh.from_json(data["palm"]),
            finger_left=ConvexHullMesh.from_json(data["finger_left"]),
            finger_right=ConvexHullMesh.from_json(data["finger_right"]),
            finger_axis=FingerSweep.from_json(data["finger_axis"]),
            aperture=float(data["aperture"]),
            base_pose=RigidTransform.from_json(data["base_pose"]),
            finger_length=float(data["finger_length"]),
        )


def default_gripper() -> GripperGeometry:
    """Desk-scale parallel-jaw gripper: 10 cm max gap, 6 cm fingers."""
    palm = box_mesh((0.04, 0.11, 0.05), center=(-0.02, 0.0, 0.0))
    finger_left = box_mesh((0.06, 0.012, 0.03), center=(0.03, 0.006, 0.0))
    finger_right = box_mesh((0.06, 0.012, 0.03), center=(0.03, -0.006, 0.0))
    return GripperGeometry(
        palm=palm,
        finger_left=finger_left,
        finger_right=finger_right,
        finger_axis=FingerSweep(axis=(0.0, 1.0, 0.0), max_gap=0.10),
        aperture=1.0,
        finger_length=0.06,
    )


class _SweptFingerTest:
    """Separating-axis test between one finger and a fixed object where the
    finger moves by pure translation along the sweep axis. The axis set is
    translation-invariant, so projections are precomputed once and shifted.
    """

    def __init__(self, finger: ConvexHullMesh, obj: ConvexHullMesh, sweep: FingerSweep, side: int):
        axes = _candidate_axes(finger, obj)
        self._fin = axes @ finger.vertices.T
        self._obj = axes @ obj.vertices.T
        self._fin_min = self._fin.min(axis=1)
        self._fin_max = self._fin.max(axis=1)
        self._obj_min = self._obj.min(axis=1)
        self._obj_max = self._obj.max(axis=1)
        direction = np.asarray(sweep.axis, dtype=float) * (side * sweep.max_gap / 2.0)
        self._shift = axes @ direction

    def intersects(self, aperture: float, tol: float = CONTACT_TOL) -> bool:
        s = aperture * self._shift
        gap = np.maximum(self._obj_min - (self._fin_max + s), (self._fin_min + s) - self._obj_max)
        return float(gap.max()) <= tol


@dataclass(frozen=True)
class CloseResult:
    final_aperture: float
    contact: bool
    apertures_tested: tuple[float, ...]


def _aperture_sequence(step: float) -> list[float]:
    if not 0.0 < step <= 1.0:
        raise ValueError(f"aperture step must be in (0, 1], got {step}")
    seq = [1.0]
    k = 1
    while seq[-1] > 0.0:
        value = 1.0 - k * step
        seq.append(max(value, 0.0))
        k += 1
    return seq


def close_gripper_on_object(
    gripper: GripperGeometry,
    object_hull: ConvexHullMesh,
    object_pose: RigidTransform,
    step: float = 0.02,
) -> CloseResult:
    """Step the fingers closed until they would touch the object.

    Apertures are tested on the descending sequence 1, 1-step, 1-2*step, ...
    The result is the last tested aperture with no finger/object intersection;
    ``contact`` is True iff the following step would intersect. With nothing
    in reach the gripper closes fully and reports no contact.
    """
    obj_local = object_hull.transformed(gripper.base_pose.inverse().compose(object_pose))
    tests = [
        _SweptFingerTest(gripper.finger_left, obj_local, gripper.finger_axis, +1),
        _SweptFingerTest(gripper.finger_right, obj_local, gripper.finger_axis, -1),
    ]
    tested: list[float] = []
    previous = None
    for aperture in _aperture_sequence(step):
        tested.append(aperture)
        hit = any(t.intersects(aperture) for t in tests)
        if hit:
            if previous is None:
                raise PreconditionViolation("object intersects the fully open gripper")
            return CloseResult(previous, True, tuple(tested))
        previous = aperture
    return CloseResult(0.0, False, tuple(tested))


def place_object_in_gripper(
    gripper: GripperGeometry,
    object_hull: ConvexHullMesh,
    rng: np.random.Generator,
    push_step: float = 0.005,
    max_orientation_attempts: int = 20,
) -> RigidTransform:
    """Pose (world frame) centering the object between the fingertips.

    Random orientations are drawn until one fits between the fully open
    fingers; the object is then pushed away from the palm along the approach
    axis until the open gripper clears it.
    """
    width_along_gap = float("inf")
    rotated = None
    for _ in range(max_orientation_attempts):
        rotation = _random_rotation(rng)
        candidate = object_hull.transformed(RigidTransform(rotation, np.zeros(3)))
        lo, hi = candidate.aabb()
        width_along_gap = float(hi[1] - lo[1])
        if width_along_gap < gripper.finger_axis.max_gap:
            rotated = candidate
            break
    if rotated is None:
        raise ObjectTooLarge(
            f"object spans {width_along_gap:.3f} m along the gap axis in every tried "
            f"orientation; max gap is {gripper.finger_axis.max_gap:.3f} m"
        )

    center = (lo + hi) / 2.0
    target = gripper.fingertip_midpoint_local()
    translation = target - center
    local = rotated.translated(translation)

    fixed = [gripper.palm, gripper.finger_local(+1, 1.0), gripper.finger_local(-1, 1.0)]
    approach = np.array([push_step, 0.0, 0.0])
    pushed = 0.0
    max_push = gripper.finger_length + float(hi[0] - lo[0]) + 0.05
    while any(_hulls_overlap(local, part) for part in fixed):
        local = local.translated(approach)
        translation = translation + approach
        pushed += push_step
        if pushed > max_push:
            raise ObjectTooLarge("object cannot be cleared from the open gripper")
    return gripper.base_pose.compose(RigidTransform(rotation, translation))


def _hulls_overlap(a: ConvexHullMesh, b: ConvexHullMesh) -> bool:
    from .geometry import convex_hulls_intersect

    return convex_hulls_intersect(a, b)


def _random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform random rotation from a normalized quaternion."""
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


MIN_BOX_SIDE_PX = 2.0


def project_gripper_bbox(
    camera: CameraModel,
    gripper: GripperGeometry,
    held_object: ConvexHullMesh | None = None,
    held_object_pose: RigidTransform | None = None,
) -> BoundingBox:
    """Tight pixel box around the in-frustum gripper (and held object) vertices.

    Vertices outside the frustum are ignored; the result is clamped to the
    image and expanded to a 2 px minimum side. Raises GripperOutOfView when no
    gripper vertex projects into the image.
    """
    gripper_pts = np.vstack([h.vertices for h in gripper.hulls_world()])
    mask = camera.in_frustum(gripper_pts)
    if not mask.any():
        raise GripperOutOfView("no gripper vertex inside the camera frustum")
    points = [gripper_pts[mask]]
    if held_object is not None:
        obj = held_object if held_object_pose is None else held_object.transformed(held_object_pose)
        obj_mask = camera.in_frustum(obj.vertices)
        if obj_mask.any():
            points.append(obj.vertices[obj_mask])
    uv, _ = camera.project(np.vstack(points))
    x_min = float(np.clip(uv[:, 0].min(), 0.0, camera.width))
    x_max = float(np.clip(uv[:, 0].max(), 0.0, camera.width))
    y_min = float(np.clip(uv[:, 1].min(), 0.0, camera.height))
    y_max = float(np.clip(uv[:, 1].max(), 0.0, camera.height))
    x_min, x_max = _ensure_min_side(x_min, x_max, camera.width)
    y_min, y_max = _ensure_min_side(y_min, y_max, camera.height)
    return BoundingBox(x_min, y_min, x_max, y_max)


def _ensure_min_side(lo: float, hi: float, limit: float) -> tuple[float, float]:
    if hi - lo >= MIN_BOX_SIDE_PX:
        return lo, hi
    center = (lo + hi) / 2.0
    lo = center - MIN_BOX_SIDE_PX / 2.0
    hi = center + MIN_BOX_SIDE_PX / 2.0
    if lo < 0.0:
        hi -= lo
        lo = 0.0
    elif hi > limit:
        lo -= hi - limit
        hi = limit
    return lo, hi
