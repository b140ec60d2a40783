"""Procedural generation of renderer-agnostic scene specifications.

A batch shares one randomized scene (room, distractor layout); its examples
differ in arm pose, camera orientation, and the optional grasped object. All
randomness flows from a single seeded generator per batch, so a (seed, config)
pair maps to one byte-stable serialization.
"""

from __future__ import annotations

import functools
import json
from dataclasses import dataclass, field

import numpy as np

from .camera import CameraModel, look_at_pose, pan_tilt_offset
from .dataset import Annotation, Category, GraspLabel
from .errors import PlacementFailure
from .geometry import ConvexHullMesh, RigidTransform, convex_hulls_intersect
from .gripper import (
    GripperGeometry,
    close_gripper_on_object,
    default_gripper,
    place_object_in_gripper,
    project_gripper_bbox,
)

# independent seed streams so asset shapes never correlate with scene draws
_ASSET_STREAM = 101
_BATCH_STREAM = 202

_POOL_CODES = {"train": 0, "val": 1, "cube": 2}


@functools.lru_cache(maxsize=512)
def asset_hull(asset_id: str) -> ConvexHullMesh:
    """Deterministic procedural asset for an id like ``train_007``.

    Each asset is a random convex polyhedron normalized to unit max extent;
    the ``cube`` pool yields unit cubes for geometry-heavy tests and demos.
    """
    pool, _, index = asset_id.rpartition("_")
    if pool not in _POOL_CODES:
        raise KeyError(f"unknown asset pool in id {asset_id!r}")
    if pool == "cube":
        from .geometry import box_mesh

        return box_mesh((1.0, 1.0, 1.0))
    rng = np.random.default_rng(np.random.SeedSequence([_ASSET_STREAM, _POOL_CODES[pool], int(index)]))
    n_points = int(rng.integers(8, 22))
    points = rng.uniform(-0.5, 0.5, size=(n_points, 3))
    hull = ConvexHullMesh.from_points(points)
    return hull.scaled(1.0 / float(hull.extent().max()))


@dataclass(frozen=True)
class JointSpec:
    name: str
    lower: float
    upper: float
    delta: float  # uniform perturbation half-range


@dataclass(frozen=True)
class ArmPose:
    joint_angles: tuple[float, ...]
    camera_offset: tuple[float, float] = (0.0, 0.0)  # pan, tilt

    def to_json(self) -> dict:
        return {
            "joint_angles": [float(v) for v in self.joint_angles],
            "camera_offset": [float(v) for v in self.camera_offset],
        }

    @classmethod
    def from_json(cls, data: dict) -> "ArmPose":
        return cls(
            tuple(float(v) for v in data["joint_angles"]),
            tuple(float(v) for v in data["camera_offset"]),
        )


@dataclass(frozen=True)
class RobotModel:
    """Minimal kinematic chain: torso lift, arm flex/roll, wrist flex.

    The chain only needs to produce a gripper pose and a head-camera eye
    point; rendering-grade kinematics belong to the external renderer.
    """

    joints: tuple[JointSpec, ...] = (
        JointSpec("torso_lift", 0.0, 0.35, 0.03),
        JointSpec("arm_flex", -2.6, 0.0, 0.05),
        JointSpec("arm_roll", -1.0, 1.0, 0.05),
        JointSpec("wrist_flex", -1.9, 1.2, 0.05),
    )
    shoulder_offset: tuple[float, float, float] = (0.08, 0.0, 0.35)
    upper_arm_length: float = 0.34
    forearm_length: float = 0.25
    head_offset: tuple[float, float, float] = (0.02, 0.0, 1.05)

    def base_arm_pose(self) -> ArmPose:
        return ArmPose(joint_angles=(0.10, -0.5, 0.0, 0.3), camera_offset=(0.0, 0.0))

    def validate_pose(self, pose: ArmPose):
        if len(pose.joint_angles) != len(self.joints):
            raise ValueError(
                f"expected {len(self.joints)} joint values, got {len(pose.joint_angles)}"
            )
        for spec, value in zip(self.joints, pose.joint_angles):
            if not spec.lower - 1e-12 <= value <= spec.upper + 1e-12:
                raise ValueError(f"joint {spec.name}={value} outside [{spec.lower}, {spec.upper}]")

    def gripper_pose(self, pose: ArmPose) -> RigidTransform:
        lift, arm_flex, arm_roll, wrist_flex = pose.joint_angles
        shoulder = np.asarray(self.shoulder_offset, dtype=float) + np.array([0.0, 0.0, lift])
        d1 = _direction(arm_roll, arm_flex)
        elbow = shoulder + self.upper_arm_length * d1
        d2_pitch = arm_flex + wrist_flex
        d2 = _direction(arm_roll, d2_pitch)
        wrist = elbow + self.forearm_length * d2
        rotation = _rot_z(arm_roll) @ _rot_y(d2_pitch)
        return RigidTransform(rotation, wrist)

    def camera_eye(self, pose: ArmPose) -> np.ndarray:
        lift = pose.joint_angles[0]
        return np.asarray(self.head_offset, dtype=float) + np.array([0.0, 0.0, lift])


def _rot_y(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _rot_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _direction(roll: float, pitch: float) -> np.ndarray:
    return _rot_z(roll) @ _rot_y(pitch) @ np.array([1.0, 0.0, 0.0])


@dataclass(frozen=True)
class Room:
    """Axis-aligned room; floor at z = 0."""

    bounds: tuple[tuple[float, float], ...] = ((-2.5, 2.5), (-2.5, 2.5), (0.0, 2.5))

    def contains_hull(self, hull: ConvexHullMesh, tol: float = 1e-9) -> bool:
        lo, hi = hull.aabb()
        return all(
            b[0] - tol <= lo[i] and hi[i] <= b[1] + tol for i, b in enumerate(self.bounds)
        )

    def to_json(self) -> dict:
        return {"bounds": [[float(a), float(b)] for a, b in self.bounds]}

    @classmethod
    def from_json(cls, data: dict) -> "Room":
        return cls(tuple((float(a), float(b)) for a, b in data["bounds"]))


@dataclass(frozen=True)
class GenConfig:
    batch_size: int = 10
    distractor_min: int = 2
    distractor_max: int = 15
    p_grasp: float = 0.5
    asset_pool: str = "train"
    pool_size: int = 40
    distractor_scale: tuple[float, float] = (0.10, 0.30)
    grasp_extent: tuple[float, float] = (0.03, 0.08)
    aperture_step: float = 0.02
    max_attempts: int = 100
    camera_offset_delta: float = 0.03
    camera_offset_limit: float = 0.2
    image_width: int = 640
    image_height: int = 480
    focal_length: float = 525.0
    room: Room = field(default_factory=Room)
    robot: RobotModel = field(default_factory=RobotModel)
    # floor region where distractors are sampled (kept in front of the robot)
    spawn_x: tuple[float, float] = (0.9, 2.3)
    spawn_y: tuple[float, float] = (-1.1, 1.1)

    def validate(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not (2 <= self.distractor_min <= self.distractor_max <= 15):
            raise ValueError("distractor range must lie within [2, 15]")
        if not 0.0 <= self.p_grasp <= 1.0:
            raise ValueError("p_grasp must be in [0, 1]")
        if not 0.0 < self.aperture_step <= 1.0:
            raise ValueError("aperture_step must be in (0, 1]")
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")


@dataclass(frozen=True)
class Placement:
    asset_id: str
    pose: RigidTransform
    scale: float

    def world_hull(self) -> ConvexHullMesh:
        return asset_hull(self.asset_id).scaled(self.scale).transformed(self.pose)

    def to_json(self) -> dict:
        return {"asset_id": self.asset_id, "pose": self.pose.to_json(), "scale": float(self.scale)}

    @classmethod
    def from_json(cls, data: dict) -> "Placement":
        return cls(str(data["asset_id"]), RigidTransform.from_json(data["pose"]), float(data["scale"]))


@dataclass
class SceneSpec:
    seed: int
    robot_pose: ArmPose
    base_position: tuple[float, float, float]
    camera: CameraModel
    distractors: list[Placement]
    grasped_object: Placement | None
    gripper: GripperGeometry
    room: Room

    def validate(self):
        if not 2 <= len(self.distractors) <= 15:
            raise ValueError(f"distractor count {len(self.distractors)} outside [2, 15]")
        hulls = [p.world_hull() for p in self.distractors]
        for hull in hulls:
            if not self.room.contains_hull(hull, tol=1e-6):
                raise ValueError("distractor outside room extents")
        for i in range(len(hulls)):
            for j in range(i + 1, len(hulls)):
                if convex_hulls_intersect(hulls[i], hulls[j]):
                    raise ValueError(f"distractors {i} and {j} overlap")

    def to_json(self) -> dict:
        return {
            "seed": int(self.seed),
            "robot_pose": self.robot_pose.to_json(),
            "base_position": [float(v) for v in self.base_position],
            "camera": self.camera.to_json(),
            "distractors": [p.to_json() for p in self.distractors],
            "grasped_object": None if self.grasped_object is None else self.grasped_object.to_json(),
            "gripper": self.gripper.to_json(),
            "room": self.room.to_json(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "SceneSpec":
        return cls(
            seed=int(data["seed"]),
            robot_pose=ArmPose.from_json(data["robot_pose"]),
            base_position=tuple(float(v) for v in data["base_position"]),
            camera=CameraModel.from_json(data["camera"]),
            distractors=[Placement.from_json(p) for p in data["distractors"]],
            grasped_object=(
                None if data["grasped_object"] is None else Placement.from_json(data["grasped_object"])
            ),
            gripper=GripperGeometry.from_json(data["gripper"]),
            room=Room.from_json(data["room"]),
        )


@dataclass
class BatchExample:
    scene: SceneSpec
    annotation: Annotation


@dataclass
class Batch:
    scene_seed: int
    examples: list[BatchExample]

    def to_json(self) -> dict:
        return {
            "scene_seed": int(self.scene_seed),
            "examples": [
                {"scene": ex.scene.to_json(), "annotation": _annotation_json(ex.annotation)}
                for ex in self.examples
            ],
        }

    def serialize(self) -> str:
        return json.dumps(self.to_json(), separators=(",", ":"))


def _annotation_json(ann: Annotation) -> dict:
    return {
        "bbox": ann.gripper_box.as_list(),
        "label": int(ann.label),
        "category": ann.category.value,
        "object_id": ann.object_id,
    }


def perturb_arm_pose(base: ArmPose, rng: np.random.Generator, config: GenConfig) -> ArmPose:
    """Uniform per-joint perturbation clamped to limits; camera offset likewise."""
    robot = config.robot
    robot.validate_pose(base)
    joints = []
    for spec, value in zip(robot.joints, base.joint_angles):
        perturbed = value + rng.uniform(-spec.delta, spec.delta)
        joints.append(float(np.clip(perturbed, spec.lower, spec.upper)))
    d = config.camera_offset_delta
    lim = config.camera_offset_limit
    offset = tuple(
        float(np.clip(v + rng.uniform(-d, d), -lim, lim)) for v in base.camera_offset
    )
    return ArmPose(tuple(joints), offset)


def _example_camera(config: GenConfig, arm: ArmPose) -> CameraModel:
    robot = config.robot
    eye = robot.camera_eye(arm)
    target = robot.gripper_pose(arm).translation
    pose = look_at_pose(eye, target)
    pose = pan_tilt_offset(pose, arm.camera_offset[0], arm.camera_offset[1])
    return CameraModel(
        fx=config.focal_length,
        fy=config.focal_length,
        cx=config.image_width / 2.0,
        cy=config.image_height / 2.0,
        width=config.image_width,
        height=config.image_height,
        pose=pose,
    )


def place_distractors(
    rng: np.random.Generator,
    config: GenConfig,
    room: Room,
    camera: CameraModel,
    count: int | None = None,
) -> list[Placement]:
    """Rejection-sampled floor placements: in-room, in-view, non-overlapping."""
    if count is None:
        count = int(rng.integers(config.distractor_min, config.distractor_max + 1))
    placements: list[Placement] = []
    hulls: list[ConvexHullMesh] = []
    aabbs: list[tuple[np.ndarray, np.ndarray]] = []
    for _ in range(count):
        for _attempt in range(config.max_attempts):
            index = int(rng.integers(0, config.pool_size))
            asset_id = f"{config.asset_pool}_{index:03d}"
            scale = float(rng.uniform(*config.distractor_scale))
            yaw = float(rng.uniform(0.0, 2.0 * np.pi))
            x = float(rng.uniform(*config.spawn_x))
            y = float(rng.uniform(*config.spawn_y))
            base = asset_hull(asset_id).scaled(scale)
            rotated = base.transformed(RigidTransform.from_rotation_z(yaw))
            lo, _hi = rotated.aabb()
            pose = RigidTransform.from_rotation_z(yaw, translation=(x, y, -float(lo[2])))
            hull = base.transformed(pose)
            if not room.contains_hull(hull, tol=1e-6):
                continue
            if not bool(camera.in_frustum(hull.centroid[None, :])[0]):
                continue
            h_lo, h_hi = hull.aabb()
            overlap = False
            for other, (o_lo, o_hi) in zip(hulls, aabbs):
                if (h_lo > o_hi).any() or (o_lo > h_hi).any():
                    continue
                if convex_hulls_intersect(hull, other):
                    overlap = True
                    break
            if overlap:
                continue
            placements.append(Placement(asset_id, pose, scale))
            hulls.append(hull)
            aabbs.append((h_lo, h_hi))
            break
        else:
            raise PlacementFailure(
                f"could not place distractor {len(placements) + 1}/{count} "
                f"after {config.max_attempts} attempts"
            )
    return placements


def _sample_grasped_object(
    rng: np.random.Generator, config: GenConfig, gripper: GripperGeometry
) -> tuple[Placement, ConvexHullMesh]:
    index = int(rng.integers(0, config.pool_size))
    asset_id = f"{config.asset_pool}_{index:03d}"
    base = asset_hull(asset_id)
    diameter = float(np.max(np.linalg.norm(base.vertices[:, None] - base.vertices[None, :], axis=2)))
    target = float(rng.uniform(*config.grasp_extent))
    scale = target / diameter
    hull = base.scaled(scale)
    pose = place_object_in_gripper(gripper, hull, rng)
    return Placement(asset_id, pose, scale), hull


def generate_batch(scene_seed: int, config: GenConfig | None = None) -> Batch:
    """Deterministic batch of scene specs + annotations for one scene seed."""
    config = config or GenConfig()
    config.validate()
    rng = np.random.default_rng(np.random.SeedSequence([_BATCH_STREAM, int(scene_seed)]))
    robot = config.robot
    base_arm = robot.base_arm_pose()
    nominal_camera = _example_camera(config, base_arm)
    distractors = place_distractors(rng, config, config.room, nominal_camera)

    examples: list[BatchExample] = []
    for _ in range(config.batch_size):
        arm = perturb_arm_pose(base_arm, rng, config)
        camera = _example_camera(config, arm)
        open_gripper = default_gripper().with_state(base_pose=robot.gripper_pose(arm))
        grasped: Placement | None = None
        held_hull: ConvexHullMesh | None = None
        if rng.random() < config.p_grasp:
            grasped, held_hull = _sample_grasped_object(rng, config, open_gripper)
            close = close_gripper_on_object(open_gripper, held_hull, grasped.pose, config.aperture_step)
            gripper = open_gripper.with_state(aperture=close.final_aperture)
        else:
            gripper = open_gripper.with_state(aperture=0.0)
        bbox = project_gripper_bbox(
            camera,
            gripper,
            held_object=held_hull,
            held_object_pose=grasped.pose if grasped is not None else None,
        )
        if grasped is not None:
            annotation = Annotation(bbox, GraspLabel.OBJECT, Category.RIGID, grasped.asset_id)
        else:
            annotation = Annotation(bbox, GraspLabel.NO_OBJECT, Category.NO_OBJECT, None)
        scene = SceneSpec(
            seed=int(scene_seed),
            robot_pose=arm,
            base_position=(0.0, 0.0, 0.0),
            camera=camera,
            distractors=list(distractors),
            grasped_object=grasped,
            gripper=gripper,
            room=config.room,
        )
        examples.append(BatchExample(scene, annotation))
    return Batch(int(scene_seed), examples)
