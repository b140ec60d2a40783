"""Two-stage verification pipeline: detect -> refine -> crop -> classify -> decide."""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Protocol

import numpy as np

from .dataset import BoundingBox, GraspLabel
from .detect import (
    ClusterConfig,
    DetectorBackend,
    PadConfig,
    ThresholdSchedule,
    adaptive_detect,
    pad_box,
    select_detection,
)
from .errors import EmptyCrop


@dataclass(frozen=True)
class Frame:
    """An image handed through the pipeline. ``image_id`` keys fixture backends."""

    pixels: np.ndarray
    image_id: str | None = None

    @property
    def size(self) -> tuple[int, int]:
        h, w = self.pixels.shape[:2]
        return w, h


@dataclass(frozen=True)
class DecisionConfig:
    # nominal threshold is 0.5; real-domain deployments lower it to favour
    # recall on empty-gripper detection
    threshold_no_object: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.threshold_no_object < 1.0:
            raise ValueError("threshold_no_object must be in (0, 1)")


REAL_DOMAIN_THRESHOLD = 0.15


@dataclass(frozen=True)
class PipelineConfig:
    schedule: ThresholdSchedule = field(default_factory=ThresholdSchedule)
    cluster: ClusterConfig = field(default_factory=ClusterConfig)
    pad: PadConfig = field(default_factory=PadConfig)
    decision: DecisionConfig = field(default_factory=DecisionConfig)


class ClassifierBackend(Protocol):
    """Maps a cropped image to the probability that the gripper is empty."""

    def predict_no_object(self, crop: np.ndarray, image_id: str | None = None) -> float: ...


class FixtureClassifierBackend:
    """Replays per-image probabilities from ``{image_id: p_no_object}`` JSON."""

    def __init__(self, source: str | Path | dict):
        data = source if isinstance(source, dict) else json.loads(Path(source).read_text())
        self._probs = {str(k): float(v) for k, v in data.items()}

    def predict_no_object(self, crop: np.ndarray, image_id: str | None = None) -> float:
        if image_id is None or image_id not in self._probs:
            raise KeyError(f"no fixture probability for image {image_id!r}")
        return self._probs[image_id]


class ConstantClassifierBackend:
    """Returns a fixed probability regardless of input; handy in tests."""

    def __init__(self, p_no_object: float):
        self._p = float(p_no_object)

    def predict_no_object(self, crop: np.ndarray, image_id: str | None = None) -> float:
        return self._p


@dataclass(frozen=True)
class GraspVerdict:
    label: GraspLabel
    p_no_object: float
    selected_box: BoundingBox
    padded_box: BoundingBox
    timings: dict[str, float]  # stage -> milliseconds


def decide(p_no_object: float, cfg: DecisionConfig) -> GraspLabel:
    """NO_OBJECT iff the probability reaches the threshold (>= at the boundary)."""
    if not 0.0 <= p_no_object <= 1.0:
        raise ValueError(f"probability must be in [0, 1], got {p_no_object}")
    return GraspLabel.NO_OBJECT if p_no_object >= cfg.threshold_no_object else GraspLabel.OBJECT


def crop_with_margin(pixels: np.ndarray, box: BoundingBox) -> np.ndarray:
    """Sub-image under the (already padded) box, clamped to the image bounds."""
    h, w = pixels.shape[:2]
    x0 = max(0, int(math.floor(box.x_min)))
    y0 = max(0, int(math.floor(box.y_min)))
    x1 = min(w, int(math.ceil(box.x_max)))
    y1 = min(h, int(math.ceil(box.y_max)))
    if x1 <= x0 or y1 <= y0:
        raise EmptyCrop(f"box {box.as_list()} does not intersect a {w}x{h} image")
    return pixels[y0:y1, x0:x1]


def verify_grasp(
    image: Frame | np.ndarray,
    detector: DetectorBackend,
    classifier: ClassifierBackend,
    config: PipelineConfig | None = None,
) -> GraspVerdict:
    """Run the full pipeline on one image; raises GripperNotFound if stage 1 fails.

    A missing gripper is an operational fault and is deliberately not mapped
    to a NO_OBJECT verdict.
    """
    config = config or PipelineConfig()
    frame = image if isinstance(image, Frame) else Frame(pixels=np.asarray(image))
    timings: dict[str, float] = {}

    t0 = time.perf_counter()
    detections = adaptive_detect(detector, frame, config.schedule)
    timings["detect"] = (time.perf_counter() - t0) * 1000.0

    t0 = time.perf_counter()
    selected = select_detection(detections, frame.size, config.cluster)
    padded = pad_box(selected.box, frame.size, config.pad)
    timings["refine"] = (time.perf_counter() - t0) * 1000.0

    t0 = time.perf_counter()
    crop = crop_with_margin(frame.pixels, padded)
    timings["crop"] = (time.perf_counter() - t0) * 1000.0

    t0 = time.perf_counter()
    p = float(classifier.predict_no_object(crop, image_id=frame.image_id))
    if not 0.0 <= p <= 1.0 or p != p:
        raise ValueError(f"classifier returned invalid probability {p}")
    label = decide(p, config.decision)
    timings["classify"] = (time.perf_counter() - t0) * 1000.0

    return GraspVerdict(
        label=label, p_no_object=p, selected_box=selected.box, padded_box=padded, timings=timings
    )


# --- staged-training configuration schema -----------------------------------


class TrainableScope(str, Enum):
    HEAD_ONLY = "head_only"
    HEAD_PLUS_LAST_BACKBONE_LAYER = "head_plus_last_backbone_layer"


@dataclass(frozen=True)
class TrainingStage:
    trainable_scope: TrainableScope
    dropout: tuple[float, float]  # (start, end) endpoints within the stage
    learning_rate: float
    epochs: int


@dataclass(frozen=True)
class TrainingPlan:
    stages: tuple[TrainingStage, ...]
    detector_epochs: int = 100

    @classmethod
    def default(cls) -> "TrainingPlan":
        """Head-first schedule with high, decaying dropout, then partial unfreeze."""
        return cls(
            stages=(
                TrainingStage(TrainableScope.HEAD_ONLY, (0.7, 0.5), 1e-3, 20),
                TrainingStage(TrainableScope.HEAD_PLUS_LAST_BACKBONE_LAYER, (0.3, 0.3), 1e-4, 20),
            ),
            detector_epochs=100,
        )


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.violations


def validate_training_plan(plan: TrainingPlan) -> ValidationReport:
    report = ValidationReport()
    if not plan.stages:
        report.violations.append("plan must contain at least one stage")
        return report
    if plan.detector_epochs < 1:
        report.violations.append("detector_epochs must be >= 1")
    for i, stage in enumerate(plan.stages):
        lo, hi = min(stage.dropout), max(stage.dropout)
        if not (0.0 <= lo and hi < 1.0):
            report.violations.append(f"stage {i}: dropout endpoints must lie in [0, 1)")
        if stage.dropout[0] < stage.dropout[1]:
            report.violations.append(f"stage {i}: dropout must not increase within the stage")
        if stage.learning_rate <= 0:
            report.violations.append(f"stage {i}: learning_rate must be positive")
        if stage.epochs < 1:
            report.violations.append(f"stage {i}: epochs must be >= 1")
    for i in range(1, len(plan.stages)):
        prev, cur = plan.stages[i - 1], plan.stages[i]
        if cur.dropout[0] > prev.dropout[1]:
            report.violations.append(f"stage {i}: dropout increases across stages")
        if cur.learning_rate > prev.learning_rate:
            report.violations.append(f"stage {i}: learning_rate increases across stages")
    return report


def training_plan_to_json(plan: TrainingPlan) -> dict:
    return {
        "detector_epochs": plan.detector_epochs,
        "stages": [
            {
                "trainable_scope": s.trainable_scope.value,
                "dropout": [float(s.dropout[0]), float(s.dropout[1])],
                "learning_rate": float(s.learning_rate),
                "epochs": int(s.epochs),
            }
            for s in plan.stages
        ],
    }


def training_plan_from_json(data: dict) -> TrainingPlan:
    return TrainingPlan(
        stages=tuple(
            TrainingStage(
                trainable_scope=TrainableScope(s["trainable_scope"]),
                dropout=(float(s["dropout"][0]), float(s["dropout"][1])),
                learning_rate=float(s["learning_rate"]),
                epochs=int(s["epochs"]),
            )
            for s in data.get("stages", [])
        ),
        detector_epochs=int(data.get("detector_epochs", 100)),
    )


# --- verdict records ---------------------------------------------------------


@dataclass(frozen=True)
class VerdictRecord:
    """One pipeline outcome keyed by example id; gripper_not_found lines carry
    no label or boxes."""

    example_id: str
    gripper_not_found: bool
    label: GraspLabel | None = None
    p_no_object: float | None = None
    selected_box: BoundingBox | None = None
    padded_box: BoundingBox | None = None
    timings: dict[str, float] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "example_id": self.example_id,
            "gripper_not_found": self.gripper_not_found,
            "label": None if self.label is None else int(self.label),
            "p_no_object": self.p_no_object,
            "selected_box": None if self.selected_box is None else self.selected_box.as_list(),
            "padded_box": None if self.padded_box is None else self.padded_box.as_list(),
            "timings": self.timings,
        }

    @classmethod
    def from_json(cls, data: dict) -> "VerdictRecord":
        return cls(
            example_id=str(data["example_id"]),
            gripper_not_found=bool(data["gripper_not_found"]),
            label=None if data.get("label") is None else GraspLabel(int(data["label"])),
            p_no_object=data.get("p_no_object"),
            selected_box=(
                None if data.get("selected_box") is None else BoundingBox.from_list(data["selected_box"])
            ),
            padded_box=(
                None if data.get("padded_box") is None else BoundingBox.from_list(data["padded_box"])
            ),
            timings=dict(data.get("timings", {})),
        )


def write_verdicts(records: list[VerdictRecord], path: str | Path) -> Path:
    path = Path(path)
    with path.open("w") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_json(), separators=(", ", ": ")) + "\n")
    return path


def read_verdicts(path: str | Path) -> list[VerdictRecord]:
    return [
        VerdictRecord.from_json(json.loads(line))
        for line in Path(path).read_text().splitlines()
        if line.strip()
    ]
