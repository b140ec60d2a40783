"""Detector-side inference logic: threshold schedule, clustering, selection.

Low confidence thresholds are needed on out-of-domain images, which yields
many candidate boxes spread over the image. Candidates are clustered with
DBSCAN over normalized box centers; clusters are ranked by their summed
confidences and the best box of the winning cluster is returned, padded to
compensate for systematically short boxes on the vertical axis.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import numpy as np

from .dataset import BoundingBox
from .errors import GripperNotFound


@dataclass(frozen=True)
class Detection:
    box: BoundingBox
    confidence: float

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence must be in [0, 1], got {self.confidence}")


@dataclass(frozen=True)
class ThresholdSchedule:
    start: float = 0.5
    decay_factor: float = 0.5
    floor: float = 0.01

    def __post_init__(self):
        if not 0.0 < self.decay_factor < 1.0:
            raise ValueError("decay_factor must be in (0, 1)")
        if not 0.0 < self.floor < self.start:
            raise ValueError("floor must satisfy 0 < floor < start")

    def thresholds(self) -> list[float]:
        """start, start*decay, ... down to (and including) the first value <= floor."""
        values = [self.start]
        while values[-1] > self.floor:
            values.append(values[-1] * self.decay_factor)
        return values

    def max_queries(self) -> int:
        return math.ceil(math.log(self.floor / self.start) / math.log(self.decay_factor)) + 1


@dataclass(frozen=True)
class ClusterConfig:
    eps: float = 0.10  # in normalized image coordinates
    min_pts: int = 1

    def __post_init__(self):
        if self.eps <= 0.0:
            raise ValueError("eps must be positive")
        if self.min_pts < 1:
            raise ValueError("min_pts must be >= 1")


@dataclass(frozen=True)
class PadConfig:
    pad_x_frac: float = 0.05
    pad_y_frac: float = 0.25

    def __post_init__(self):
        for v in (self.pad_x_frac, self.pad_y_frac):
            if not (v == v and v >= 0.0 and v != float("inf")):
                raise ValueError(f"pad fraction must be finite and >= 0, got {v}")


class DetectorBackend(Protocol):
    """Returns all candidate detections with confidence >= threshold.

    Implementations must be monotone: lowering the threshold never removes a
    detection from the result.
    """

    def detect(self, image, confidence_threshold: float) -> list[Detection]: ...


class FixtureDetectorBackend:
    """Deterministic backend replaying a JSON file of per-image candidates.

    File format: ``{image_id: [{"bbox": [x0, y0, x1, y1], "confidence": c}, ...]}``.
    Requires images carrying an ``image_id`` attribute (see pipeline.Frame).
    """

    def __init__(self, source: str | Path | dict):
        data = source if isinstance(source, dict) else json.loads(Path(source).read_text())
        self._candidates: dict[str, list[Detection]] = {
            image_id: [
                Detection(BoundingBox.from_list(item["bbox"]), float(item["confidence"]))
                for item in items
            ]
            for image_id, items in data.items()
        }

    def detect(self, image, confidence_threshold: float) -> list[Detection]:
        image_id = getattr(image, "image_id", None)
        if image_id is None:
            raise ValueError("fixture detector needs an image with an image_id")
        return [
            d for d in self._candidates.get(image_id, []) if d.confidence >= confidence_threshold
        ]


def adaptive_detect(
    detector: DetectorBackend, image, schedule: ThresholdSchedule | None = None
) -> list[Detection]:
    """Query at decaying thresholds and return the first non-empty candidate set."""
    schedule = schedule or ThresholdSchedule()
    for threshold in schedule.thresholds():
        candidates = detector.detect(image, threshold)
        kept = [d for d in candidates if d.confidence >= threshold]
        if kept:
            return kept
    raise GripperNotFound(
        f"no detections at any threshold down to {schedule.floor} "
        f"({schedule.max_queries()} queries)"
    )


def _normalized_centers(detections: list[Detection], image_size: tuple[int, int]) -> np.ndarray:
    width, height = image_size
    return np.array(
        [(d.box.center[0] / width, d.box.center[1] / height) for d in detections], dtype=float
    )


def cluster_detections(
    detections: list[Detection],
    image_size: tuple[int, int],
    cfg: ClusterConfig | None = None,
) -> list[int]:
    """DBSCAN over normalized box centers; one contiguous label per detection.

    Core points (>= min_pts neighbours within eps, self included) form
    clusters via eps-connectivity. Border points join the cluster of their
    nearest core point, which keeps the partition independent of input order.
    Noise points become their own singleton clusters.
    """
    if not detections:
        raise ValueError("cluster_detections requires at least one detection")
    cfg = cfg or ClusterConfig()
    points = _normalized_centers(detections, image_size)
    n = len(points)
    dist = np.linalg.norm(points[:, None, :] - points[None, :, :], axis=2)
    neighbors = dist <= cfg.eps
    core = neighbors.sum(axis=1) >= cfg.min_pts

    labels = [-1] * n
    next_label = 0
    for i in range(n):
        if not core[i] or labels[i] != -1:
            continue
        # breadth-first expansion over connected core points
        labels[i] = next_label
        queue = [i]
        while queue:
            j = queue.pop()
            for k in np.nonzero(neighbors[j] & core)[0]:
                if labels[k] == -1:
                    labels[k] = next_label
                    queue.append(int(k))
        next_label += 1

    for i in range(n):
        if labels[i] != -1:
            continue
        core_neighbors = np.nonzero(neighbors[i] & core)[0]
        if core_neighbors.size:
            nearest = core_neighbors[np.argmin(dist[i, core_neighbors])]
            labels[i] = labels[int(nearest)]
        else:
            labels[i] = next_label  # noise becomes a singleton cluster
            next_label += 1
    return labels


def select_detection(
    detections: list[Detection],
    image_size: tuple[int, int],
    cfg: ClusterConfig | None = None,
) -> Detection:
    """Best box of the cluster with the highest cumulative confidence.

    Ties on cumulative confidence go to the cluster holding the single most
    confident box, then to the lowest cluster label; within the winning
    cluster a confidence tie goes to the lexicographically smallest corners.
    """
    if not detections:
        raise ValueError("select_detection requires at least one detection")
    labels = cluster_detections(detections, image_size, cfg)
    clusters: dict[int, list[Detection]] = {}
    for det, label in zip(detections, labels):
        clusters.setdefault(label, []).append(det)

    def cluster_rank(label: int):
        members = clusters[label]
        return (sum(d.confidence for d in members), max(d.confidence for d in members), -label)

    winner = max(clusters, key=cluster_rank)
    return min(clusters[winner], key=lambda d: (-d.confidence, tuple(d.box.as_list())))


def pad_box(
    box: BoundingBox, image_size: tuple[int, int], cfg: PadConfig | None = None
) -> BoundingBox:
    """Expand each side by the per-axis fraction of the box size, then clamp."""
    cfg = cfg or PadConfig()
    width, height = image_size
    dx = cfg.pad_x_frac * box.width
    dy = cfg.pad_y_frac * box.height
    return BoundingBox(
        max(0.0, box.x_min - dx),
        max(0.0, box.y_min - dy),
        min(float(width), box.x_max + dx),
        min(float(height), box.y_max + dy),
    )
