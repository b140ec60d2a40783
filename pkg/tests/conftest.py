from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from graspcheck.dataset import (
    Annotation,
    BoundingBox,
    Category,
    Dataset,
    Example,
    GraspLabel,
    Split,
    save_dataset,
)
from graspcheck.detect import Detection


def make_example(
    index: int,
    label: GraspLabel = GraspLabel.NO_OBJECT,
    category: Category = Category.NO_OBJECT,
    object_id: str | None = None,
    batch: int | None = None,
) -> Example:
    return Example(
        image_ref=f"images/img_{index:04d}.png",
        annotation=Annotation(
            gripper_box=BoundingBox(10.0 + index, 20.0, 110.0 + index, 120.0),
            label=label,
            category=category,
            object_id=object_id,
        ),
        batch_id=index // 10 if batch is None else batch,
        example_index_in_batch=index % 10,
    )


def write_dataset_dir(root: Path, examples: list[Example], split=Split.REAL_EVAL) -> Dataset:
    """Create a loadable dataset directory with empty placeholder files."""
    dataset = Dataset(examples=examples, split=split, root=root)
    (root / "images").mkdir(parents=True, exist_ok=True)
    for ex in examples:
        (root / ex.image_ref).touch()
    save_dataset(dataset, root)
    return dataset


def random_detections(rng: np.random.Generator, count: int, size=(640, 480)) -> list[Detection]:
    w, h = size
    out = []
    for _ in range(count):
        x0 = rng.uniform(0, w - 20)
        y0 = rng.uniform(0, h - 20)
        out.append(
            Detection(
                BoundingBox(x0, y0, x0 + rng.uniform(5, w - x0 - 1), y0 + rng.uniform(5, h - y0 - 1)),
                float(rng.uniform(0.01, 1.0)),
            )
        )
    return out


class CountingDetector:
    """Fixture detector that records how many threshold queries were made."""

    def __init__(self, detections: list[Detection]):
        self.detections = detections
        self.calls: list[float] = []

    def detect(self, image, confidence_threshold: float) -> list[Detection]:
        self.calls.append(confidence_threshold)
        return [d for d in self.detections if d.confidence >= confidence_threshold]


class CountingClassifier:
    def __init__(self, p: float):
        self.p = p
        self.calls = 0

    def predict_no_object(self, crop, image_id=None) -> float:
        self.calls += 1
        return self.p


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
