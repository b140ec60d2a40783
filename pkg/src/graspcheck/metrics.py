"""Evaluation protocol: detection correctness, per-category accuracy, P/R.

Records carry a qualitative ``detection_correct`` flag (for real data this
comes from manual review; for synthetic data from the fingertip/coverage
proxy) plus the predicted and true labels. Classification accuracy is
computed over records that have a predicted label; precision/recall for the
empty-gripper class is computed over records whose detection was also
qualitatively correct, mirroring the staged evaluation where the classifier
is scored on the detector's usable outputs. Both conventions are exposed via
flags.
"""

from __future__ import annotations

import json
import math
import statistics
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path

from .dataset import BoundingBox, Category, Dataset, Example, GraspLabel
from .errors import MissingGroundTruth
from .pipeline import VerdictRecord

REPORT_CATEGORIES = (Category.NO_OBJECT, Category.RIGID, Category.DEFORMABLE)


@dataclass(frozen=True)
class EvalRecord:
    example_id: str
    category: Category
    object_id: str | None
    detection_correct: bool
    predicted_label: GraspLabel | None
    true_label: GraspLabel

    def __post_init__(self):
        if self.category == Category.NO_OBJECT:
            if self.object_id is not None or self.true_label != GraspLabel.NO_OBJECT:
                raise ValueError(f"{self.example_id}: no_object record with object data")

    def to_json(self) -> dict:
        return {
            "example_id": self.example_id,
            "category": self.category.value,
            "object_id": self.object_id,
            "detection_correct": self.detection_correct,
            "predicted_label": None if self.predicted_label is None else int(self.predicted_label),
            "true_label": int(self.true_label),
        }

    @classmethod
    def from_json(cls, data: dict) -> "EvalRecord":
        return cls(
            example_id=str(data["example_id"]),
            category=Category(data["category"]),
            object_id=data.get("object_id"),
            detection_correct=bool(data["detection_correct"]),
            predicted_label=(
                None if data.get("predicted_label") is None else GraspLabel(int(data["predicted_label"]))
            ),
            true_label=GraspLabel(int(data["true_label"])),
        )


def write_records(records: list[EvalRecord], path: str | Path) -> Path:
    path = Path(path)
    with path.open("w") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_json(), separators=(", ", ": ")) + "\n")
    return path


def read_records(path: str | Path) -> list[EvalRecord]:
    return [
        EvalRecord.from_json(json.loads(line))
        for line in Path(path).read_text().splitlines()
        if line.strip()
    ]


def round_half_up(value: float, decimals: int) -> float:
    quantum = Decimal(1).scaleb(-decimals)
    return float(Decimal(repr(value)).quantize(quantum, rounding=ROUND_HALF_UP))


def _round_int_half_up(value: float) -> int:
    return int(math.floor(value + 0.5))


@dataclass(frozen=True)
class DetectionRow:
    num_images: int
    num_detected: int
    pct_detected: float  # full precision; round at serialization
    pct_objects_correct: float | None  # None for the no-object category


@dataclass(frozen=True)
class DetectionTable:
    rows: dict[Category, DetectionRow]


def detection_table(records: list[EvalRecord]) -> DetectionTable:
    """Per-category detection counts plus the all-examples-correct object rate."""
    rows: dict[Category, DetectionRow] = {}
    for category in REPORT_CATEGORIES:
        cat_records = [r for r in records if r.category == category]
        if not cat_records:
            continue
        num_images = len(cat_records)
        num_detected = sum(1 for r in cat_records if r.detection_correct)
        objects: dict[str, bool] = {}
        for r in cat_records:
            if r.object_id is None:
                continue
            objects[r.object_id] = objects.get(r.object_id, True) and r.detection_correct
        pct_objects = (
            100.0 * sum(objects.values()) / len(objects) if objects else None
        )
        rows[category] = DetectionRow(
            num_images=num_images,
            num_detected=num_detected,
            pct_detected=100.0 * num_detected / num_images,
            pct_objects_correct=pct_objects,
        )
    return DetectionTable(rows)


def detection_correct_synthetic(
    example: Example,
    predicted: BoundingBox,
    gt_fingertips: list[tuple[float, float]] | None,
    gt_mask_fraction: float | None,
) -> bool:
    """Computable proxy for the manual review: both projected fingertips inside
    the predicted box and at least half of the box covered by gripper/object."""
    if gt_fingertips is None or gt_mask_fraction is None:
        raise MissingGroundTruth(
            f"{example.image_ref}: fingertip/coverage ground truth unavailable; "
            "real images require the manual-review path"
        )
    if len(gt_fingertips) != 2:
        raise ValueError("expected exactly two fingertip points")
    tips_inside = all(predicted.contains_point(x, y) for x, y in gt_fingertips)
    return tips_inside and gt_mask_fraction >= 0.5


@dataclass(frozen=True)
class ClassificationTable:
    accuracy: dict[Category, float]  # percentage, full precision


def classification_table(
    records: list[EvalRecord], detected_only: bool = False
) -> ClassificationTable:
    """Per-category accuracy over records with a predicted label.

    ``detected_only`` restricts further to qualitatively correct detections.
    """
    accuracy: dict[Category, float] = {}
    for category in REPORT_CATEGORIES:
        eligible = [
            r
            for r in records
            if r.category == category
            and r.predicted_label is not None
            and (r.detection_correct or not detected_only)
        ]
        if not eligible:
            continue
        correct = sum(1 for r in eligible if r.predicted_label == r.true_label)
        accuracy[category] = 100.0 * correct / len(eligible)
    return ClassificationTable(accuracy)


@dataclass(frozen=True)
class PRScore:
    """Precision/recall with the empty gripper (NO_OBJECT) as positive class.

    ``precision`` is None when nothing was predicted positive (undefined
    rather than 0 or 1, so callers must handle the degenerate case).
    """

    precision: float | None
    recall: float
    tp: int
    fp: int
    fn: int


def precision_recall(records: list[EvalRecord], detected_only: bool = True) -> PRScore:
    if not any(r.true_label == GraspLabel.NO_OBJECT for r in records):
        raise ValueError("precision_recall needs at least one true NO_OBJECT record")
    eligible = [
        r
        for r in records
        if r.predicted_label is not None and (r.detection_correct or not detected_only)
    ]
    tp = sum(
        1
        for r in eligible
        if r.true_label == GraspLabel.NO_OBJECT and r.predicted_label == GraspLabel.NO_OBJECT
    )
    fp = sum(
        1
        for r in eligible
        if r.true_label == GraspLabel.OBJECT and r.predicted_label == GraspLabel.NO_OBJECT
    )
    fn = sum(
        1
        for r in eligible
        if r.true_label == GraspLabel.NO_OBJECT and r.predicted_label == GraspLabel.OBJECT
    )
    precision = tp / (tp + fp) if (tp + fp) > 0 else None
    recall = tp / (tp + fn) if (tp + fn) > 0 else 0.0
    return PRScore(precision=precision, recall=recall, tp=tp, fp=fp, fn=fn)


def derive_pr_from_accuracies(
    counts: dict[Category, int], accuracies: ClassificationTable
) -> PRScore:
    """Reconstruct precision/recall from per-category accuracies and counts.

    Serves as a cross-table consistency oracle: the reconstruction should
    agree with the score computed directly from the records.
    """
    n_no = counts[Category.NO_OBJECT]
    n_rigid = counts[Category.RIGID]
    n_deform = counts[Category.DEFORMABLE]
    acc = accuracies.accuracy
    tp = _round_int_half_up(acc[Category.NO_OBJECT] / 100.0 * n_no)
    fp = _round_int_half_up((1.0 - acc[Category.RIGID] / 100.0) * n_rigid) + _round_int_half_up(
        (1.0 - acc[Category.DEFORMABLE] / 100.0) * n_deform
    )
    fn = n_no - tp
    precision = tp / (tp + fp) if (tp + fp) > 0 else None
    return PRScore(precision=precision, recall=tp / n_no, tp=tp, fp=fp, fn=fn)


@dataclass(frozen=True)
class ConsistencyReport:
    model: str
    derived: PRScore
    measured: PRScore
    tolerance: float
    consistent: bool
    deltas: tuple[float, float]


def check_cross_table_consistency(
    model: str,
    records: list[EvalRecord],
    pr_records: list[EvalRecord] | None = None,
    tolerance: float = 0.002,
) -> ConsistencyReport:
    """Compare the accuracy-derived score against the directly measured one."""
    counts = {
        c: sum(1 for r in records if r.category == c) for c in REPORT_CATEGORIES
    }
    derived = derive_pr_from_accuracies(counts, classification_table(records))
    measured = precision_recall(pr_records if pr_records is not None else records)
    dp = abs((derived.precision or 0.0) - (measured.precision or 0.0))
    dr = abs(derived.recall - measured.recall)
    return ConsistencyReport(
        model=model,
        derived=derived,
        measured=measured,
        tolerance=tolerance,
        consistent=dp <= tolerance and dr <= tolerance,
        deltas=(dp, dr),
    )


def latency_stats(durations: list[float]) -> dict[str, float]:
    """Arithmetic mean and population standard deviation, in milliseconds."""
    if not durations:
        raise ValueError("latency_stats needs at least one duration")
    return {"mean": statistics.fmean(durations), "std": statistics.pstdev(durations)}


def join_verdicts(dataset: Dataset, verdicts: list[VerdictRecord]) -> list[EvalRecord]:
    """Join pipeline verdicts with dataset ground truth into eval records.

    Without manual review or synthetic coverage data, a produced detection is
    taken as qualitatively correct; gripper-not-found lines yield records
    with no predicted label.
    """
    by_id = {v.example_id: v for v in verdicts}
    missing = [ex.image_ref for ex in dataset.examples if ex.image_ref not in by_id]
    if missing:
        raise KeyError(
            f"{len(missing)} dataset examples have no verdict (first: {missing[0]!r})"
        )
    records = []
    for ex in dataset.examples:
        v = by_id[ex.image_ref]
        records.append(
            EvalRecord(
                example_id=ex.image_ref,
                category=ex.annotation.category,
                object_id=ex.annotation.object_id,
                detection_correct=not v.gripper_not_found,
                predicted_label=v.label,
                true_label=ex.annotation.label,
            )
        )
    return records
