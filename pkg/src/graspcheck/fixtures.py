"""Bundled reference fixtures.

These encode the outcomes of a 518-image real-robot evaluation (158 empty
gripper, 150 rigid-object and 210 deformable-object examples; every object
appears 5 to 10 times) for three classifiers: the bundled two-stage pipeline
and two VQA services. They serve as oracle targets for the metric suite and
as offline replay data for the VQA runner.

The llama run is knowingly internally inconsistent: its per-category
accuracies and its precision/recall cannot be produced by one record set, so
two record sets reproduce the two summaries independently and the
cross-table consistency check is expected to flag the mismatch.
"""

from __future__ import annotations

import importlib.resources
import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import (
    Annotation,
    BoundingBox,
    Category,
    Dataset,
    Example,
    GraspLabel,
    Split,
    save_dataset,
)
from .metrics import EvalRecord, write_records

REAL_EVAL_IMAGE_SIZE = (640, 480)

# category sizes and object multiplicities of the real evaluation set
NO_OBJECT_COUNT = 158
RIGID_OBJECT_COUNTS = {f"rigid_{i:02d}": n for i, n in enumerate([10] * 10 + [9] * 5 + [5])}
DEFORMABLE_OBJECT_COUNTS = {f"deform_{i:02d}": n for i, n in enumerate([10] * 3 + [9] * 20)}

# two-stage detector review outcomes: 155/158, 142/150 and 203/210 boxes were
# qualitatively correct; failures concentrate on a subset of objects
NO_OBJECT_DETECTION_FAILURES = 3
RIGID_DETECTION_FAILURES = {
    "rigid_10": 2, "rigid_11": 2, "rigid_12": 1, "rigid_13": 1, "rigid_14": 1, "rigid_15": 1,
}
DEFORMABLE_DETECTION_FAILURES = {"deform_19": 2, "deform_20": 2, "deform_21": 2, "deform_22": 1}

# wrong-label counts per model, split by detection-review outcome where the
# model has a detection stage: (wrong among correct dets, wrong among incorrect dets)
TWO_STAGE_WRONG = {
    Category.NO_OBJECT: (39, 1),
    Category.RIGID: (19, 1),
    Category.DEFORMABLE: (36, 0),
}
GPT4O_WRONG = {Category.NO_OBJECT: 8, Category.RIGID: 7, Category.DEFORMABLE: 46}
LLAMA_CLASSIFICATION_WRONG = {Category.NO_OBJECT: 81, Category.RIGID: 47, Category.DEFORMABLE: 84}
LLAMA_PR_WRONG = {Category.NO_OBJECT: 77, Category.RIGID: 47, Category.DEFORMABLE: 99}

# two-point latency profile with exact mean 2270 ms and population std 1530 ms
GPT4O_LATENCY_LOW_MS = 740.0
GPT4O_LATENCY_HIGH_MS = 3800.0
GPT4O_COST_PER_CALL = "0.001"

FIXTURE_FILES = {
    "two_stage": "two_stage_records.jsonl",
    "gpt4o": "gpt4o_records.jsonl",
    "llama": "llama_records.jsonl",
    "llama_pr": "llama_pr_records.jsonl",
}
RECORDING_FILE = "gpt4o_vqa_recording.jsonl"

_YES_REPLIES = (
    "Yes.",
    "Yes, there is an object in the gripper.",
    "Yes, the gripper is holding something.",
)
_NO_REPLIES = (
    "No.",
    "No, the gripper is empty.",
    "No, I see nothing between the fingers.",
)


@dataclass(frozen=True)
class _Entry:
    example_id: str
    category: Category
    object_id: str | None
    true_label: GraspLabel


def real_eval_entries() -> list[_Entry]:
    """Ordered example roster: empty-gripper block, rigid block, deformable block."""
    entries: list[_Entry] = []
    index = 0

    def add(category: Category, object_id: str | None, label: GraspLabel):
        nonlocal index
        entries.append(_Entry(f"images/img_{index:04d}.png", category, object_id, label))
        index += 1

    for _ in range(NO_OBJECT_COUNT):
        add(Category.NO_OBJECT, None, GraspLabel.NO_OBJECT)
    for object_id, count in RIGID_OBJECT_COUNTS.items():
        for _ in range(count):
            add(Category.RIGID, object_id, GraspLabel.OBJECT)
    for object_id, count in DEFORMABLE_OBJECT_COUNTS.items():
        for _ in range(count):
            add(Category.DEFORMABLE, object_id, GraspLabel.OBJECT)
    return entries


def _two_stage_detection_flags(entries: list[_Entry]) -> list[bool]:
    flags = [True] * len(entries)
    remaining = {**RIGID_DETECTION_FAILURES, **DEFORMABLE_DETECTION_FAILURES}
    no_object_left = NO_OBJECT_DETECTION_FAILURES
    for i, entry in enumerate(entries):
        if entry.category == Category.NO_OBJECT:
            if no_object_left > 0:
                flags[i] = False
                no_object_left -= 1
        elif entry.object_id in remaining and remaining[entry.object_id] > 0:
            flags[i] = False
            remaining[entry.object_id] -= 1
    return flags


def _flip(true_label: GraspLabel) -> GraspLabel:
    return GraspLabel.OBJECT if true_label == GraspLabel.NO_OBJECT else GraspLabel.NO_OBJECT


def _spread_wrong(indices: list[int], count: int, rng: np.random.Generator) -> set[int]:
    if count > len(indices):
        raise ValueError("more wrong labels requested than eligible records")
    chosen = rng.choice(len(indices), size=count, replace=False)
    return {indices[int(i)] for i in chosen}


def two_stage_records() -> list[EvalRecord]:
    entries = real_eval_entries()
    flags = _two_stage_detection_flags(entries)
    rng = np.random.default_rng(np.random.SeedSequence([7001]))
    wrong: set[int] = set()
    for category, (wrong_ok, wrong_bad) in TWO_STAGE_WRONG.items():
        ok = [i for i, e in enumerate(entries) if e.category == category and flags[i]]
        bad = [i for i, e in enumerate(entries) if e.category == category and not flags[i]]
        wrong |= _spread_wrong(ok, wrong_ok, rng)
        wrong |= _spread_wrong(bad, wrong_bad, rng)
    return [
        EvalRecord(
            example_id=e.example_id,
            category=e.category,
            object_id=e.object_id,
            detection_correct=flags[i],
            predicted_label=_flip(e.true_label) if i in wrong else e.true_label,
            true_label=e.true_label,
        )
        for i, e in enumerate(entries)
    ]


def _vqa_records(wrong_counts: dict[Category, int], seed: int) -> list[EvalRecord]:
    entries = real_eval_entries()
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    wrong: set[int] = set()
    for category, count in wrong_counts.items():
        eligible = [i for i, e in enumerate(entries) if e.category == category]
        wrong |= _spread_wrong(eligible, count, rng)
    return [
        EvalRecord(
            example_id=e.example_id,
            category=e.category,
            object_id=e.object_id,
            detection_correct=True,
            predicted_label=_flip(e.true_label) if i in wrong else e.true_label,
            true_label=e.true_label,
        )
        for i, e in enumerate(entries)
    ]


def gpt4o_records() -> list[EvalRecord]:
    return _vqa_records(GPT4O_WRONG, seed=7002)


def llama_records() -> list[EvalRecord]:
    return _vqa_records(LLAMA_CLASSIFICATION_WRONG, seed=7003)


def llama_pr_records() -> list[EvalRecord]:
    return _vqa_records(LLAMA_PR_WRONG, seed=7004)


def builders() -> dict[str, callable]:
    return {
        "two_stage": two_stage_records,
        "gpt4o": gpt4o_records,
        "llama": llama_records,
        "llama_pr": llama_pr_records,
    }


def gpt4o_recording_lines() -> list[dict]:
    """Replay recording whose parsed answers reproduce the gpt4o records."""
    lines = []
    for i, record in enumerate(gpt4o_records()):
        says_yes = record.predicted_label == GraspLabel.OBJECT
        pool = _YES_REPLIES if says_yes else _NO_REPLIES
        lines.append(
            {
                "example_id": record.example_id,
                "raw_text": pool[i % len(pool)],
                "latency_ms": GPT4O_LATENCY_LOW_MS if i % 2 == 0 else GPT4O_LATENCY_HIGH_MS,
                "cost": GPT4O_COST_PER_CALL,
            }
        )
    return lines


def write_fixture_files(directory: str | Path) -> dict[str, Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written: dict[str, Path] = {}
    for name, builder in builders().items():
        written[name] = write_records(builder(), directory / FIXTURE_FILES[name])
    recording = directory / RECORDING_FILE
    with recording.open("w") as fh:
        for line in gpt4o_recording_lines():
            fh.write(json.dumps(line, separators=(", ", ": ")) + "\n")
    written["recording"] = recording
    return written


def fixture_path(filename: str) -> Path:
    resource = importlib.resources.files("graspcheck").joinpath("fixtures", filename)
    return Path(str(resource))


def shipped_records(name: str) -> list[EvalRecord]:
    from .metrics import read_records

    return read_records(fixture_path(FIXTURE_FILES[name]))


def shipped_recording_path() -> Path:
    return fixture_path(RECORDING_FILE)


# --- dataset materialization --------------------------------------------------


def _placeholder_png_bytes() -> bytes:
    from PIL import Image

    buf = io.BytesIO()
    Image.new("RGB", (8, 6), (90, 90, 96)).save(buf, format="PNG")
    return buf.getvalue()


def _entry_bbox(index: int) -> BoundingBox:
    jx = (index * 7) % 30
    jy = (index * 5) % 24
    return BoundingBox(220.0 + jx, 140.0 + jy, 420.0 + jx, 340.0 + jy)


def materialize_real_eval_dataset(out_dir: str | Path) -> Dataset:
    """Write the evaluation manifest plus placeholder image files.

    Real pixel data is not distributable; replay-based flows only need the
    manifest (labels, categories, object ids) and files that exist on disk.
    """
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    png = _placeholder_png_bytes()
    examples = []
    for i, entry in enumerate(real_eval_entries()):
        (out / entry.example_id).write_bytes(png)
        examples.append(
            Example(
                image_ref=entry.example_id,
                annotation=Annotation(
                    gripper_box=_entry_bbox(i),
                    label=entry.true_label,
                    category=entry.category,
                    object_id=entry.object_id,
                ),
                batch_id=i // 10,
                example_index_in_batch=i % 10,
            )
        )
    dataset = Dataset(
        examples=examples,
        split=Split.REAL_EVAL,
        image_width=REAL_EVAL_IMAGE_SIZE[0],
        image_height=REAL_EVAL_IMAGE_SIZE[1],
        root=out,
    )
    save_dataset(dataset, out)
    return dataset


def write_demo_backends(directory: str | Path) -> tuple[Path, Path]:
    """Detector/classifier replay files driving the pipeline over the
    materialized evaluation set; the three empty-gripper images whose
    detection review failed yield no candidates at any threshold."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    records = two_stage_records()
    undetectable = {
        r.example_id
        for r in records
        if r.category == Category.NO_OBJECT and not r.detection_correct
    }
    detector: dict[str, list[dict]] = {}
    classifier: dict[str, float] = {}
    for i, record in enumerate(records):
        if record.example_id in undetectable:
            detector[record.example_id] = []
            continue
        box = _entry_bbox(i)
        spread = 8.0 + (i % 5)
        detector[record.example_id] = [
            {"bbox": box.as_list(), "confidence": 0.35 + (i % 40) / 100.0},
            {
                "bbox": [box.x_min + spread, box.y_min + spread, box.x_max + spread, box.y_max + spread],
                "confidence": 0.21 + (i % 30) / 200.0,
            },
        ]
        classifier[record.example_id] = (
            0.9 if record.predicted_label == GraspLabel.NO_OBJECT else 0.02
        )
    detector_path = directory / "demo_detector.json"
    classifier_path = directory / "demo_classifier.json"
    detector_path.write_text(json.dumps(detector, indent=1) + "\n")
    classifier_path.write_text(json.dumps(classifier, indent=1) + "\n")
    return detector_path, classifier_path
