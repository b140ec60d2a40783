"""On-disk dataset format, annotation types, loading and statistics.

A dataset directory holds a ``manifest.jsonl`` whose first line is a header
(``manifest_version``, ``split``, ``image_width``, ``image_height``) followed
by one JSON object per example. Image refs are paths relative to the dataset
root; they may point at rendered PNGs or at renderer-agnostic scene-spec JSON
files emitted by the synthesizer.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from pathlib import Path

from .errors import DanglingImageRef, MalformedAnnotation, MissingManifest

MANIFEST_NAME = "manifest.jsonl"
MANIFEST_VERSION = "1"
DEFAULT_IMAGE_SIZE = (640, 480)


class GraspLabel(IntEnum):
    """Binary outcome; 0 encodes that an object is held, 1 that it is not."""

    OBJECT = 0
    NO_OBJECT = 1


class Category(str, Enum):
    NO_OBJECT = "no_object"
    RIGID = "rigid"
    DEFORMABLE = "deformable"


class Split(str, Enum):
    TRAIN = "train"
    VALIDATION = "validation"
    REAL_EVAL = "real_eval"


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box in pixel coordinates, origin top-left."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        for v in (self.x_min, self.y_min, self.x_max, self.y_max):
            if not isinstance(v, (int, float)) or v != v or v in (float("inf"), float("-inf")):
                raise MalformedAnnotation(f"non-finite bbox coordinate: {v!r}")
            if v < 0:
                raise MalformedAnnotation(f"negative bbox coordinate: {v!r}")
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise MalformedAnnotation(
                f"empty bbox: ({self.x_min}, {self.y_min}, {self.x_max}, {self.y_max})"
            )

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def center(self) -> tuple[float, float]:
        return (self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0

    def contains_box(self, other: "BoundingBox", tol: float = 1e-9) -> bool:
        return (
            self.x_min <= other.x_min + tol
            and self.y_min <= other.y_min + tol
            and self.x_max >= other.x_max - tol
            and self.y_max >= other.y_max - tol
        )

    def contains_point(self, x: float, y: float) -> bool:
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max

    def as_list(self) -> list[float]:
        return [self.x_min, self.y_min, self.x_max, self.y_max]

    @classmethod
    def from_list(cls, values) -> "BoundingBox":
        if len(values) != 4:
            raise MalformedAnnotation(f"bbox must have 4 entries, got {len(values)}")
        return cls(*(float(v) for v in values))


@dataclass(frozen=True)
class Annotation:
    gripper_box: BoundingBox
    label: GraspLabel
    category: Category
    object_id: str | None = None

    def __post_init__(self):
        if (self.category == Category.NO_OBJECT) != (self.label == GraspLabel.NO_OBJECT):
            raise MalformedAnnotation(
                f"category {self.category.value} inconsistent with label {int(self.label)}"
            )
        if (self.object_id is not None) != (self.label == GraspLabel.OBJECT):
            raise MalformedAnnotation(
                f"object_id {self.object_id!r} inconsistent with label {int(self.label)}"
            )


@dataclass(frozen=True)
class Example:
    image_ref: str
    annotation: Annotation
    batch_id: int
    example_index_in_batch: int

    def __post_init__(self):
        if self.batch_id < 0 or self.example_index_in_batch < 0:
            raise MalformedAnnotation(
                f"negative batch/index for {self.image_ref!r}: "
                f"({self.batch_id}, {self.example_index_in_batch})"
            )


@dataclass
class Dataset:
    examples: list[Example]
    split: Split
    manifest_version: str = MANIFEST_VERSION
    image_width: int = DEFAULT_IMAGE_SIZE[0]
    image_height: int = DEFAULT_IMAGE_SIZE[1]
    root: Path | None = field(default=None, compare=False)

    def __len__(self) -> int:
        return len(self.examples)

    def __iter__(self):
        return iter(self.examples)


def _parse_example(entry: dict, where: str) -> Example:
    try:
        label = GraspLabel(int(entry["label"]))
        category = Category(entry["category"])
        object_id = entry.get("object_id")
        box = BoundingBox.from_list(entry["bbox"])
        annotation = Annotation(box, label, category, object_id)
        return Example(
            image_ref=str(entry["image"]),
            annotation=annotation,
            batch_id=int(entry["batch"]),
            example_index_in_batch=int(entry["index"]),
        )
    except MalformedAnnotation as exc:
        raise MalformedAnnotation(f"{where}: {exc}") from exc
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedAnnotation(f"{where}: {exc}") from exc


def load_dataset(root_path: str | Path) -> Dataset:
    """Load and validate a dataset directory; order follows the manifest."""
    root = Path(root_path)
    manifest = root / MANIFEST_NAME
    if not manifest.is_file():
        raise MissingManifest(f"no {MANIFEST_NAME} under {root}")

    lines = manifest.read_text().splitlines()
    if not lines:
        raise MissingManifest(f"{manifest} is empty (missing header line)")
    try:
        header = json.loads(lines[0])
        split = Split(header["split"])
        version = str(header["manifest_version"])
        width = int(header["image_width"])
        height = int(header["image_height"])
    except (json.JSONDecodeError, KeyError, ValueError) as exc:
        raise MissingManifest(f"{manifest}: bad header line: {exc}") from exc

    examples: list[Example] = []
    seen_refs: set[str] = set()
    seen_keys: set[tuple[int, int]] = set()
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        where = f"{MANIFEST_NAME}:{lineno}"
        try:
            entry = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedAnnotation(f"{where}: invalid JSON: {exc}") from exc
        ex = _parse_example(entry, where)
        if ex.image_ref in seen_refs:
            raise MalformedAnnotation(f"{where}: duplicate image ref {ex.image_ref!r}")
        key = (ex.batch_id, ex.example_index_in_batch)
        if key in seen_keys:
            raise MalformedAnnotation(f"{where}: duplicate (batch, index) {key}")
        if not (root / ex.image_ref).is_file():
            raise DanglingImageRef(f"{where}: missing file {ex.image_ref!r}")
        seen_refs.add(ex.image_ref)
        seen_keys.add(key)
        examples.append(ex)

    return Dataset(
        examples=examples,
        split=split,
        manifest_version=version,
        image_width=width,
        image_height=height,
        root=root,
    )


def manifest_header_line(dataset: Dataset) -> str:
    return json.dumps(
        {
            "manifest_version": dataset.manifest_version,
            "split": dataset.split.value,
            "image_width": dataset.image_width,
            "image_height": dataset.image_height,
        },
        separators=(", ", ": "),
    )


def manifest_example_line(example: Example) -> str:
    ann = example.annotation
    return json.dumps(
        {
            "image": example.image_ref,
            "batch": example.batch_id,
            "index": example.example_index_in_batch,
            "label": int(ann.label),
            "category": ann.category.value,
            "object_id": ann.object_id,
            "bbox": ann.gripper_box.as_list(),
        },
        separators=(", ", ": "),
    )


def save_dataset(dataset: Dataset, root_path: str | Path) -> Path:
    """Write the canonical manifest; byte-stable for a given dataset."""
    root = Path(root_path)
    root.mkdir(parents=True, exist_ok=True)
    manifest = root / MANIFEST_NAME
    lines = [manifest_header_line(dataset)]
    lines.extend(manifest_example_line(ex) for ex in dataset.examples)
    manifest.write_text("\n".join(lines) + "\n")
    return manifest


def category_counts(dataset: Dataset) -> dict[Category, int]:
    counts = {c: 0 for c in Category}
    for ex in dataset.examples:
        counts[ex.annotation.category] += 1
    return counts


def distinct_objects(dataset: Dataset, category: Category) -> set[str]:
    return {
        ex.annotation.object_id
        for ex in dataset.examples
        if ex.annotation.category == category and ex.annotation.object_id is not None
    }
