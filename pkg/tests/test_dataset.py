from __future__ import annotations

import json

import pytest

from graspcheck.dataset import (
    Annotation,
    BoundingBox,
    Category,
    Dataset,
    GraspLabel,
    Split,
    category_counts,
    distinct_objects,
    load_dataset,
    save_dataset,
)
from graspcheck.errors import DanglingImageRef, MalformedAnnotation, MissingManifest
from graspcheck import fixtures as fx

from conftest import make_example, write_dataset_dir


def test_bounding_box_invariants():
    box = BoundingBox(1.0, 2.0, 11.0, 22.0)
    assert box.width == 10.0 and box.height == 20.0
    assert box.center == (6.0, 12.0)
    with pytest.raises(MalformedAnnotation):
        BoundingBox(10.0, 0.0, 5.0, 5.0)  # x_min > x_max
    with pytest.raises(MalformedAnnotation):
        BoundingBox(-1.0, 0.0, 5.0, 5.0)
    with pytest.raises(MalformedAnnotation):
        BoundingBox(float("nan"), 0.0, 5.0, 5.0)


def test_grasp_label_encoding_is_fixed():
    assert GraspLabel.OBJECT == 0
    assert GraspLabel.NO_OBJECT == 1


def test_annotation_coherence():
    box = BoundingBox(0.0, 0.0, 10.0, 10.0)
    with pytest.raises(MalformedAnnotation):
        Annotation(box, GraspLabel.NO_OBJECT, Category.RIGID, None)
    with pytest.raises(MalformedAnnotation):
        Annotation(box, GraspLabel.OBJECT, Category.RIGID, None)  # object_id required
    with pytest.raises(MalformedAnnotation):
        Annotation(box, GraspLabel.NO_OBJECT, Category.NO_OBJECT, "mug")


def test_load_empty_manifest(tmp_path):
    write_dataset_dir(tmp_path, [])
    dataset = load_dataset(tmp_path)
    assert len(dataset) == 0
    assert dataset.split == Split.REAL_EVAL


def test_missing_manifest(tmp_path):
    with pytest.raises(MissingManifest):
        load_dataset(tmp_path)


def test_load_real_eval_fixture_has_518_examples(tmp_path):
    fx.materialize_real_eval_dataset(tmp_path)
    dataset = load_dataset(tmp_path)
    assert len(dataset) == 518
    # order-stable load
    assert dataset.examples[0].image_ref == "images/img_0000.png"
    assert dataset.examples[-1].image_ref == "images/img_0517.png"


def test_malformed_entry_names_the_line(tmp_path):
    write_dataset_dir(tmp_path, [make_example(0)])
    manifest = tmp_path / "manifest.jsonl"
    lines = manifest.read_text().splitlines()
    bad = json.loads(lines[1])
    bad["bbox"] = [50.0, 10.0, 40.0, 20.0]  # x_min > x_max
    manifest.write_text("\n".join([lines[0], json.dumps(bad)]) + "\n")
    with pytest.raises(MalformedAnnotation, match="manifest.jsonl:2"):
        load_dataset(tmp_path)


def test_dangling_image_ref(tmp_path):
    write_dataset_dir(tmp_path, [make_example(0)])
    (tmp_path / "images" / "img_0000.png").unlink()
    with pytest.raises(DanglingImageRef):
        load_dataset(tmp_path)


def test_duplicate_image_ref_rejected(tmp_path):
    write_dataset_dir(tmp_path, [make_example(0), make_example(1)])
    manifest = tmp_path / "manifest.jsonl"
    lines = manifest.read_text().splitlines()
    dup = json.loads(lines[1])
    dup["batch"], dup["index"] = 99, 9
    manifest.write_text("\n".join([lines[0], lines[1], json.dumps(dup)]) + "\n")
    with pytest.raises(MalformedAnnotation, match="duplicate image ref"):
        load_dataset(tmp_path)


def test_round_trip_is_byte_identical(tmp_path):
    fx.materialize_real_eval_dataset(tmp_path / "a")
    original = (tmp_path / "a" / "manifest.jsonl").read_bytes()
    dataset = load_dataset(tmp_path / "a")
    save_dataset(dataset, tmp_path / "a")
    assert (tmp_path / "a" / "manifest.jsonl").read_bytes() == original


def test_category_counts_real_eval(tmp_path):
    fx.materialize_real_eval_dataset(tmp_path)
    dataset = load_dataset(tmp_path)
    counts = category_counts(dataset)
    assert counts == {Category.NO_OBJECT: 158, Category.RIGID: 150, Category.DEFORMABLE: 210}
    assert sum(counts.values()) == len(dataset)


def test_category_counts_empty():
    dataset = Dataset(examples=[], split=Split.TRAIN)
    assert category_counts(dataset) == {c: 0 for c in Category}


def test_category_counts_sum_over_large_inmemory_dataset():
    examples = [
        make_example(
            i,
            label=GraspLabel.OBJECT if i % 2 else GraspLabel.NO_OBJECT,
            category=Category.RIGID if i % 2 else Category.NO_OBJECT,
            object_id=f"obj_{i % 7}" if i % 2 else None,
        )
        for i in range(12000)
    ]
    counts = category_counts(Dataset(examples=examples, split=Split.TRAIN))
    assert sum(counts.values()) == 12000


def test_distinct_objects(tmp_path):
    fx.materialize_real_eval_dataset(tmp_path)
    dataset = load_dataset(tmp_path)
    assert len(distinct_objects(dataset, Category.RIGID)) == 16
    assert len(distinct_objects(dataset, Category.DEFORMABLE)) == 23
    assert distinct_objects(dataset, Category.NO_OBJECT) == set()


def test_real_eval_object_multiplicity(tmp_path):
    fx.materialize_real_eval_dataset(tmp_path)
    dataset = load_dataset(tmp_path)
    per_object: dict[str, int] = {}
    for ex in dataset.examples:
        if ex.annotation.object_id is not None:
            per_object[ex.annotation.object_id] = per_object.get(ex.annotation.object_id, 0) + 1
    assert per_object and all(5 <= n <= 10 for n in per_object.values())


def test_no_object_count_matches_label_count(tmp_path):
    fx.materialize_real_eval_dataset(tmp_path)
    dataset = load_dataset(tmp_path)
    by_label = sum(1 for ex in dataset.examples if ex.annotation.label == GraspLabel.NO_OBJECT)
    assert by_label == category_counts(dataset)[Category.NO_OBJECT]
