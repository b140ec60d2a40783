"""Rendering of evaluation tables as aligned text, JSON, and CSV."""

from __future__ import annotations

import csv
import json
from pathlib import Path

from .dataset import Category
from .metrics import (
    REPORT_CATEGORIES,
    ClassificationTable,
    ConsistencyReport,
    DetectionTable,
    PRScore,
    round_half_up,
)

CATEGORY_NAMES = {
    Category.NO_OBJECT: "No Object",
    Category.RIGID: "Rigid",
    Category.DEFORMABLE: "Deformable",
}

# printed decimals per table; internal values stay full precision
DETECTION_DECIMALS = 2
CLASSIFICATION_DECIMALS = 1
PR_DECIMALS = 3


def _fmt(value: float | None, decimals: int) -> str:
    if value is None:
        return "N/A"
    return f"{round_half_up(value, decimals):.{decimals}f}"


def _align(rows: list[list[str]]) -> str:
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    return "\n".join("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in rows)


def render_detection_table(table: DetectionTable) -> str:
    rows = [["Category", "Num. Images", "Num. Detected", "% Detected", "% Objects Correct"]]
    for category in REPORT_CATEGORIES:
        if category not in table.rows:
            continue
        r = table.rows[category]
        rows.append(
            [
                CATEGORY_NAMES[category],
                str(r.num_images),
                str(r.num_detected),
                _fmt(r.pct_detected, DETECTION_DECIMALS),
                _fmt(r.pct_objects_correct, DETECTION_DECIMALS),
            ]
        )
    return _align(rows)


def render_classification_table(tables: dict[str, ClassificationTable]) -> str:
    rows = [["Category"] + [f"{name} Accuracy (%)" for name in tables]]
    for category in REPORT_CATEGORIES:
        row = [CATEGORY_NAMES[category]]
        for table in tables.values():
            row.append(_fmt(table.accuracy.get(category), CLASSIFICATION_DECIMALS))
        rows.append(row)
    return _align(rows)


def render_pr_table(scores: dict[str, PRScore]) -> str:
    rows = [["Model", "Precision", "Recall"]]
    for name, score in scores.items():
        rows.append([name, _fmt(score.precision, PR_DECIMALS), _fmt(score.recall, PR_DECIMALS)])
    return _align(rows)


def render_consistency_report(reports: list[ConsistencyReport]) -> str:
    lines = ["Cross-table consistency (accuracy-derived vs measured precision/recall):"]
    for rep in reports:
        status = "consistent" if rep.consistent else "DISCREPANT"
        lines.append(
            f"  {rep.model}: {status} "
            f"(derived {_fmt(rep.derived.precision, PR_DECIMALS)}/{_fmt(rep.derived.recall, PR_DECIMALS)}, "
            f"measured {_fmt(rep.measured.precision, PR_DECIMALS)}/{_fmt(rep.measured.recall, PR_DECIMALS)}, "
            f"max delta {max(rep.deltas):.4f}, tolerance {rep.tolerance})"
        )
    return "\n".join(lines)


def detection_table_json(table: DetectionTable) -> dict:
    return {
        category.value: {
            "num_images": row.num_images,
            "num_detected": row.num_detected,
            "pct_detected": round_half_up(row.pct_detected, DETECTION_DECIMALS),
            "pct_objects_correct": (
                None
                if row.pct_objects_correct is None
                else round_half_up(row.pct_objects_correct, DETECTION_DECIMALS)
            ),
        }
        for category, row in table.rows.items()
    }


def classification_table_json(tables: dict[str, ClassificationTable]) -> dict:
    return {
        name: {
            category.value: round_half_up(value, CLASSIFICATION_DECIMALS)
            for category, value in table.accuracy.items()
        }
        for name, table in tables.items()
    }


def pr_table_json(scores: dict[str, PRScore]) -> dict:
    return {
        name: {
            "precision": None if s.precision is None else round_half_up(s.precision, PR_DECIMALS),
            "recall": round_half_up(s.recall, PR_DECIMALS),
            "tp": s.tp,
            "fp": s.fp,
            "fn": s.fn,
        }
        for name, s in scores.items()
    }


def consistency_report_json(reports: list[ConsistencyReport]) -> dict:
    return {
        rep.model: {
            "consistent": rep.consistent,
            "derived_precision": None
            if rep.derived.precision is None
            else round_half_up(rep.derived.precision, PR_DECIMALS),
            "derived_recall": round_half_up(rep.derived.recall, PR_DECIMALS),
            "measured_precision": None
            if rep.measured.precision is None
            else round_half_up(rep.measured.precision, PR_DECIMALS),
            "measured_recall": round_half_up(rep.measured.recall, PR_DECIMALS),
            "deltas": [round(d, 6) for d in rep.deltas],
            "tolerance": rep.tolerance,
        }
        for rep in reports
    }


def write_detection_csv(table: DetectionTable, path: str | Path):
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["category", "num_images", "num_detected", "pct_detected", "pct_objects_correct"])
        for category, row in table.rows.items():
            writer.writerow(
                [
                    category.value,
                    row.num_images,
                    row.num_detected,
                    _fmt(row.pct_detected, DETECTION_DECIMALS),
                    _fmt(row.pct_objects_correct, DETECTION_DECIMALS),
                ]
            )


def write_classification_csv(tables: dict[str, ClassificationTable], path: str | Path):
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["category"] + list(tables))
        for category in REPORT_CATEGORIES:
            writer.writerow(
                [category.value]
                + [_fmt(t.accuracy.get(category), CLASSIFICATION_DECIMALS) for t in tables.values()]
            )


def write_pr_csv(scores: dict[str, PRScore], path: str | Path):
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "precision", "recall", "tp", "fp", "fn"])
        for name, s in scores.items():
            writer.writerow([name, _fmt(s.precision, PR_DECIMALS), _fmt(s.recall, PR_DECIMALS), s.tp, s.fp, s.fn])


def write_json(payload: dict, path: str | Path):
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")
