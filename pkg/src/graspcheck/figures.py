"""Matplotlib renderings of the evaluation tables, written next to the reports."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .metrics import REPORT_CATEGORIES, ClassificationTable, DetectionTable, PRScore
from .report import CATEGORY_NAMES

_BAR_COLORS = ("#4878cf", "#e8743b", "#6acc65", "#956cb4")


def save_detection_figure(table: DetectionTable, path: str | Path) -> Path:
    categories = [c for c in REPORT_CATEGORIES if c in table.rows]
    names = [CATEGORY_NAMES[c] for c in categories]
    detected = [table.rows[c].pct_detected for c in categories]
    objects = [table.rows[c].pct_objects_correct for c in categories]

    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    x = np.arange(len(categories))
    ax.bar(x - 0.2, detected, width=0.4, color=_BAR_COLORS[0], label="% detected")
    obj_x = [xi + 0.2 for xi, v in zip(x, objects) if v is not None]
    obj_v = [v for v in objects if v is not None]
    if obj_v:
        ax.bar(obj_x, obj_v, width=0.4, color=_BAR_COLORS[1], label="% objects correct")
    ax.set_xticks(x)
    ax.set_xticklabels(names)
    ax.set_ylabel("percent")
    ax.set_ylim(0, 105)
    ax.set_title("Gripper detection on the evaluation set")
    ax.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def save_classification_figure(tables: dict[str, ClassificationTable], path: str | Path) -> Path:
    categories = list(REPORT_CATEGORIES)
    names = [CATEGORY_NAMES[c] for c in categories]
    models = list(tables)
    n = len(models)
    width = 0.8 / max(n, 1)

    fig, ax = plt.subplots(figsize=(6.5, 3.6))
    x = np.arange(len(categories))
    for i, model in enumerate(models):
        values = [tables[model].accuracy.get(c, float("nan")) for c in categories]
        ax.bar(x + (i - (n - 1) / 2) * width, values, width=width,
               color=_BAR_COLORS[i % len(_BAR_COLORS)], label=model)
    ax.set_xticks(x)
    ax.set_xticklabels(names)
    ax.set_ylabel("accuracy (%)")
    ax.set_ylim(0, 105)
    ax.set_title("Classification accuracy per category")
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def save_pr_figure(scores: dict[str, PRScore], path: str | Path) -> Path:
    models = list(scores)
    precision = [scores[m].precision if scores[m].precision is not None else 0.0 for m in models]
    recall = [scores[m].recall for m in models]

    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    x = np.arange(len(models))
    ax.bar(x - 0.2, precision, width=0.4, color=_BAR_COLORS[0], label="precision")
    ax.bar(x + 0.2, recall, width=0.4, color=_BAR_COLORS[1], label="recall")
    ax.set_xticks(x)
    ax.set_xticklabels(models)
    ax.set_ylabel("score")
    ax.set_ylim(0, 1.05)
    ax.set_title("Empty-gripper detection: precision and recall")
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def save_latency_figure(durations_ms: list[float], path: str | Path) -> Path:
    fig, ax = plt.subplots(figsize=(6.0, 3.2))
    ax.hist(durations_ms, bins=30, color=_BAR_COLORS[0])
    ax.set_xlabel("per-image latency (ms)")
    ax.set_ylabel("count")
    ax.set_title("VQA client latency")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)
