"""Run configuration: one YAML/JSON file driving every CLI subcommand.

Unknown keys are rejected so typos fail loudly; every value is re-validated
through the owning module's constructors.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .detect import ClusterConfig, PadConfig, ThresholdSchedule
from .errors import ConfigError
from .pipeline import (
    DecisionConfig,
    PipelineConfig,
    TrainingPlan,
    training_plan_from_json,
)
from .synth import GenConfig
from .vqa import VqaConfig


@dataclass(frozen=True)
class EvalSection:
    out_dir: str = "eval_out"
    records: dict[str, str] = field(default_factory=dict)
    pr_records: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class VqaSection:
    prompt_version: str = "v1"
    replay_path: str | None = None
    parallelism: int = 1

    def client_config(self) -> VqaConfig:
        return VqaConfig(prompt_version=self.prompt_version, parallelism=self.parallelism)


@dataclass(frozen=True)
class RunConfig:
    gen: GenConfig = field(default_factory=GenConfig)
    detect_schedule: ThresholdSchedule = field(default_factory=ThresholdSchedule)
    detect_cluster: ClusterConfig = field(default_factory=ClusterConfig)
    detect_pad: PadConfig = field(default_factory=PadConfig)
    decision: DecisionConfig = field(default_factory=DecisionConfig)
    training_plan: TrainingPlan = field(default_factory=TrainingPlan.default)
    eval: EvalSection = field(default_factory=EvalSection)
    vqa: VqaSection = field(default_factory=VqaSection)

    def pipeline_config(self) -> PipelineConfig:
        return PipelineConfig(
            schedule=self.detect_schedule,
            cluster=self.detect_cluster,
            pad=self.detect_pad,
            decision=self.decision,
        )


# GenConfig fields that may be set from the config file (geometry-model fields
# like room/robot stay code-level defaults)
_GEN_KEYS = {
    "batch_size",
    "distractor_min",
    "distractor_max",
    "p_grasp",
    "asset_pool",
    "pool_size",
    "distractor_scale",
    "grasp_extent",
    "aperture_step",
    "max_attempts",
    "camera_offset_delta",
    "camera_offset_limit",
    "image_width",
    "image_height",
    "focal_length",
}

TOP_LEVEL_KEYS = ("gen", "detect", "decide", "training_plan", "eval", "vqa")


def _check_keys(data: dict, allowed, where: str):
    unknown = set(data) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(sorted(unknown))}")


def _build_flat(cls, data: dict, where: str, allowed: set[str] | None = None):
    names = {f.name for f in dataclasses.fields(cls)}
    allowed = allowed if allowed is not None else names
    _check_keys(data, allowed, where)
    kwargs = {}
    for key, value in data.items():
        if isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def parse_config(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    _check_keys(data, TOP_LEVEL_KEYS, "config")

    gen = _build_flat(GenConfig, data.get("gen", {}), "gen", allowed=_GEN_KEYS)
    try:
        gen.validate()
    except ValueError as exc:
        raise ConfigError(f"gen: {exc}") from exc

    detect = data.get("detect", {})
    _check_keys(detect, ("schedule", "cluster", "pad"), "detect")
    schedule = _build_flat(ThresholdSchedule, detect.get("schedule", {}), "detect.schedule")
    cluster = _build_flat(ClusterConfig, detect.get("cluster", {}), "detect.cluster")
    pad = _build_flat(PadConfig, detect.get("pad", {}), "detect.pad")

    decision = _build_flat(DecisionConfig, data.get("decide", {}), "decide")

    plan_data = data.get("training_plan")
    if plan_data is None:
        plan = TrainingPlan.default()
    else:
        _check_keys(plan_data, ("stages", "detector_epochs"), "training_plan")
        try:
            plan = training_plan_from_json(plan_data)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"training_plan: {exc}") from exc

    eval_data = dict(data.get("eval", {}))
    _check_keys(eval_data, ("out_dir", "records", "pr_records"), "eval")
    eval_section = EvalSection(
        out_dir=str(eval_data.get("out_dir", "eval_out")),
        records={str(k): str(v) for k, v in (eval_data.get("records") or {}).items()},
        pr_records={str(k): str(v) for k, v in (eval_data.get("pr_records") or {}).items()},
    )

    vqa_section = _build_flat(VqaSection, data.get("vqa", {}), "vqa")

    return RunConfig(
        gen=gen,
        detect_schedule=schedule,
        detect_cluster=cluster,
        detect_pad=pad,
        decision=decision,
        training_plan=plan,
        eval=eval_section,
        vqa=vqa_section,
    )


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text()
    if path.suffix.lower() == ".json":
        data = json.loads(text)
    else:
        data = yaml.safe_load(text) or {}
    return parse_config(data)
