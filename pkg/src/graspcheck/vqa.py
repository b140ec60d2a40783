"""Zero-shot VQA baseline: fixed prompt, pluggable client, offline replay.

The same prompt is sent for every example in a run and never includes object
identity. Answers are parsed to the binary label by scanning for the first
whole-word yes/no token; anything else counts as unparseable and is reported
separately rather than silently mapped to a label.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path
from typing import Protocol
import re

from .dataset import Dataset, GraspLabel
from .errors import ClientFailure, UnparseableAnswer, UnsupportedOption
from .metrics import EvalRecord, latency_stats

PROMPT_TEMPLATES = {
    "v1": (
        "You are shown an image from a robot's head-mounted camera looking at its "
        "two-finger gripper. Does the gripper currently hold any object? "
        "Reply with exactly one word: YES if it holds an object, NO if it is empty."
    ),
}

API_KEY_ENV = "GRASPCHECK_VQA_API_KEY"
ENDPOINT_ENV = "GRASPCHECK_VQA_ENDPOINT"
MODEL_ENV = "GRASPCHECK_VQA_MODEL"


@dataclass(frozen=True)
class VqaConfig:
    prompt_version: str = "v1"
    include_object_hints: bool = False
    parallelism: int = 1


@dataclass(frozen=True)
class VqaPrompt:
    text: str
    version: str = "v1"


@dataclass(frozen=True)
class VqaResponse:
    raw_text: str
    latency_ms: float
    cost: Decimal = Decimal("0")

    def __post_init__(self):
        if self.latency_ms < 0:
            raise ValueError("latency must be non-negative")
        if self.cost < 0:
            raise ValueError("cost must be non-negative")


class VqaClient(Protocol):
    def ask(self, example_id: str, image_path: Path | None, prompt: str) -> VqaResponse: ...


def build_prompt(config: VqaConfig | None = None) -> VqaPrompt:
    """Fixed run-wide prompt; per-object hints are deliberately unsupported."""
    config = config or VqaConfig()
    if config.include_object_hints:
        raise UnsupportedOption(
            "object hints are not part of the protocol: the prompt must be "
            "identical for every example and carry no object information"
        )
    if config.prompt_version not in PROMPT_TEMPLATES:
        raise UnsupportedOption(f"unknown prompt version {config.prompt_version!r}")
    return VqaPrompt(PROMPT_TEMPLATES[config.prompt_version], config.prompt_version)


_ANSWER_TOKEN = re.compile(r"\b(yes|no)\b", re.IGNORECASE)


def parse_answer(raw_text: str) -> GraspLabel:
    """First whole-word yes/no decides the label; 'nothing' never matches 'no'."""
    match = _ANSWER_TOKEN.search(raw_text)
    if match is None:
        raise UnparseableAnswer(f"no yes/no token in reply: {raw_text!r}")
    return GraspLabel.OBJECT if match.group(1).lower() == "yes" else GraspLabel.NO_OBJECT


class ReplayVqaClient:
    """Deterministic client replaying a recorded run.

    Recording format (JSON lines): ``{"example_id": ..., "raw_text": ...,
    "latency_ms": ..., "cost": "0.001"}`` with cost as a decimal string.
    """

    def __init__(self, recording_path: str | Path):
        self._responses: dict[str, VqaResponse] = {}
        path = Path(recording_path)
        if not path.is_file():
            raise ClientFailure(f"replay recording not found: {path}")
        for line in path.read_text().splitlines():
            if not line.strip():
                continue
            entry = json.loads(line)
            self._responses[str(entry["example_id"])] = VqaResponse(
                raw_text=str(entry["raw_text"]),
                latency_ms=float(entry["latency_ms"]),
                cost=Decimal(str(entry["cost"])),
            )

    def ask(self, example_id: str, image_path: Path | None, prompt: str) -> VqaResponse:
        if example_id not in self._responses:
            raise ClientFailure(f"no recorded response for example {example_id!r}")
        return self._responses[example_id]


class LiveVqaClient:
    """Thin adapter for an OpenAI-style chat endpoint.

    Credentials come from the environment (GRASPCHECK_VQA_API_KEY,
    GRASPCHECK_VQA_ENDPOINT, optional GRASPCHECK_VQA_MODEL); they are never
    read from config files.
    """

    def __init__(self, per_call_cost: Decimal = Decimal("0.001"), timeout: float = 60.0):
        self.api_key = os.environ.get(API_KEY_ENV)
        self.endpoint = os.environ.get(ENDPOINT_ENV)
        self.model = os.environ.get(MODEL_ENV, "gpt-4o")
        self.per_call_cost = per_call_cost
        self.timeout = timeout
        if not self.api_key or not self.endpoint:
            raise ClientFailure(
                f"live VQA client needs {API_KEY_ENV} and {ENDPOINT_ENV} set in the environment"
            )

    def ask(self, example_id: str, image_path: Path | None, prompt: str) -> VqaResponse:
        import base64
        import time
        import urllib.request

        if image_path is None or not Path(image_path).is_file():
            raise ClientFailure(f"image file unavailable for {example_id!r}")
        image_b64 = base64.b64encode(Path(image_path).read_bytes()).decode("ascii")
        body = json.dumps(
            {
                "model": self.model,
                "messages": [
                    {
                        "role": "user",
                        "content": [
                            {"type": "text", "text": prompt},
                            {
                                "type": "image_url",
                                "image_url": {"url": f"data:image/png;base64,{image_b64}"},
                            },
                        ],
                    }
                ],
            }
        ).encode()
        request = urllib.request.Request(
            self.endpoint,
            data=body,
            headers={"Content-Type": "application/json", "Authorization": f"Bearer {self.api_key}"},
        )
        start = time.perf_counter()
        try:
            with urllib.request.urlopen(request, timeout=self.timeout) as resp:
                payload = json.loads(resp.read())
        except OSError as exc:
            raise ClientFailure(f"VQA request failed for {example_id!r}: {exc}") from exc
        latency = (time.perf_counter() - start) * 1000.0
        try:
            text = payload["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ClientFailure(f"unexpected VQA response shape: {exc}") from exc
        return VqaResponse(raw_text=str(text), latency_ms=latency, cost=self.per_call_cost)


class _SamePromptShim:
    """Asserts the prompt string is identical across every call of a run."""

    def __init__(self, client: VqaClient):
        self._client = client
        self._prompt: str | None = None

    def ask(self, example_id: str, image_path: Path | None, prompt: str) -> VqaResponse:
        if self._prompt is None:
            self._prompt = prompt
        elif prompt != self._prompt:
            raise AssertionError("prompt changed between calls within one run")
        return self._client.ask(example_id, image_path, prompt)


@dataclass
class VqaRunResult:
    records: list[EvalRecord]
    latency: dict[str, float]
    total_cost: Decimal
    unparseable: list[str] = field(default_factory=list)
    durations_ms: list[float] = field(default_factory=list)


def run_vqa_eval(dataset: Dataset, client: VqaClient, prompt: VqaPrompt, parallelism: int = 1) -> VqaRunResult:
    """One client call per example with the identical prompt.

    Records carry the parsed label (the VQA path has no detection stage, so
    detection_correct is always true); unparseable replies yield a record with
    no predicted label and are tallied separately.
    """
    shim = _SamePromptShim(client)

    def one(ex) -> VqaResponse:
        image_path = None if dataset.root is None else dataset.root / ex.image_ref
        return shim.ask(ex.image_ref, image_path, prompt.text)

    records: list[EvalRecord] = []
    unparseable: list[str] = []
    durations: list[float] = []
    total_cost = Decimal("0")
    try:
        if parallelism > 1:
            with ThreadPoolExecutor(max_workers=parallelism) as pool:
                response_iter = pool.map(one, dataset.examples)
        else:
            response_iter = map(one, dataset.examples)
        for ex, response in zip(dataset.examples, response_iter):
            durations.append(response.latency_ms)
            total_cost += response.cost
            try:
                predicted = parse_answer(response.raw_text)
            except UnparseableAnswer:
                predicted = None
                unparseable.append(ex.image_ref)
            records.append(
                EvalRecord(
                    example_id=ex.image_ref,
                    category=ex.annotation.category,
                    object_id=ex.annotation.object_id,
                    detection_correct=True,
                    predicted_label=predicted,
                    true_label=ex.annotation.label,
                )
            )
    except ClientFailure as exc:
        exc.partial_records = records
        raise

    latency = latency_stats(durations) if durations else {"mean": 0.0, "std": 0.0}
    return VqaRunResult(
        records=records,
        latency=latency,
        total_cost=total_cost,
        unparseable=unparseable,
        durations_ms=durations,
    )
