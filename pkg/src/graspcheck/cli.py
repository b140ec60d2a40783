"""Command-line entry point: generate / infer / evaluate / vqa / fixtures.

Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import functools
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click
import numpy as np

from . import figures as figs
from . import fixtures as fixture_data
from . import report
from .config import load_config
from .dataset import Dataset, Split, category_counts, load_dataset, save_dataset
from .dataset import Example as DatasetExample
from .errors import ClientFailure, ConfigError, GraspCheckError, GripperNotFound
from .metrics import (
    EvalRecord,
    check_cross_table_consistency,
    classification_table,
    detection_table,
    precision_recall,
    read_records,
    write_records,
)
from .pipeline import (
    FixtureClassifierBackend,
    Frame,
    VerdictRecord,
    read_verdicts,
    verify_grasp,
    write_verdicts,
)
from .detect import FixtureDetectorBackend
from .synth import generate_batch
from .vqa import ReplayVqaClient, LiveVqaClient, build_prompt, run_vqa_eval
from .vqa import API_KEY_ENV, ENDPOINT_ENV, MODEL_ENV


def _runtime_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (GraspCheckError, KeyError, OSError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)

    return wrapper


@click.group()
def cli():
    """Grasp-verification toolkit: synthetic scene generation, the two-stage
    verification pipeline, the evaluation harness, and the VQA baseline."""


_CONFIG_OPTION = click.option(
    "--config",
    "config_path",
    type=click.Path(path_type=Path),
    default=None,
    help="YAML or JSON run config (graspcheck.yaml); flags override it.",
)


def _gen_worker(args):
    seed, cfg = args
    return generate_batch(seed, cfg)


@cli.command(
    epilog="Config keys: gen.batch_size, gen.distractor_min, gen.distractor_max, "
    "gen.p_grasp, gen.asset_pool, gen.pool_size, gen.distractor_scale, "
    "gen.grasp_extent, gen.aperture_step, gen.max_attempts, "
    "gen.camera_offset_delta, gen.camera_offset_limit, gen.image_width, "
    "gen.image_height, gen.focal_length."
)
@_CONFIG_OPTION
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@click.option("--num-batches", required=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--jobs", default=1, show_default=True, type=int, help="Parallel batch workers.")
@_runtime_errors
def generate(config_path, out_dir, num_batches, seed, jobs):
    """Emit scene specs plus a loadable manifest for NUM_BATCHES batches."""
    config = load_config(config_path)
    gen = config.gen
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    examples: list[DatasetExample] = []
    try:
        seeds = [(seed + b, gen) for b in range(num_batches)]
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                batches = list(pool.map(_gen_worker, seeds))
        else:
            batches = [_gen_worker(s) for s in seeds]
        for b_idx, batch in enumerate(batches):
            for i, ex in enumerate(batch.examples):
                rel = f"scene_{b_idx:05d}_{i:02d}.json"
                path = out_dir / rel
                path.write_text(json.dumps(ex.scene.to_json(), indent=2) + "\n")
                written.append(path)
                examples.append(
                    DatasetExample(
                        image_ref=rel,
                        annotation=ex.annotation,
                        batch_id=b_idx,
                        example_index_in_batch=i,
                    )
                )
        split = Split.TRAIN if gen.asset_pool == "train" else Split.VALIDATION
        dataset = Dataset(
            examples=examples,
            split=split,
            image_width=gen.image_width,
            image_height=gen.image_height,
            root=out_dir,
        )
        written.append(save_dataset(dataset, out_dir))
    except GraspCheckError:
        for path in written:
            path.unlink(missing_ok=True)
        raise
    counts = category_counts(dataset)
    click.echo(f"wrote {len(examples)} examples in {num_batches} batches to {out_dir}")
    for category, count in counts.items():
        click.echo(f"  {category.value}: {count}")


def _load_detector(spec: str):
    path = Path(spec)
    if path.suffix == ".json" and path.is_file():
        return FixtureDetectorBackend(path)
    raise ConfigError(
        f"unloadable detector backend {spec!r}: expected a fixture .json file "
        "(neural runtimes plug in through the DetectorBackend protocol)"
    )


def _load_classifier(spec: str):
    path = Path(spec)
    if path.suffix == ".json" and path.is_file():
        return FixtureClassifierBackend(path)
    raise ConfigError(
        f"unloadable classifier backend {spec!r}: expected a fixture .json file "
        "(neural runtimes plug in through the ClassifierBackend protocol)"
    )


def _load_frame(dataset: Dataset, example: DatasetExample) -> Frame:
    pixels = None
    path = None if dataset.root is None else dataset.root / example.image_ref
    if path is not None and path.suffix.lower() == ".png" and path.is_file():
        from PIL import Image

        with Image.open(path) as img:
            array = np.asarray(img.convert("RGB"))
        if array.shape[:2] == (dataset.image_height, dataset.image_width):
            pixels = array
    if pixels is None:
        # scene-spec refs and placeholder files carry no usable pixels; replay
        # backends only need ids and the declared canvas size
        pixels = np.zeros((dataset.image_height, dataset.image_width, 3), dtype=np.uint8)
    return Frame(pixels=pixels, image_id=example.image_ref)


@cli.command(
    epilog="Config keys: detect.schedule.start, detect.schedule.decay_factor, "
    "detect.schedule.floor, detect.cluster.eps, detect.cluster.min_pts, "
    "detect.pad.pad_x_frac, detect.pad.pad_y_frac, decide.threshold_no_object."
)
@_CONFIG_OPTION
@click.option("--dataset", "dataset_path", required=True, type=click.Path(path_type=Path))
@click.option("--detector", required=True, help="Detector backend spec (fixture .json).")
@click.option("--classifier", required=True, help="Classifier backend spec (fixture .json).")
@click.option("--out", "out_path", default="verdicts.jsonl", show_default=True,
              type=click.Path(path_type=Path))
@_runtime_errors
def infer(config_path, dataset_path, detector, classifier, out_path):
    """Run the two-stage pipeline over a dataset and write verdict lines."""
    config = load_config(config_path)
    dataset = load_dataset(dataset_path)
    detector_backend = _load_detector(detector)
    classifier_backend = _load_classifier(classifier)
    pipeline_config = config.pipeline_config()

    records: list[VerdictRecord] = []
    not_found = 0
    for example in dataset.examples:
        frame = _load_frame(dataset, example)
        try:
            verdict = verify_grasp(frame, detector_backend, classifier_backend, pipeline_config)
        except GripperNotFound:
            records.append(VerdictRecord(example_id=example.image_ref, gripper_not_found=True))
            not_found += 1
            continue
        records.append(
            VerdictRecord(
                example_id=example.image_ref,
                gripper_not_found=False,
                label=verdict.label,
                p_no_object=verdict.p_no_object,
                selected_box=verdict.selected_box,
                padded_box=verdict.padded_box,
                timings=verdict.timings,
            )
        )
    write_verdicts(records, out_path)
    click.echo(f"wrote {len(records)} verdicts to {out_path} ({not_found} gripper_not_found)")


def _parse_named_paths(pairs: tuple[str, ...], option: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for pair in pairs:
        name, sep, path = pair.partition("=")
        if not sep or not name or not path:
            raise click.UsageError(f"{option} expects NAME=PATH, got {pair!r}")
        out[name] = path
    return out


@cli.command(
    epilog="Config keys: eval.out_dir, eval.records (name->path map), "
    "eval.pr_records (name->path map overriding the record set used for "
    "precision/recall and the consistency check of that model)."
)
@_CONFIG_OPTION
@click.option("--records", "records_pairs", multiple=True, metavar="NAME=PATH",
              help="Standalone eval-record fixtures, one per model (repeatable).")
@click.option("--pr-records", "pr_pairs", multiple=True, metavar="NAME=PATH",
              help="Override record set used for a model's precision/recall.")
@click.option("--verdicts", "verdicts_path", type=click.Path(path_type=Path),
              help="Pipeline verdicts to join with --dataset.")
@click.option("--dataset", "dataset_path", type=click.Path(path_type=Path))
@click.option("--out-dir", "out_dir", default=None, type=click.Path(path_type=Path))
@_runtime_errors
def evaluate(config_path, records_pairs, pr_pairs, verdicts_path, dataset_path, out_dir):
    """Render the detection, classification, and precision/recall tables.

    Consistency discrepancies are reported, never fatal."""
    config = load_config(config_path)
    record_sources = dict(config.eval.records)
    record_sources.update(_parse_named_paths(records_pairs, "--records"))
    pr_sources = dict(config.eval.pr_records)
    pr_sources.update(_parse_named_paths(pr_pairs, "--pr-records"))

    models: dict[str, list[EvalRecord]] = {}
    for name, path in record_sources.items():
        models[name] = read_records(path)
    if verdicts_path is not None:
        if dataset_path is None:
            raise click.UsageError("--verdicts requires --dataset for the join")
        from .metrics import join_verdicts

        dataset = load_dataset(dataset_path)
        verdicts = read_verdicts(verdicts_path)
        models["pipeline"] = join_verdicts(dataset, verdicts)
    if not models:
        raise click.UsageError("nothing to evaluate: pass --records and/or --verdicts")

    pr_overrides = {name: read_records(path) for name, path in pr_sources.items()}

    first = next(iter(models))
    det_table = detection_table(models[first])
    cls_tables = {name: classification_table(recs) for name, recs in models.items()}
    pr_scores = {
        name: precision_recall(pr_overrides.get(name, recs)) for name, recs in models.items()
    }
    consistency = [
        check_cross_table_consistency(name, recs, pr_records=pr_overrides.get(name))
        for name, recs in models.items()
    ]

    text = "\n\n".join(
        [
            f"Detection review ({first}):\n" + report.render_detection_table(det_table),
            "Classification accuracy:\n" + report.render_classification_table(cls_tables),
            "Empty-gripper precision/recall:\n" + report.render_pr_table(pr_scores),
            report.render_consistency_report(consistency),
        ]
    )
    click.echo(text)

    out = Path(out_dir) if out_dir is not None else Path(config.eval.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "tables.txt").write_text(text + "\n")
    report.write_json(
        {
            "detection": report.detection_table_json(det_table),
            "classification": report.classification_table_json(cls_tables),
            "precision_recall": report.pr_table_json(pr_scores),
            "consistency": report.consistency_report_json(consistency),
        },
        out / "tables.json",
    )
    report.write_detection_csv(det_table, out / "detection_table.csv")
    report.write_classification_csv(cls_tables, out / "classification_table.csv")
    report.write_pr_csv(pr_scores, out / "pr_table.csv")
    figs.save_detection_figure(det_table, out / "detection.png")
    figs.save_classification_figure(cls_tables, out / "classification.png")
    figs.save_pr_figure(pr_scores, out / "precision_recall.png")
    click.echo(f"\nreports written to {out}")


@cli.command(
    epilog=f"Config keys: vqa.prompt_version, vqa.replay_path, vqa.parallelism. "
    f"Live mode reads {API_KEY_ENV}, {ENDPOINT_ENV} and optional {MODEL_ENV} "
    "from the environment; credentials never live in config files."
)
@_CONFIG_OPTION
@click.option("--dataset", "dataset_path", required=True, type=click.Path(path_type=Path))
@click.option("--replay", "replay_path", type=click.Path(path_type=Path),
              help="Recorded responses for offline replay.")
@click.option("--live", is_flag=True, help="Query a live VQA endpoint instead of a recording.")
@click.option("--out-dir", "out_dir", default="vqa_out", show_default=True,
              type=click.Path(path_type=Path))
@_runtime_errors
def vqa(config_path, dataset_path, replay_path, live, out_dir):
    """Run the zero-shot VQA baseline over a dataset."""
    config = load_config(config_path)
    dataset = load_dataset(dataset_path)
    prompt = build_prompt(config.vqa.client_config())
    if live:
        client = LiveVqaClient()
    else:
        source = replay_path or config.vqa.replay_path
        if source is None:
            raise ClientFailure("offline mode needs --replay (or vqa.replay_path in the config)")
        client = ReplayVqaClient(source)

    result = run_vqa_eval(dataset, client, prompt, parallelism=config.vqa.parallelism)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_records(result.records, out / "vqa_records.jsonl")
    summary = {
        "examples": len(result.records),
        "latency_mean_ms": result.latency["mean"],
        "latency_std_ms": result.latency["std"],
        "total_cost": str(result.total_cost),
        "unparseable_count": len(result.unparseable),
        "unparseable_examples": result.unparseable,
        "prompt_version": prompt.version,
    }
    report.write_json(summary, out / "vqa_summary.json")
    if result.durations_ms:
        figs.save_latency_figure(result.durations_ms, out / "latency.png")
    click.echo(
        f"{len(result.records)} examples; latency mean {result.latency['mean']:.0f} ms, "
        f"std {result.latency['std']:.0f} ms; total cost {result.total_cost}; "
        f"{len(result.unparseable)} unparseable"
    )
    click.echo(f"records and summary written to {out}")


@cli.command()
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@_runtime_errors
def fixtures(out_dir):
    """Materialize the bundled fixtures: eval records, the VQA recording, a
    placeholder-image evaluation dataset, and replay backends for `infer`."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = fixture_data.write_fixture_files(out)
    fixture_data.materialize_real_eval_dataset(out / "real_eval")
    detector_path, classifier_path = fixture_data.write_demo_backends(out)
    click.echo(f"fixtures written to {out}:")
    for name, path in written.items():
        click.echo(f"  {name}: {path.name}")
    click.echo(f"  dataset: real_eval/ (518-example manifest + placeholder images)")
    click.echo(f"  backends: {detector_path.name}, {classifier_path.name}")
    click.echo(
        "\nnext: graspcheck evaluate "
        f"--records two_stage={out / 'two_stage_records.jsonl'} "
        f"--records gpt4o={out / 'gpt4o_records.jsonl'} "
        f"--records llama={out / 'llama_records.jsonl'} "
        f"--pr-records llama={out / 'llama_pr_records.jsonl'} "
        f"--out-dir {out / 'reports'}"
    )


def main():
    click.UsageError.exit_code = 1
    cli(prog_name="graspcheck")


if __name__ == "__main__":
    main()
