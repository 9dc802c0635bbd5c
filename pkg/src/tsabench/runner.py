"""Pipeline orchestration and on-disk run artifacts.

A run executes train (or adapter attach) -> attribute -> select -> perturb ->
score -> rank and writes everything into a content-addressed directory named
by a short hash of the manifest core (config echo + master seed + dataset
fingerprint).  Nothing reads the clock or any environment state that is not
echoed into the manifest, so rerunning a config overwrites the same
directory with byte-identical files.

Artifacts: manifest.json, scores.csv, report.json, models/model*.json for
built-in models, attributions/<method>.csv raw (signed) dumps.
"""

from __future__ import annotations

import hashlib
import json
import sys
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .adapter import AdapterEndpoint, AdapterPredictor
from .attribution import (AttributionMap, MethodConfig, compute_attributions,
                          load_external_attributions, normalize,
                          save_attributions)
from .config import RunConfig
from .dataset import (CLASSIFICATION, Dataset, generate_spike_dataset,
                      load_ucr_tsv, split_dataset, znormalize)
from .errors import ConfigError, TsabenchError, ValidationError
from .evaluation import (RunReport, build_variants, check_assumption,
                         metric_for_task, rank_methods, score_variants)
from .models import save_model, train_ensemble
from .seeding import SEED_SCHEME

RUN_FORMAT = "tsabench-run"
RUN_FORMAT_VERSION = 1


@dataclass
class RunResult:
    run_dir: Path
    report: RunReport
    manifest: dict


@contextmanager
def _stage(name: str):
    """Attach the pipeline stage to any harness error raised inside."""
    try:
        yield
    except TsabenchError as exc:
        exc.stage = name
        if not str(exc).startswith(f"stage {name}:"):
            exc.args = (f"stage {name}: {exc}",)
        raise


def _log(message: str) -> None:
    print(f"[tsabench] {message}", file=sys.stderr, flush=True)


# ---------------------------------------------------------------------------
# stage 0: dataset resolution


def _load_truth(path: str, expected: int) -> list[np.ndarray]:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read truth file {path}: {exc}") from exc
    if not isinstance(doc, list) or len(doc) != expected:
        raise ConfigError(
            f"truth file {path} must list indices for all {expected} samples"
        )
    return [np.asarray(row, dtype=np.int64) for row in doc]


def resolve_dataset(config: RunConfig):
    """Returns (train set, test set, ground-truth index sets for test or None)."""
    spec = config.dataset
    if spec["kind"] == "spike":
        full, truth = generate_spike_dataset(
            spec["n_samples"], spec["series_len"], config.seed
        )
        train, test = split_dataset(full, spec["test_fraction"])
        truth_test = truth[len(train):]
    elif "path" in spec:
        full = load_ucr_tsv(spec["path"])
        if full.task != config.task:
            raise ConfigError(
                f"dataset {spec['path']} is {full.task}, config says {config.task}"
            )
        train, test = split_dataset(full, spec["test_fraction"])
        truth_test = None
        if "truth_path" in spec:
            truth_test = _load_truth(spec["truth_path"], len(full))[len(train):]
    else:
        train = load_ucr_tsv(spec["train_path"])
        test = load_ucr_tsv(spec["test_path"])
        if train.series_len != test.series_len:
            raise ConfigError(
                f"train series_len {train.series_len} != test {test.series_len}"
            )
        if train.task != config.task:
            raise ConfigError(
                f"dataset {spec['train_path']} is {train.task}, "
                f"config says {config.task}"
            )
        if train.task == CLASSIFICATION and train.n_classes != test.n_classes:
            raise ConfigError("train and test class counts differ")
        truth_test = None
        if "truth_path" in spec:
            truth_test = _load_truth(spec["truth_path"], len(test))
    if spec.get("znormalize"):
        train, test = znormalize(train), znormalize(test)
    return train, test, truth_test


# ---------------------------------------------------------------------------
# stage 1: model


def resolve_models(config: RunConfig, train_set: Dataset):
    """Returns (models, closer) where closer releases any adapter process."""
    if config.uses_adapter:
        endpoint = AdapterEndpoint(
            config.model["command"],
            timeout=float(config.model.get("timeout", 60.0)),
            max_batch=int(config.model.get("max_batch", 256)),
        )
        model = AdapterPredictor(endpoint, config.task)
        if model.input_len != train_set.series_len:
            endpoint.close()
            raise ConfigError(
                f"server input_len {model.input_len} does not match "
                f"series_len {train_set.series_len}"
            )
        if config.task == CLASSIFICATION and model.n_outputs != train_set.n_classes:
            endpoint.close()
            raise ConfigError(
                f"server n_outputs {model.n_outputs} does not match "
                f"{train_set.n_classes} classes"
            )
        return [model], endpoint.close
    models = train_ensemble(train_set, config.train_config())
    return models, lambda: None


# ---------------------------------------------------------------------------
# stage 2: attribution


def _method_key(cfg: MethodConfig) -> str:
    if cfg.method_id == "external":
        return f"external:{cfg.params['name'] or Path(cfg.params['path']).stem}"
    return cfg.method_id


def compute_all_maps(config: RunConfig, model, test: Dataset, truth_test):
    """Raw and normalized maps per method key, in config order."""
    samples = list(test.values_matrix())
    raw_by_method: dict[str, list[AttributionMap]] = {}
    for cfg in config.methods:
        key = _method_key(cfg)
        if cfg.method_id == "external":
            maps = load_external_attributions(
                cfg.params["path"], len(test), test.series_len,
                name=cfg.params["name"],
            )
        else:
            if cfg.method_id == "oracle" and truth_test is None:
                raise ConfigError("oracle method needs a dataset with ground truth")
            maps = compute_attributions(model, samples, cfg, config.seed,
                                        truth=truth_test)
        raw_by_method[key] = maps
        _log(f"attribution: {key} ({len(maps)} maps)")
    normalized = {k: [normalize(m) for m in v] for k, v in raw_by_method.items()}
    return raw_by_method, normalized


# ---------------------------------------------------------------------------
# artifacts


def dump_json(doc: dict, path: Path) -> None:
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")


def _csv_cell(value) -> str:
    return repr(float(value)) if isinstance(value, float) else str(value)


SCORES_HEADER = "method,strategy,verification,variant,metric,value,delta"


def write_scores_csv(records, path: Path) -> None:
    lines = [SCORES_HEADER]
    for r in records:
        lines.append(",".join([
            r.method_id, r.strategy, r.verification, r.variant, r.metric,
            _csv_cell(r.value), _csv_cell(r.delta),
        ]))
    path.write_text("\n".join(lines) + "\n")


def manifest_core(config: RunConfig, dataset_fp: str) -> dict:
    return {
        "config": config.canonical(),
        "master_seed": config.seed,
        "dataset_fingerprint": dataset_fp,
    }


def run_dir_name(core: dict) -> str:
    blob = json.dumps(core, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def _safe_name(method_key: str) -> str:
    return method_key.replace(":", "_").replace("/", "_")


# ---------------------------------------------------------------------------
# full pipeline


def execute_run(config: RunConfig) -> RunResult:
    with _stage("dataset"):
        train_set, test_set, truth_test = resolve_dataset(config)
        _log(f"dataset: {train_set.name} -> {len(train_set)} train / "
             f"{len(test_set)} test, len {test_set.series_len}")

    core = manifest_core(config, test_set.fingerprint())
    run_dir = Path(config.out_dir) / run_dir_name(core)
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "models").mkdir(exist_ok=True)
    (run_dir / "attributions").mkdir(exist_ok=True)

    manifest = {
        "format": RUN_FORMAT,
        "version": RUN_FORMAT_VERSION,
        "complete": False,
        **core,
        "dataset": {
            "name": test_set.name,
            "task": test_set.task,
            "series_len": test_set.series_len,
            "n_train": len(train_set),
            "n_test": len(test_set),
            "n_classes": test_set.n_classes,
        },
        "metric": metric_for_task(config.task),
        "seed_scheme": SEED_SCHEME,
        "attribution_normalization": "abs-minmax",
        "ig_quadrature": "right-endpoint Riemann",
        "model_seeds": [] if config.uses_adapter else [
            config.seed + i for i in range(config.train_config().ensemble_size)
        ],
    }
    dump_json(manifest, run_dir / "manifest.json")

    close = lambda: None
    try:
        with _stage("model"):
            models, close = resolve_models(config, train_set)
            _log(f"model: {len(models)} predictor(s) ready")
            for model in models:
                if hasattr(model, "net"):
                    save_model(model, run_dir / "models" / f"{model.model_id}.json")

        with _stage("attribution"):
            raw_by_method, normalized = compute_all_maps(
                config, models[0], test_set, truth_test
            )
            for key, maps in raw_by_method.items():
                save_attributions(maps, run_dir / "attributions"
                                  / f"{_safe_name(key)}.csv")

        with _stage("evaluation"):
            verifications = [v.resolve(test_set.series_len)
                             for v in config.verifications]
            strategies = [s.id for s in config.strategies]
            variants = build_variants(test_set, normalized, strategies,
                                      verifications, config.seed)
            _log(f"evaluation: {len(variants)} variant sets")
            records = score_variants(models, test_set, variants)
            assumption = check_assumption(records)
            ranking = rank_methods(records)

        with _stage("report"):
            baseline = records[0]
            report = RunReport(manifest=dict(manifest, complete=True),
                               baseline=baseline, records=records,
                               assumption=assumption, ranking=ranking)
            write_scores_csv(records, run_dir / "scores.csv")
            dump_json(report.to_dict(), run_dir / "report.json")
            manifest["complete"] = True
            dump_json(manifest, run_dir / "manifest.json")
        _log(f"run complete: {run_dir}")
        return RunResult(run_dir=run_dir, report=report, manifest=manifest)
    except TsabenchError as exc:
        manifest["error"] = {
            "stage": getattr(exc, "stage", "unknown"),
            "type": type(exc).__name__,
            "message": str(exc),
        }
        dump_json(manifest, run_dir / "manifest.json")
        raise
    finally:
        close()


def attribute_only(config: RunConfig, method_id: str, out_path: str | Path) -> Path:
    """Stages 1-2 only: train/attach, run one method, write the raw dump."""
    configured = {_method_key(m): m for m in config.methods}
    by_plain_id = {m.method_id: m for m in config.methods}
    if method_id in configured:
        method = configured[method_id]
    elif method_id in by_plain_id:
        method = by_plain_id[method_id]
    else:
        try:
            method = MethodConfig(method_id, {})
        except ConfigError:
            available = sorted(set(list(configured) + ["saliency",
                               "input_x_gradient", "integrated_gradients",
                               "smoothgrad", "occlusion", "lime",
                               "shapley_sampling", "oracle"]))
            raise ValidationError(
                f"unknown method {method_id!r}; available: {', '.join(available)}"
            ) from None

    with _stage("dataset"):
        train_set, test_set, truth_test = resolve_dataset(config)
    close = lambda: None
    try:
        with _stage("model"):
            models, close = resolve_models(config, train_set)
        with _stage("attribution"):
            single = RunConfig(
                dataset=config.dataset, task=config.task, model=config.model,
                methods=(method,), strategies=config.strategies,
                verifications=config.verifications, seed=config.seed,
                out_dir=config.out_dir,
            )
            raw, _ = compute_all_maps(single, models[0], test_set, truth_test)
            maps = next(iter(raw.values()))
            out = Path(out_path)
            if out.parent != Path(""):
                out.parent.mkdir(parents=True, exist_ok=True)
            save_attributions(maps, out)
        return out
    finally:
        close()


# ---------------------------------------------------------------------------
# report reading and formatting


def load_run(run_dir: str | Path) -> tuple[dict, dict | None]:
    d = Path(run_dir)
    manifest_path = d / "manifest.json"
    if not manifest_path.is_file():
        raise ValidationError(f"{d} is not a run directory (no manifest.json)")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"corrupt manifest in {d}: {exc}") from exc
    report = None
    report_path = d / "report.json"
    if report_path.is_file():
        try:
            report = json.loads(report_path.read_text())
        except json.JSONDecodeError as exc:
            raise ValidationError(f"corrupt report in {d}: {exc}") from exc
    return manifest, report


def format_report(manifest: dict, report: dict | None) -> str:
    lines = []
    if not manifest.get("complete", False):
        err = manifest.get("error", {})
        detail = f" ({err.get('stage', '?')}: {err.get('message', 'unknown error')})" \
            if err else ""
        lines.append(f"WARNING: incomplete run{detail}")
    ds = manifest.get("dataset", {})
    lines.append(f"dataset: {ds.get('name', '?')}  task: {ds.get('task', '?')}  "
                 f"n_test: {ds.get('n_test', '?')}  series_len: "
                 f"{ds.get('series_len', '?')}")
    lines.append(f"seed: {manifest.get('master_seed', '?')}  "
                 f"metric: {manifest.get('metric', '?')}")
    if report is None:
        lines.append("no report.json present")
        return "\n".join(lines) + "\n"

    base = report["baseline"]
    lines.append(f"baseline {base['metric']}: {base['value']:.6f}")
    lines.append("")

    verifs = [v["kind"] for v in manifest["config"]["verifications"]]
    lines.append("degradation vs matched random (mean over strategies)")
    header = f"{'method':<28}" + "".join(f"{v:>16}" for v in verifs)
    lines.append(header)
    for entry in report["ranking"]:
        by_verif: dict[str, list[float]] = {v: [] for v in verifs}
        for cell in entry["cells"]:
            by_verif.setdefault(cell["verification"], []).append(
                cell["delta_attribution"] - cell["delta_random"]
            )
        row = f"{entry['method']:<28}"
        for v in verifs:
            vals = by_verif.get(v, [])
            row += f"{np.mean(vals):>16.4f}" if vals else f"{'-':>16}"
        lines.append(row)
    lines.append("")

    counts = report["assumption"]["counts"]
    total = sum(counts.values())
    lines.append(
        f"assumption check: {total} cells: {counts['holds']} hold, "
        f"{counts['violated']} violated, {counts['tie']} ties, "
        f"{counts['degenerate']} degenerate"
    )
    lines.append("")
    lines.append("ranking (degradation beyond matched random):")
    for pos, entry in enumerate(report["ranking"], start=1):
        lines.append(f"  {pos}. {entry['method']:<28} D={entry['degradation']:+.4f}")
    return "\n".join(lines) + "\n"
