"""Run configuration: one JSON document describing a full benchmark run.

Shape:

    {
      "dataset": {"kind": "spike", "n_samples": 200, "series_len": 100,
                  "test_fraction": 0.3},
      "task": "classification",
      "model": {"kind": "mlp", "hidden": [32], "activation": "tanh",
                "epochs": 60, "batch_size": 32, "learning_rate": 0.01,
                "ensemble_size": 1},
      "methods": [{"id": "oracle"}, {"id": "saliency"}],
      "strategies": [{"id": "topk"}, {"id": "dynamic_threshold"},
                     {"id": "fixed_threshold"}],
      "verifications": [{"kind": "point_zero"}, {"kind": "interval_swap",
                        "radius": 3}],
      "seed": 13,
      "out": "runs"
    }

File datasets use kind "ucr_tsv" with either "path" + "test_fraction" or
"train_path" + "test_path", plus an optional "truth_path" (JSON list of
ground-truth index lists) that enables the oracle method.  Adapter-served
models use {"kind": "adapter", "command": ["prog", "arg", ...]}.

Interval verifications may omit "radius"; it then defaults to 2.5% of the
series length once the dataset is loaded.  ``canonical()`` fills every
default so that two spellings of the same run produce the same manifest and
land in the same content-addressed run directory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .attribution import MethodConfig
from .dataset import CLASSIFICATION, REGRESSION
from .errors import ConfigError
from .models import TrainConfig
from .perturbation import ALL_KINDS, INTERVAL_KINDS, VerificationMethod, \
    default_interval_radius
from .selection import DYNAMIC, FIXED, STRATEGIES, TOPK

DEFAULT_SEED = 13

DATASET_KINDS = ("spike", "ucr_tsv")

_STRATEGY_PARAMS = {TOPK: {"fraction": 0.05}, DYNAMIC: {}, FIXED: {"threshold": 0.8}}


@dataclass(frozen=True)
class StrategySpec:
    id: str
    params: dict

    def __post_init__(self):
        if self.id not in STRATEGIES:
            raise ConfigError(
                f"unknown strategy {self.id!r}; choose from {list(STRATEGIES)}"
            )
        known = _STRATEGY_PARAMS[self.id]
        for key in self.params:
            if key not in known:
                raise ConfigError(f"strategy {self.id!r} does not take {key!r}")
        object.__setattr__(self, "params", {**known, **self.params})


@dataclass(frozen=True)
class VerificationSpec:
    """A verification kind plus an optional radius, resolved at run time."""

    kind: str
    radius: int | None = None

    def __post_init__(self):
        if self.kind not in ALL_KINDS:
            raise ConfigError(
                f"unknown verification kind {self.kind!r}; choose from {list(ALL_KINDS)}"
            )
        if self.radius is not None:
            if self.kind not in INTERVAL_KINDS:
                raise ConfigError(f"{self.kind} takes no radius")
            if self.radius < 0:
                raise ConfigError(f"radius must be >= 0, got {self.radius}")

    def resolve(self, series_len: int) -> VerificationMethod:
        if self.kind not in INTERVAL_KINDS:
            return VerificationMethod(self.kind)
        radius = self.radius
        if radius is None:
            radius = default_interval_radius(series_len)
        return VerificationMethod(self.kind, radius=radius)


@dataclass(frozen=True)
class RunConfig:
    dataset: dict
    task: str
    model: dict
    methods: tuple[MethodConfig, ...]
    strategies: tuple[StrategySpec, ...]
    verifications: tuple[VerificationSpec, ...]
    seed: int
    out_dir: str

    @property
    def uses_adapter(self) -> bool:
        return self.model.get("kind") == "adapter"

    def train_config(self) -> TrainConfig:
        if self.uses_adapter:
            raise ConfigError("adapter model has no training configuration")
        fields = {k: v for k, v in self.model.items() if k != "kind"}
        if "hidden" in fields:
            fields["hidden"] = tuple(fields["hidden"])
        cfg = TrainConfig(kind=self.model["kind"], seed=self.seed, **fields)
        cfg.validate()
        return cfg

    def canonical(self) -> dict:
        """Config echo with every default made explicit."""
        model = dict(self.model)
        if not self.uses_adapter:
            tc = self.train_config()
            model = {
                "kind": tc.kind, "hidden": list(tc.hidden),
                "activation": tc.activation, "epochs": tc.epochs,
                "batch_size": tc.batch_size, "learning_rate": tc.learning_rate,
                "ensemble_size": tc.ensemble_size,
            }
        return {
            "dataset": dict(self.dataset),
            "task": self.task,
            "model": model,
            "methods": [
                {"id": m.method_id, **{k: v for k, v in sorted(m.params.items())
                                       if v is not None}}
                for m in self.methods
            ],
            "strategies": [
                {"id": s.id, **dict(sorted(s.params.items()))}
                for s in self.strategies
            ],
            "verifications": [
                {"kind": v.kind} if v.radius is None
                else {"kind": v.kind, "radius": v.radius}
                for v in self.verifications
            ],
            "seed": self.seed,
        }


def _dataset_spec(doc: dict, task: str) -> dict:
    if not isinstance(doc, dict) or "kind" not in doc:
        raise ConfigError("dataset spec must be an object with a 'kind'")
    kind = doc["kind"]
    if kind not in DATASET_KINDS:
        raise ConfigError(f"unknown dataset kind {kind!r}; choose from {DATASET_KINDS}")
    out = {"kind": kind}
    if kind == "spike":
        if task != CLASSIFICATION:
            raise ConfigError("the spike generator produces classification data")
        for key, default in (("n_samples", 200), ("series_len", 100),
                             ("test_fraction", 0.3)):
            out[key] = doc.get(key, default)
        if not (isinstance(out["n_samples"], int) and out["n_samples"] >= 2):
            raise ConfigError(f"n_samples must be an int >= 2, got {out['n_samples']}")
        if not (0.0 < float(out["test_fraction"]) < 1.0):
            raise ConfigError("test_fraction must lie in (0, 1)")
    else:
        has_single = "path" in doc
        has_pair = "train_path" in doc or "test_path" in doc
        if has_single == has_pair:
            raise ConfigError(
                "ucr_tsv needs either 'path' + 'test_fraction' or "
                "'train_path' + 'test_path'"
            )
        if has_single:
            out["path"] = str(doc["path"])
            out["test_fraction"] = float(doc.get("test_fraction", 0.3))
            if not (0.0 < out["test_fraction"] < 1.0):
                raise ConfigError("test_fraction must lie in (0, 1)")
        else:
            if "train_path" not in doc or "test_path" not in doc:
                raise ConfigError("ucr_tsv needs both 'train_path' and 'test_path'")
            out["train_path"] = str(doc["train_path"])
            out["test_path"] = str(doc["test_path"])
        if "truth_path" in doc:
            out["truth_path"] = str(doc["truth_path"])
    if "znormalize" in doc:
        out["znormalize"] = bool(doc["znormalize"])
    extra = set(doc) - set(out)
    if extra:
        raise ConfigError(f"dataset spec has unknown keys {sorted(extra)}")
    return out


def _model_spec(doc: dict) -> dict:
    if not isinstance(doc, dict) or "kind" not in doc:
        raise ConfigError("model spec must be an object with a 'kind'")
    if doc["kind"] == "adapter":
        command = doc.get("command")
        if not isinstance(command, list) or not command or \
                not all(isinstance(c, str) for c in command):
            raise ConfigError("adapter model needs a 'command' list of strings")
        extra = set(doc) - {"kind", "command", "timeout", "max_batch"}
        if extra:
            raise ConfigError(f"adapter spec has unknown keys {sorted(extra)}")
        return dict(doc)
    allowed = {"kind", "hidden", "activation", "epochs", "batch_size",
               "learning_rate", "ensemble_size"}
    extra = set(doc) - allowed
    if extra:
        raise ConfigError(f"model spec has unknown keys {sorted(extra)}")
    return dict(doc)


def build_run_config(doc: dict, seed: int | None = None,
                     out_dir: str | None = None) -> RunConfig:
    """Validate a parsed JSON document; optional seed/out overrides."""
    if not isinstance(doc, dict):
        raise ConfigError("run config must be a JSON object")
    allowed = {"dataset", "task", "model", "methods", "strategies",
               "verifications", "seed", "out"}
    extra = set(doc) - allowed
    if extra:
        raise ConfigError(f"run config has unknown keys {sorted(extra)}")

    task = doc.get("task", CLASSIFICATION)
    if task not in (CLASSIFICATION, REGRESSION):
        raise ConfigError(f"unknown task {task!r}")

    if "dataset" not in doc:
        raise ConfigError("run config needs a 'dataset' section")
    dataset = _dataset_spec(doc["dataset"], task)

    if "model" not in doc:
        raise ConfigError("run config needs a 'model' section")
    model = _model_spec(doc["model"])

    raw_methods = doc.get("methods")
    if not raw_methods:
        raise ConfigError("run config needs at least one attribution method")
    methods = []
    seen = set()
    for m in raw_methods:
        if not isinstance(m, dict) or "id" not in m:
            raise ConfigError("each method entry needs an 'id'")
        cfg = MethodConfig(m["id"], {k: v for k, v in m.items() if k != "id"})
        if cfg.method_id in seen and cfg.method_id != "external":
            raise ConfigError(f"method {cfg.method_id!r} listed twice")
        seen.add(cfg.method_id)
        methods.append(cfg)
    if any(m.method_id == "oracle" for m in methods):
        if dataset["kind"] != "spike" and "truth_path" not in dataset:
            raise ConfigError(
                "the oracle method needs ground truth: use the spike dataset "
                "or provide a truth_path"
            )

    raw_strategies = doc.get("strategies")
    if not raw_strategies:
        raise ConfigError("run config needs at least one selection strategy")
    strategies = []
    for s in raw_strategies:
        if not isinstance(s, dict) or "id" not in s:
            raise ConfigError("each strategy entry needs an 'id'")
        strategies.append(StrategySpec(s["id"], {k: v for k, v in s.items()
                                                 if k != "id"}))

    raw_verifications = doc.get("verifications")
    if not raw_verifications:
        raise ConfigError("run config needs at least one verification method")
    verifications = []
    for v in raw_verifications:
        if not isinstance(v, dict) or "kind" not in v:
            raise ConfigError("each verification entry needs a 'kind'")
        verifications.append(VerificationSpec(v["kind"], v.get("radius")))

    resolved_seed = seed if seed is not None else doc.get("seed", DEFAULT_SEED)
    if not isinstance(resolved_seed, int):
        raise ConfigError(f"seed must be an integer, got {resolved_seed!r}")
    resolved_out = out_dir if out_dir is not None else doc.get("out", "runs")

    config = RunConfig(
        dataset=dataset, task=task, model=model,
        methods=tuple(methods), strategies=tuple(strategies),
        verifications=tuple(verifications),
        seed=resolved_seed, out_dir=str(resolved_out),
    )
    if not config.uses_adapter:
        config.train_config()  # validates eagerly, before any training
    return config


def load_run_config(path: str | Path, seed: int | None = None,
                    out_dir: str | None = None) -> RunConfig:
    p = Path(path)
    try:
        doc = json.loads(p.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p} is not valid JSON: {exc}") from exc
    return build_run_config(doc, seed=seed, out_dir=out_dir)
