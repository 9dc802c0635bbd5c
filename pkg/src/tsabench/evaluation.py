"""Three-stage evaluation: build variant test sets, score them, rank methods.

For every attribution method the selected time points feed each verification
method, giving 3 strategies x v verifications perturbed test sets, and the
matched/plus10/minus10 random baselines triple that with 9v more: 12v variant
sets per method.  Scoring compares each variant against the unperturbed
baseline with the task metric; positive delta always means degradation.  The
assumption qm(t) >= qm(t_r^c) > qm(t^c) is checked per cell against the
matched random baseline, and methods are ranked by how much more they degrade
the model than matched random selection does.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .attribution import AttributionMap
from .dataset import CLASSIFICATION, REGRESSION, Dataset
from .errors import AlignmentError, IncompleteRunError, ValidationError
from .perturbation import VerificationMethod, reference_range
from .selection import RANDOM_VARIANTS, random_baselines, select

VARIANTS = ("attribution", "rand_matched", "rand_plus10", "rand_minus10")

ACCURACY = "accuracy"
RMSE = "rmse"

BASELINE = "baseline"


@dataclass(frozen=True)
class VariantDataset:
    """One perturbed copy of the test set, tagged with its provenance."""

    method_id: str
    strategy: str
    verification: str
    variant: str  # attribution | rand_matched | rand_plus10 | rand_minus10
    values: np.ndarray  # (n_samples, series_len)
    empty_fraction: float  # share of samples whose index set was empty

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValidationError(f"unknown variant tag {self.variant!r}")
        values = np.asarray(self.values, dtype=np.float64)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class ScoreRecord:
    method_id: str
    strategy: str
    verification: str
    variant: str
    metric: str
    value: float
    delta: float  # vs baseline; >= 0 means degradation for both metrics
    model_id: str = "model0"
    empty_fraction: float = 0.0

    @property
    def is_baseline(self) -> bool:
        return self.variant == BASELINE

    def key(self) -> tuple:
        order = 0 if self.is_baseline else 1
        vrank = VARIANTS.index(self.variant) if self.variant in VARIANTS else -1
        return (order, self.method_id, self.strategy, self.verification, vrank)


@dataclass(frozen=True)
class AssumptionCell:
    method_id: str
    strategy: str
    verification: str
    baseline_value: float
    random_value: float
    attribution_value: float
    first_holds: bool  # qm(t) >= qm(t_r^c) in delta form: delta_rand >= 0
    second_holds: bool  # qm(t_r^c) > qm(t^c): delta_attr > delta_rand
    tie: bool
    degenerate: bool  # every selection in the cell was empty

    @property
    def status(self) -> str:
        if self.degenerate:
            return "degenerate"
        if self.first_holds and self.second_holds:
            return "holds"
        if self.tie:
            return "tie"
        return "violated"


@dataclass(frozen=True)
class AssumptionTable:
    cells: tuple[AssumptionCell, ...]

    def counts(self) -> dict[str, int]:
        out = {"holds": 0, "violated": 0, "tie": 0, "degenerate": 0}
        for cell in self.cells:
            out[cell.status] += 1
        return out

    def non_degenerate(self) -> list[AssumptionCell]:
        return [c for c in self.cells if not c.degenerate]


@dataclass(frozen=True)
class MethodRank:
    method_id: str
    degradation: float  # mean over cells of (delta_attr - delta_rand_matched)
    mean_attr_delta: float
    cells: tuple[tuple[str, str, float, float], ...]  # (strategy, verif, d_attr, d_rand)


@dataclass
class RunReport:
    manifest: dict
    baseline: ScoreRecord
    records: list[ScoreRecord]
    assumption: AssumptionTable
    ranking: list[MethodRank]

    def to_dict(self) -> dict:
        return {
            "manifest": self.manifest,
            "baseline": _record_dict(self.baseline),
            "records": [_record_dict(r) for r in self.records],
            "assumption": {
                "counts": self.assumption.counts(),
                "cells": [
                    {
                        "method": c.method_id,
                        "strategy": c.strategy,
                        "verification": c.verification,
                        "baseline": c.baseline_value,
                        "random": c.random_value,
                        "attribution": c.attribution_value,
                        "first_holds": c.first_holds,
                        "second_holds": c.second_holds,
                        "status": c.status,
                    }
                    for c in self.assumption.cells
                ],
            },
            "ranking": [
                {
                    "method": r.method_id,
                    "degradation": r.degradation,
                    "mean_attribution_delta": r.mean_attr_delta,
                    "cells": [
                        {
                            "strategy": s,
                            "verification": v,
                            "delta_attribution": da,
                            "delta_random": dr,
                        }
                        for (s, v, da, dr) in r.cells
                    ],
                }
                for r in self.ranking
            ],
        }


def _record_dict(r: ScoreRecord) -> dict:
    return {
        "method": r.method_id,
        "strategy": r.strategy,
        "verification": r.verification,
        "variant": r.variant,
        "metric": r.metric,
        "value": r.value,
        "delta": r.delta,
        "model": r.model_id,
        "empty_fraction": r.empty_fraction,
    }


# ---------------------------------------------------------------------------
# quality metrics


def accuracy(predicted: Sequence[int], true: Sequence[int]) -> float:
    p = np.asarray(predicted)
    t = np.asarray(true)
    if p.shape != t.shape or p.ndim != 1:
        raise ValidationError("accuracy needs two equal-length 1-d vectors")
    if p.size == 0:
        raise ValidationError("accuracy of empty input is undefined")
    return float(np.mean(p == t))


def rmse(predictions: Sequence[float], targets: Sequence[float]) -> float:
    p = np.asarray(predictions, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if p.shape != t.shape or p.ndim != 1:
        raise ValidationError("rmse needs two equal-length 1-d vectors")
    if p.size == 0:
        raise ValidationError("rmse of empty input is undefined")
    return float(np.sqrt(np.mean((p - t) ** 2)))


def metric_for_task(task: str) -> str:
    return ACCURACY if task == CLASSIFICATION else RMSE


# ---------------------------------------------------------------------------
# stage two and three: variant construction


def _check_alignment(method_id: str, maps: Sequence[AttributionMap],
                     n_samples: int, series_len: int) -> None:
    if len(maps) != n_samples:
        raise AlignmentError(
            f"method {method_id}: {len(maps)} maps for {n_samples} test samples"
        )
    for i, amap in enumerate(maps):
        if not amap.normalized:
            raise ValidationError(f"method {method_id}: map {i} is not normalized")
        if amap.scores.size != series_len:
            raise AlignmentError(
                f"method {method_id}: map {i} has length {amap.scores.size}, "
                f"expected {series_len}"
            )


def build_variants(test: Dataset,
                   maps_by_method: Mapping[str, Sequence[AttributionMap]],
                   strategies: Sequence[str],
                   verifications: Sequence[VerificationMethod],
                   seed: int) -> list[VariantDataset]:
    """All 12v variant sets per method, in deterministic provenance order.

    Selections and random baselines are drawn once per (method, strategy,
    sample) and shared across verification methods, mirroring the reuse of
    one relevance ranking for every perturbation type.
    """
    base = test.values_matrix()
    n, length = base.shape
    refs = [reference_range(base[i]) for i in range(n)]
    out = []
    for method_id, maps in maps_by_method.items():
        _check_alignment(method_id, maps, n, length)
        for strategy in strategies:
            selections = [select(maps[i], strategy) for i in range(n)]
            randoms = [random_baselines(selections[i], length, seed) for i in range(n)]

            index_sets = {"attribution": [np.asarray(s.indices) for s in selections]}
            for vi, (variant, _scale) in enumerate(RANDOM_VARIANTS):
                index_sets[f"rand_{variant}"] = [
                    np.asarray(randoms[i][vi].indices) for i in range(n)
                ]

            for verification in verifications:
                for variant in VARIANTS:
                    sets = index_sets[variant]
                    values = np.empty_like(base)
                    empty = 0
                    for i in range(n):
                        if sets[i].size == 0:
                            empty += 1
                            values[i] = base[i]
                        else:
                            values[i] = verification.apply(base[i], sets[i], refs[i])
                    out.append(
                        VariantDataset(
                            method_id=method_id,
                            strategy=strategy,
                            verification=verification.label(),
                            variant=variant,
                            values=values,
                            empty_fraction=empty / n,
                        )
                    )
    return out


# ---------------------------------------------------------------------------
# scoring


def _metric_value(model, values: np.ndarray, test: Dataset) -> float:
    if test.task == CLASSIFICATION:
        predicted = np.argmax(model.predict(values), axis=1)
        return accuracy(predicted, test.targets())
    predictions = np.asarray(model.predict(values))[:, 0]
    return rmse(predictions, test.targets())


def _ensemble_value(models: Sequence, values: np.ndarray, test: Dataset) -> float:
    return float(np.mean([_metric_value(m, values, test) for m in models]))


def score_variants(models, test: Dataset,
                   variants: Sequence[VariantDataset]) -> list[ScoreRecord]:
    """Baseline record plus one record per variant, sorted by provenance.

    ``models`` may be a single predictor or an ensemble; ensemble values are
    the mean metric over members.  Delta is oriented so that a positive value
    always means the variant degraded the model.
    """
    if not isinstance(models, (list, tuple)):
        models = [models]
    if not models:
        raise ValidationError("score_variants needs at least one model")
    metric = metric_for_task(test.task)
    model_id = models[0].model_id if len(models) == 1 else "ensemble_mean"
    base = test.values_matrix()

    baseline_value = _ensemble_value(models, base, test)
    records = [
        ScoreRecord(BASELINE, "-", "-", BASELINE, metric, baseline_value, 0.0, model_id)
    ]
    for var in variants:
        if var.values.shape != base.shape:
            raise AlignmentError(
                f"variant {var.method_id}/{var.strategy}/{var.verification}"
                f"/{var.variant}: shape {var.values.shape} vs test {base.shape}"
            )
        value = _ensemble_value(models, var.values, test)
        if metric == ACCURACY:
            delta = baseline_value - value
        else:
            delta = value - baseline_value
        records.append(
            ScoreRecord(var.method_id, var.strategy, var.verification, var.variant,
                        metric, value, delta, model_id, var.empty_fraction)
        )
    records.sort(key=ScoreRecord.key)
    return records


# ---------------------------------------------------------------------------
# assumption check and ranking


def _grouped(records: Sequence[ScoreRecord]):
    """(method, strategy, verification) -> {variant: record}, plus baseline."""
    baseline = None
    groups: dict[tuple, dict] = {}
    for r in records:
        if r.is_baseline:
            baseline = r
            continue
        groups.setdefault((r.method_id, r.strategy, r.verification), {})[r.variant] = r
    if baseline is None:
        raise IncompleteRunError("no baseline record present")
    return baseline, groups


def check_assumption(records: Sequence[ScoreRecord]) -> AssumptionTable:
    """Evaluate qm(t) >= qm(t_r^c) > qm(t^c) per (method, strategy, verification).

    In delta form (degradation-positive for both metrics) the chain is
    delta_rand >= 0 and delta_attr > delta_rand, so one code path covers
    accuracy and rmse.  Cells where every selection was empty perturb nothing
    and are flagged degenerate rather than scored as ties.
    """
    baseline, groups = _grouped(records)
    cells = []
    for key in sorted(groups):
        group = groups[key]
        for needed in ("attribution", "rand_matched"):
            if needed not in group:
                raise IncompleteRunError(
                    f"cell {key}: missing {needed} record"
                )
        attr = group["attribution"]
        rand = group["rand_matched"]
        first = rand.delta >= 0.0
        second = attr.delta > rand.delta
        tie = attr.delta == rand.delta
        degenerate = attr.empty_fraction == 1.0 and rand.empty_fraction == 1.0
        cells.append(
            AssumptionCell(
                method_id=key[0], strategy=key[1], verification=key[2],
                baseline_value=baseline.value,
                random_value=rand.value,
                attribution_value=attr.value,
                first_holds=first, second_holds=second,
                tie=tie, degenerate=degenerate,
            )
        )
    return AssumptionTable(tuple(cells))


def rank_methods(records: Sequence[ScoreRecord]) -> list[MethodRank]:
    """Sort methods by how much more they degrade the model than matched random.

    D = mean over (strategy, verification) cells of delta_attr - delta_rand.
    Ties break on mean attribution delta, then method id.
    """
    _, groups = _grouped(records)
    per_method: dict[str, list] = {}
    for (method_id, strategy, verification), group in sorted(groups.items()):
        if "attribution" not in group or "rand_matched" not in group:
            raise IncompleteRunError(
                f"cell {(method_id, strategy, verification)}: incomplete variants"
            )
        d_attr = group["attribution"].delta
        d_rand = group["rand_matched"].delta
        per_method.setdefault(method_id, []).append(
            (strategy, verification, d_attr, d_rand)
        )
    ranking = []
    for method_id in sorted(per_method):
        cells = per_method[method_id]
        diffs = [da - dr for (_, _, da, dr) in cells]
        attrs = [da for (_, _, da, _) in cells]
        ranking.append(
            MethodRank(
                method_id=method_id,
                degradation=float(np.mean(diffs)),
                mean_attr_delta=float(np.mean(attrs)),
                cells=tuple(cells),
            )
        )
    ranking.sort(key=lambda r: (-r.degradation, -r.mean_attr_delta, r.method_id))
    return ranking
