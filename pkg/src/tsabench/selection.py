"""Turning normalized attribution maps into relevant-index sets.

Three strategies: top-k at a length fraction (default 5%), a dynamic
threshold max - (max - mean) * 0.1, and a fixed threshold (default 0.8).
Both thresholds use strict comparison, so a degenerate all-equal map selects
nothing.  Each selection gets three random controls of matched, +10% and
-10% cardinality.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attribution import AttributionMap
from .errors import ConfigError, ValidationError
from .seeding import rng_for

TOPK = "topk"
DYNAMIC = "dynamic_threshold"
FIXED = "fixed_threshold"
STRATEGIES = (TOPK, DYNAMIC, FIXED)

RANDOM_VARIANTS = (("matched", 1.0), ("plus10", 1.1), ("minus10", 0.9))


@dataclass(frozen=True)
class SelectionResult:
    sample_id: int
    strategy: str
    indices: tuple[int, ...]  # strictly ascending, in bounds

    @property
    def count(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class RandomBaselineSet:
    sample_id: int
    variant: str  # matched | plus10 | minus10
    indices: tuple[int, ...]
    source_strategy: str


def _require_normalized(amap: AttributionMap) -> np.ndarray:
    if not amap.normalized:
        raise ValidationError(
            f"selection requires a normalized map (sample {amap.sample_id}, {amap.method_id})"
        )
    return amap.scores


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def select_topk(amap: AttributionMap, fraction: float = 0.05) -> SelectionResult:
    """Indices of the k = max(1, round(fraction*len)) largest scores.

    Ties break toward the smaller index; the result is sorted ascending.
    """
    scores = _require_normalized(amap)
    if fraction <= 0:
        raise ConfigError(f"topk fraction must be positive, got {fraction}")
    k = _round_half_up(fraction * len(scores))
    k = min(max(k, 1), len(scores))
    # stable sort on -scores: descending score, ascending index among ties
    order = np.argsort(-scores, kind="stable")
    chosen = np.sort(order[:k])
    return SelectionResult(amap.sample_id, TOPK, tuple(int(i) for i in chosen))


def select_dynamic(amap: AttributionMap) -> SelectionResult:
    """Strictly above max - (max - mean) * 0.1; empty for constant maps."""
    scores = _require_normalized(amap)
    theta = float(scores.max() - (scores.max() - scores.mean()) * 0.1)
    idx = np.flatnonzero(scores > theta)
    return SelectionResult(amap.sample_id, DYNAMIC, tuple(int(i) for i in idx))


def select_fixed(amap: AttributionMap, threshold: float = 0.8) -> SelectionResult:
    """Strictly above a fixed threshold in [0, 1]."""
    if not (0.0 <= threshold <= 1.0):
        raise ConfigError(f"fixed threshold must lie in [0, 1], got {threshold}")
    scores = _require_normalized(amap)
    idx = np.flatnonzero(scores > threshold)
    return SelectionResult(amap.sample_id, FIXED, tuple(int(i) for i in idx))


def select(amap: AttributionMap, strategy: str, **params) -> SelectionResult:
    if strategy == TOPK:
        return select_topk(amap, **params)
    if strategy == DYNAMIC:
        return select_dynamic(amap, **params)
    if strategy == FIXED:
        return select_fixed(amap, **params)
    raise ConfigError(f"unknown selection strategy {strategy!r}")


def save_selections(path, selections) -> None:
    """Audit export: one row per sample with sample id, strategy, indices."""
    with open(path, "w") as fh:
        fh.write("sample_id,strategy,indices\n")
        for sel in selections:
            joined = ";".join(str(i) for i in sel.indices)
            fh.write(f"{sel.sample_id},{sel.strategy},{joined}\n")


def load_selections(path) -> list[SelectionResult]:
    out = []
    with open(path) as fh:
        header = fh.readline()
        if header.strip() != "sample_id,strategy,indices":
            raise ValidationError(f"{path}: not a selection export")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            sid, strategy, joined = line.split(",")
            idx = tuple(int(i) for i in joined.split(";")) if joined else ()
            out.append(SelectionResult(int(sid), strategy, idx))
    return out


def random_baselines(selection: SelectionResult, series_len: int,
                     seed: int) -> list[RandomBaselineSet]:
    """Three random index sets sized count, round(1.1*count), round(0.9*count).

    Each draw is without replacement from its own stream, derived from
    (seed, sample id, strategy, scale), so results are order- and
    parallelism-independent.
    """
    out = []
    for variant, scale in RANDOM_VARIANTS:
        size = _round_half_up(scale * selection.count)
        size = min(max(size, 0), series_len)
        rng = rng_for(seed, selection.sample_id, selection.strategy, "%.1f" % scale)
        idx = np.sort(rng.choice(series_len, size=size, replace=False))
        out.append(
            RandomBaselineSet(
                sample_id=selection.sample_id,
                variant=variant,
                indices=tuple(int(i) for i in idx),
                source_strategy=selection.strategy,
            )
        )
    return out
