"""Point and interval perturbation operators.

Three point modes (zero, inverse, series mean) and four interval modes (zero,
interval mean, inverse, swap) applied at the time points a selection marked
relevant.  All operators are pure: points outside the selection come back
bit-identical, and an empty selection is the identity.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, ValidationError

POINT_MODES = ("zero", "inverse", "series_mean")
INTERVAL_MODES = ("zero", "interval_mean", "inverse", "swap")

POINT_KINDS = ("point_zero", "point_inverse", "point_mean")
INTERVAL_KINDS = ("interval_zero", "interval_mean", "interval_inverse", "interval_swap")
ALL_KINDS = POINT_KINDS + INTERVAL_KINDS

_KIND_TO_MODE = {
    "point_zero": "zero",
    "point_inverse": "inverse",
    "point_mean": "series_mean",
    "interval_zero": "zero",
    "interval_mean": "interval_mean",
    "interval_inverse": "inverse",
    "interval_swap": "swap",
}


@dataclass(frozen=True)
class ReferenceRange:
    """Value range of the unperturbed sample; fixes the reflection used by inverse."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi)):
            raise ValidationError("reference range must be finite")
        if self.lo > self.hi:
            raise ValidationError(f"reference range lo {self.lo} > hi {self.hi}")


def reference_range(series: Sequence[float]) -> ReferenceRange:
    """Symmetric range (-m, m) with m = max absolute value of the sample.

    Centering the range on zero makes the pipeline's inverse a plain
    negation.  An asymmetric (min, max) range would reflect small values to
    the far side of the observed range, so randomly chosen points would be
    blasted to spike-sized magnitudes and random baselines would degrade the
    model more than attribution-guided perturbation, inverting the very
    assumption the benchmark tests.  Callers that want a different reflection
    can pass their own ReferenceRange to the perturbation operations.
    """
    arr = np.asarray(series, dtype=np.float64)
    m = float(np.max(np.abs(arr))) if arr.size else 0.0
    return ReferenceRange(lo=-m, hi=m)


@dataclass(frozen=True)
class VerificationMethod:
    """One of the seven verification kinds; interval kinds carry a radius."""

    kind: str
    radius: int | None = None

    def __post_init__(self):
        if self.kind not in ALL_KINDS:
            raise ConfigError(f"unknown verification kind {self.kind!r}")
        if self.kind in INTERVAL_KINDS:
            if self.radius is None or self.radius < 0:
                raise ConfigError(f"{self.kind} needs a radius >= 0, got {self.radius}")
        elif self.radius is not None:
            raise ConfigError(f"{self.kind} takes no radius")

    @property
    def is_interval(self) -> bool:
        return self.kind in INTERVAL_KINDS

    def apply(self, series: np.ndarray, indices, ref: ReferenceRange) -> np.ndarray:
        mode = _KIND_TO_MODE[self.kind]
        if self.is_interval:
            return perturb_interval(series, indices, self.radius, mode, ref)
        return perturb_points(series, indices, mode, ref)

    def label(self) -> str:
        return self.kind


def default_interval_radius(series_len: int) -> int:
    """Radius used when a config omits it: 2.5% of the length, at least 1."""
    return max(1, int(np.floor(0.025 * series_len + 0.5)))


def _checked_indices(indices: Iterable[int], length: int) -> np.ndarray:
    idx = np.unique(np.asarray(list(indices), dtype=np.int64))
    if idx.size and (idx[0] < 0 or idx[-1] >= length):
        bad = idx[0] if idx[0] < 0 else idx[-1]
        raise ValidationError(f"index {bad} out of range [0, {length})")
    return idx


def perturb_points(series: Sequence[float], indices: Iterable[int], mode: str,
                   ref: ReferenceRange) -> np.ndarray:
    """Replace individual points: zero, range reflection, or whole-series mean.

    ``inverse`` reflects across the reference range midpoint
    (x -> lo + hi - x), which keeps values inside the observed range and is
    an involution for a fixed range.
    """
    if mode not in POINT_MODES:
        raise ConfigError(f"unknown point mode {mode!r}")
    arr = np.array(series, dtype=np.float64)
    idx = _checked_indices(indices, len(arr))
    if idx.size == 0:
        return arr
    if mode == "zero":
        arr[idx] = 0.0
    elif mode == "series_mean":
        arr[idx] = np.mean(np.asarray(series, dtype=np.float64))
    else:
        arr[idx] = ref.lo + ref.hi - arr[idx]
    return arr


def _merged_runs(centers: np.ndarray, radius: int, length: int) -> list[tuple[int, int]]:
    """Clip [c-r, c+r] to bounds and merge intervals that share indices.

    Only genuinely intersecting intervals are merged; runs that merely abut
    remain independent so that radius-0 intervals act per point.
    """
    runs: list[tuple[int, int]] = []
    for c in centers:  # centers come in sorted
        lo = max(0, int(c) - radius)
        hi = min(length - 1, int(c) + radius)
        if runs and lo <= runs[-1][1]:
            runs[-1] = (runs[-1][0], max(runs[-1][1], hi))
        else:
            runs.append((lo, hi))
    return runs


def perturb_interval(series: Sequence[float], centers: Iterable[int], radius: int,
                     mode: str, ref: ReferenceRange) -> np.ndarray:
    """Perturb the radius-r windows around each center as whole runs.

    Overlapping windows are merged first so the result cannot depend on
    center order; then each merged run is zeroed, set to its own mean,
    reflected pointwise, or reversed in place (swap).
    """
    if mode not in INTERVAL_MODES:
        raise ConfigError(f"unknown interval mode {mode!r}")
    if radius < 0:
        raise ConfigError(f"radius must be >= 0, got {radius}")
    arr = np.array(series, dtype=np.float64)
    centers_arr = _checked_indices(centers, len(arr))
    if centers_arr.size == 0:
        return arr
    for lo, hi in _merged_runs(centers_arr, radius, len(arr)):
        window = slice(lo, hi + 1)
        if mode == "zero":
            arr[window] = 0.0
        elif mode == "interval_mean":
            arr[window] = np.mean(arr[window])
        elif mode == "inverse":
            arr[window] = ref.lo + ref.hi - arr[window]
        else:  # swap: deterministic reversal of the run
            arr[window] = arr[window][::-1]
    return arr
