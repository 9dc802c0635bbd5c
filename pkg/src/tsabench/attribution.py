"""Per-time-point relevance scores for individual predictions.

Seven built-in methods: three gradient-based (saliency, input x gradient,
integrated gradients, plus smoothgrad as noise-averaged saliency), three that
only need forward evaluations (occlusion, a LIME-style ridge surrogate,
Shapley value sampling), and a ground-truth oracle for synthetic data.
Externally computed maps can be imported from the dump format.

All methods explain the model's own predicted class (argmax) for
classification and output 0 for regression, and they score the pre-softmax
logit.  Raw maps are signed where the method is signed; ``normalize`` takes
absolute values and min-max rescales to [0, 1] per sample.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .dataset import CLASSIFICATION
from .errors import AlignmentError, CapabilityError, ConfigError, ValidationError
from .seeding import rng_for

METHOD_IDS = (
    "saliency",
    "input_x_gradient",
    "integrated_gradients",
    "smoothgrad",
    "occlusion",
    "lime",
    "shapley_sampling",
    "oracle",
)

GRADIENT_METHODS = ("saliency", "input_x_gradient", "integrated_gradients", "smoothgrad")


@dataclass(frozen=True)
class AttributionMap:
    """Relevance scores for one sample under one method."""

    sample_id: int
    method_id: str
    scores: np.ndarray
    normalized: bool
    target_index: int
    degenerate: bool = False

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        if scores.ndim != 1:
            raise ValidationError("attribution scores must be 1-d")
        if not np.all(np.isfinite(scores)):
            raise ValidationError(
                f"non-finite attribution score ({self.method_id}, sample {self.sample_id})"
            )
        scores.setflags(write=False)
        object.__setattr__(self, "scores", scores)
        if self.normalized and scores.size:
            if scores.min() < 0.0 or scores.max() > 1.0:
                raise ValidationError("normalized scores must lie in [0, 1]")


def _target_index(model, sample: np.ndarray) -> int:
    if model.task == CLASSIFICATION:
        probs = model.predict(sample[None, :])[0]
        return int(np.argmax(probs))
    return 0


def _require_gradient(model, method_id: str) -> None:
    if "input_gradient" not in model.capabilities:
        raise CapabilityError(f"{method_id} needs the input_gradient capability")


def _logit_batch(model, batch: np.ndarray, target: int) -> np.ndarray:
    return model.logits(batch)[:, target]


def _gradient_rows(model, batch: np.ndarray, target: int) -> np.ndarray:
    """Input gradients for a batch sharing one target index."""
    if hasattr(model, "input_gradient_batch"):
        return model.input_gradient_batch(batch, target)
    return np.stack([model.input_gradient(row, target) for row in batch])


# ---------------------------------------------------------------------------
# gradient-based methods


def saliency(model, sample: Sequence[float], sample_id: int = 0) -> AttributionMap:
    """|d logit_c / d x_i| at the input."""
    _require_gradient(model, "saliency")
    x = np.asarray(sample, dtype=np.float64)
    target = _target_index(model, x)
    grad = model.input_gradient(x, target)
    return AttributionMap(sample_id, "saliency", np.abs(grad), False, target)


def input_x_gradient(model, sample: Sequence[float], sample_id: int = 0) -> AttributionMap:
    """Signed x_i * d logit_c / d x_i."""
    _require_gradient(model, "input_x_gradient")
    x = np.asarray(sample, dtype=np.float64)
    target = _target_index(model, x)
    grad = model.input_gradient(x, target)
    return AttributionMap(sample_id, "input_x_gradient", x * grad, False, target)


def integrated_gradients(model, sample: Sequence[float], sample_id: int = 0,
                         steps: int = 50,
                         baseline: Sequence[float] | None = None) -> AttributionMap:
    """(x - b) times the path-averaged gradient from baseline b to x.

    Right-endpoint Riemann sum with ``steps`` points; baseline defaults to
    zeros.  Satisfies completeness up to the quadrature error, which shrinks
    as steps grows.
    """
    _require_gradient(model, "integrated_gradients")
    if steps < 1:
        raise ConfigError(f"integrated_gradients needs steps >= 1, got {steps}")
    x = np.asarray(sample, dtype=np.float64)
    b = np.zeros_like(x) if baseline is None else np.asarray(baseline, dtype=np.float64)
    if b.shape != x.shape:
        raise ConfigError("baseline must have the same shape as the sample")
    target = _target_index(model, x)
    alphas = np.arange(1, steps + 1) / steps
    points = b[None, :] + alphas[:, None] * (x - b)[None, :]
    grads = _gradient_rows(model, points, target)
    scores = (x - b) * grads.mean(axis=0)
    return AttributionMap(sample_id, "integrated_gradients", scores, False, target)


def smoothgrad(model, sample: Sequence[float], sample_id: int = 0,
               n_samples: int = 25, sigma_fraction: float = 0.1,
               seed: int = 13) -> AttributionMap:
    """Mean saliency over Gaussian-jittered copies of the input.

    sigma = sigma_fraction * (max - min) of the sample; sigma 0 (constant
    sample or zero fraction) short-circuits to plain saliency.
    """
    _require_gradient(model, "smoothgrad")
    if n_samples < 1:
        raise ConfigError(f"smoothgrad needs n_samples >= 1, got {n_samples}")
    if not (0.0 < sigma_fraction <= 1.0):
        raise ConfigError(f"sigma_fraction must lie in (0, 1], got {sigma_fraction}")
    x = np.asarray(sample, dtype=np.float64)
    target = _target_index(model, x)
    sigma = sigma_fraction * float(x.max() - x.min())
    if sigma == 0.0:
        grad = model.input_gradient(x, target)
        return AttributionMap(sample_id, "smoothgrad", np.abs(grad), False, target)
    rng = rng_for(seed, "smoothgrad", sample_id)
    noisy = x[None, :] + rng.normal(0.0, sigma, size=(n_samples, x.size))
    grads = _gradient_rows(model, noisy, target)
    scores = np.abs(grads).mean(axis=0)
    return AttributionMap(sample_id, "smoothgrad", scores, False, target)


# ---------------------------------------------------------------------------
# forward-only methods


def occlusion(model, sample: Sequence[float], sample_id: int = 0,
              window: int | None = None, replacement: str = "zero") -> AttributionMap:
    """Logit drop when a sliding window is replaced, averaged per time point.

    Window defaults to 5% of the length (at least 1); replacement is zero or
    the sample mean.  Each point's score is the mean drop over every window
    placement that covers it.
    """
    if replacement not in ("zero", "sample_mean"):
        raise ConfigError(f"unknown occlusion replacement {replacement!r}")
    x = np.asarray(sample, dtype=np.float64)
    n = x.size
    if window is None:
        window = max(1, int(np.floor(0.05 * n + 0.5)))
    if not (1 <= window <= n):
        raise ConfigError(f"occlusion window must lie in [1, {n}], got {window}")
    target = _target_index(model, x)
    fill = 0.0 if replacement == "zero" else float(x.mean())

    placements = n - window + 1
    batch = np.repeat(x[None, :], placements, axis=0)
    for s in range(placements):
        batch[s, s : s + window] = fill
    base = float(_logit_batch(model, x[None, :], target)[0])
    drops = base - _logit_batch(model, batch, target)

    scores = np.zeros(n)
    counts = np.zeros(n)
    for s in range(placements):
        scores[s : s + window] += drops[s]
        counts[s : s + window] += 1.0
    scores /= counts
    return AttributionMap(sample_id, "occlusion", scores, False, target)


def _segment_bounds(length: int, segments: int) -> list[tuple[int, int]]:
    edges = np.linspace(0, length, segments + 1).astype(int)
    return [(int(edges[i]), int(edges[i + 1])) for i in range(segments)]


def _weighted_ridge(z: np.ndarray, y: np.ndarray, w: np.ndarray, lam: float) -> np.ndarray:
    """Ridge coefficients with an unpenalized intercept, weighted samples."""
    design = np.column_stack([np.ones(len(z)), z])
    wz = design * w[:, None]
    gram = design.T @ wz
    penalty = lam * np.eye(design.shape[1])
    penalty[0, 0] = 0.0
    beta = np.linalg.solve(gram + penalty, design.T @ (w * y))
    return beta[1:]


def lime_surrogate(model, sample: Sequence[float], sample_id: int = 0,
                   segments: int = 10, n_samples: int = 1000,
                   kernel_width: float = 0.25, ridge_lambda: float = 1e-3,
                   seed: int = 13) -> AttributionMap:
    """Local ridge surrogate over on/off masks of contiguous segments.

    The series is cut into equal-width segments; random masks keep each
    segment with probability 0.5 and replace masked segments with the sample
    mean.  A ridge regression from mask vectors to the target logit, weighted
    by exp(-(1 - kept_fraction)^2 / kernel_width^2), yields one coefficient
    per segment, broadcast to its time points.
    """
    x = np.asarray(sample, dtype=np.float64)
    if not (1 <= segments <= x.size):
        raise ConfigError(f"segments must lie in [1, {x.size}], got {segments}")
    if n_samples < 2:
        raise ConfigError(f"lime needs n_samples >= 2, got {n_samples}")
    if kernel_width <= 0 or ridge_lambda < 0:
        raise ConfigError("kernel_width must be > 0 and ridge lambda >= 0")
    target = _target_index(model, x)
    bounds = _segment_bounds(x.size, segments)
    rng = rng_for(seed, "lime", sample_id)
    masks = rng.integers(0, 2, size=(n_samples, segments)).astype(np.float64)

    fill = float(x.mean())
    batch = np.empty((n_samples, x.size))
    for row, mask in enumerate(masks):
        series = x.copy()
        for seg, (lo, hi) in enumerate(bounds):
            if mask[seg] == 0.0:
                series[lo:hi] = fill
        batch[row] = series
    y = _logit_batch(model, batch, target)
    kept = masks.mean(axis=1)
    weights = np.exp(-((1.0 - kept) ** 2) / kernel_width**2)
    coef = _weighted_ridge(masks, y, weights, ridge_lambda)

    scores = np.zeros(x.size)
    for seg, (lo, hi) in enumerate(bounds):
        scores[lo:hi] = coef[seg]
    return AttributionMap(sample_id, "lime", scores, False, target)


def shapley_sampling(model, sample: Sequence[float], sample_id: int = 0,
                     permutations: int = 25,
                     baseline: Sequence[float] | None = None,
                     seed: int = 13) -> AttributionMap:
    """Monte-Carlo Shapley values over time points.

    For each sampled permutation the points are revealed one by one from the
    baseline, and every point is credited with its marginal logit change;
    scores average the marginals over permutations.
    """
    if permutations < 1:
        raise ConfigError(f"shapley needs permutations >= 1, got {permutations}")
    x = np.asarray(sample, dtype=np.float64)
    b = np.zeros_like(x) if baseline is None else np.asarray(baseline, dtype=np.float64)
    if b.shape != x.shape:
        raise ConfigError("baseline must have the same shape as the sample")
    target = _target_index(model, x)
    rng = rng_for(seed, "shapley_sampling", sample_id)

    n = x.size
    totals = np.zeros(n)
    for _ in range(permutations):
        order = rng.permutation(n)
        # states[j] has the first j points of the permutation revealed
        states = np.repeat(b[None, :], n + 1, axis=0)
        for j, idx in enumerate(order):
            states[j + 1 :, idx] = x[idx]
        values = _logit_batch(model, states, target)
        totals[order] += np.diff(values)
    scores = totals / permutations
    return AttributionMap(sample_id, "shapley_sampling", scores, False, target)


# ---------------------------------------------------------------------------
# method configs and dispatch

_DEFAULT_PARAMS = {
    "saliency": {},
    "input_x_gradient": {},
    "integrated_gradients": {"steps": 50},
    "smoothgrad": {"n_samples": 25, "sigma_fraction": 0.1},
    "occlusion": {"window": None, "replacement": "zero"},
    "lime": {"segments": 10, "n_samples": 1000, "kernel_width": 0.25,
             "ridge_lambda": 1e-3},
    "shapley_sampling": {"permutations": 25},
    "oracle": {},
    "external": {"path": None, "name": None},
}


@dataclass(frozen=True)
class MethodConfig:
    """An attribution method id plus its method-specific parameters."""

    method_id: str
    params: dict

    def __post_init__(self):
        if self.method_id not in _DEFAULT_PARAMS:
            raise ConfigError(f"unknown attribution method {self.method_id!r}")
        known = _DEFAULT_PARAMS[self.method_id]
        for key in self.params:
            if key not in known:
                raise ConfigError(
                    f"method {self.method_id!r} does not take parameter {key!r}"
                )
        merged = {**known, **self.params}
        object.__setattr__(self, "params", merged)
        if self.method_id == "external" and not merged["path"]:
            raise ConfigError("external method needs a 'path' parameter")


def method_config(method_id: str, **params) -> MethodConfig:
    return MethodConfig(method_id, params)


def compute_map(model, sample: Sequence[float], sample_id: int,
                config: MethodConfig, seed: int,
                truth_indices: Iterable[int] | None = None) -> AttributionMap:
    """Run one configured method on one sample (raw, unnormalized)."""
    mid = config.method_id
    p = config.params
    if mid == "saliency":
        return saliency(model, sample, sample_id)
    if mid == "input_x_gradient":
        return input_x_gradient(model, sample, sample_id)
    if mid == "integrated_gradients":
        return integrated_gradients(model, sample, sample_id, steps=p["steps"])
    if mid == "smoothgrad":
        return smoothgrad(model, sample, sample_id, n_samples=p["n_samples"],
                          sigma_fraction=p["sigma_fraction"], seed=seed)
    if mid == "occlusion":
        return occlusion(model, sample, sample_id, window=p["window"],
                         replacement=p["replacement"])
    if mid == "lime":
        return lime_surrogate(model, sample, sample_id, segments=p["segments"],
                              n_samples=p["n_samples"],
                              kernel_width=p["kernel_width"],
                              ridge_lambda=p["ridge_lambda"], seed=seed)
    if mid == "shapley_sampling":
        return shapley_sampling(model, sample, sample_id,
                                permutations=p["permutations"], seed=seed)
    if mid == "oracle":
        if truth_indices is None:
            raise ConfigError("oracle attribution needs ground-truth indices")
        return oracle_attribution(truth_indices, len(np.asarray(sample)), sample_id)
    raise ConfigError(f"method {mid!r} cannot be computed sample-by-sample")


def compute_attributions(model, samples: Sequence[np.ndarray], config: MethodConfig,
                         seed: int,
                         truth: Sequence[Iterable[int]] | None = None,
                         ) -> list[AttributionMap]:
    """Raw maps for every sample in order; sample ids are positional."""
    if config.method_id == "oracle" and truth is None:
        raise ConfigError("oracle attribution needs ground-truth indices")
    out = []
    for sid, sample in enumerate(samples):
        t = truth[sid] if truth is not None else None
        out.append(compute_map(model, sample, sid, config, seed, truth_indices=t))
    return out


# ---------------------------------------------------------------------------
# oracle and external maps


def oracle_attribution(truth_indices: Iterable[int], series_len: int,
                       sample_id: int = 0) -> AttributionMap:
    """1.0 on the ground-truth indices, 0.0 elsewhere."""
    idx = np.asarray(list(truth_indices), dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= series_len):
        raise ValidationError(
            f"ground-truth index out of range [0, {series_len}) for sample {sample_id}"
        )
    scores = np.zeros(series_len)
    scores[idx] = 1.0
    return AttributionMap(sample_id, "oracle", scores, False, target_index=0)


def normalize(amap: AttributionMap) -> AttributionMap:
    """Absolute values, then min-max to [0, 1]; constant maps become zero.

    A constant raw map carries no ordering information, so it maps to all
    zeros and is flagged degenerate instead of dividing by zero.
    """
    raw = np.abs(amap.scores)
    lo, hi = float(raw.min()), float(raw.max())
    if hi == lo:
        return replace(amap, scores=np.zeros_like(raw), normalized=True, degenerate=True)
    return replace(amap, scores=(raw - lo) / (hi - lo), normalized=True, degenerate=False)


# ---------------------------------------------------------------------------
# dump format: header line, then one row "sample_id,score,score,..." per sample


def save_attributions(maps: Sequence[AttributionMap], path: str | Path) -> None:
    if not maps:
        raise ValidationError("refusing to write an empty attribution file")
    method = maps[0].method_id
    normalized = maps[0].normalized
    with Path(path).open("w") as fh:
        fh.write(f"# method={method} normalized={'true' if normalized else 'false'}\n")
        for amap in maps:
            fh.write(",".join([str(amap.sample_id)] + [repr(float(v)) for v in amap.scores]))
            fh.write("\n")


def load_attributions(path: str | Path) -> list[AttributionMap]:
    """Read a dump file back, preserving method id and normalization flag."""
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("# method="):
        raise ValidationError(f"{path}: missing attribution header")
    header = lines[0][2:].split()
    fields = dict(part.split("=", 1) for part in header)
    method = fields.get("method", "unknown")
    normalized = fields.get("normalized") == "true"
    maps = []
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        tokens = line.split(",")
        try:
            sample_id = int(tokens[0])
            scores = np.array([float(t) for t in tokens[1:]], dtype=np.float64)
        except ValueError:
            raise ValidationError(f"{path}: line {line_no}: unparseable row") from None
        maps.append(AttributionMap(sample_id, method, scores, normalized, target_index=0))
    return maps


def load_external_attributions(path: str | Path, n_samples: int, series_len: int,
                               name: str | None = None) -> list[AttributionMap]:
    """Import foreign maps, checking alignment with the test set."""
    maps = load_attributions(path)
    if len(maps) != n_samples:
        raise AlignmentError(
            f"{path}: {len(maps)} rows but the test set has {n_samples} samples"
        )
    for amap in maps:
        if amap.scores.size != series_len:
            raise AlignmentError(
                f"{path}: sample {amap.sample_id} has {amap.scores.size} scores, "
                f"expected {series_len}"
            )
    label = name or maps[0].method_id
    return [replace(m, method_id=f"external:{label}") for m in maps]
