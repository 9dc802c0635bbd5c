"""Time-series datasets: loading, generation, windowing, normalization.

A dataset is a list of fixed-length univariate samples with either a class
label (classification) or a real target (regression).  All values are float64
throughout; ingestion never alters numeric values, so a written-then-read
dataset round-trips bit-identically.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, DatasetFormatError, DatasetParseError

CLASSIFICATION = "classification"
REGRESSION = "regression"


@dataclass(frozen=True)
class TimeSeriesSample:
    """One fixed-length series plus its prediction target.

    ``target`` is a class index (int >= 0) for classification samples and a
    float for regression samples.  ``values`` is always float64 and finite.
    """

    values: np.ndarray
    target: float | int
    id: int

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size == 0:
            raise DatasetFormatError(f"sample {self.id}: values must be a non-empty 1-d array")
        if not np.all(np.isfinite(values)):
            raise DatasetFormatError(f"sample {self.id}: non-finite value in series")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class Dataset:
    """A homogeneous collection of samples for one task.

    Invariants: every sample has length ``series_len``; classification labels
    form the contiguous set {0..n_classes-1}.
    """

    samples: tuple[TimeSeriesSample, ...]
    task: str
    series_len: int
    name: str = "dataset"
    n_classes: int | None = None

    def __post_init__(self):
        if self.task not in (CLASSIFICATION, REGRESSION):
            raise ConfigError(f"unknown task {self.task!r}")
        object.__setattr__(self, "samples", tuple(self.samples))
        for s in self.samples:
            if len(s.values) != self.series_len:
                raise DatasetFormatError(
                    f"sample {s.id}: length {len(s.values)} != series_len {self.series_len}"
                )
        if self.task == CLASSIFICATION:
            if not self.n_classes or self.n_classes < 1:
                raise ConfigError("classification dataset needs n_classes >= 1")
            for s in self.samples:
                if not (0 <= int(s.target) < self.n_classes):
                    raise DatasetFormatError(
                        f"sample {s.id}: label {s.target} outside 0..{self.n_classes - 1}"
                    )

    def __len__(self) -> int:
        return len(self.samples)

    def values_matrix(self) -> np.ndarray:
        """All series stacked into an (n_samples, series_len) float64 array."""
        return np.stack([s.values for s in self.samples])

    def targets(self) -> np.ndarray:
        if self.task == CLASSIFICATION:
            return np.array([int(s.target) for s in self.samples], dtype=np.int64)
        return np.array([float(s.target) for s in self.samples], dtype=np.float64)

    def fingerprint(self) -> str:
        """Content hash of task, shape, targets and raw sample bytes."""
        h = hashlib.sha256()
        h.update(f"{self.task}|{self.series_len}|{self.n_classes}|{len(self)}".encode())
        for s in self.samples:
            h.update(struct.pack("<q", s.id))
            h.update(struct.pack("<d", float(s.target)))
            h.update(np.ascontiguousarray(s.values, dtype="<f8").tobytes())
        return h.hexdigest()


def _parse_number(token: str, line_no: int, path) -> float:
    try:
        return float(token)
    except ValueError:
        raise DatasetParseError(
            f"{path}: line {line_no}: cannot parse {token!r} as a number"
        ) from None


def load_ucr_tsv(path: str | Path, name: str | None = None) -> Dataset:
    """Load a UCR-style text file: one sample per line, label first.

    The separator (tab or comma) is auto-detected from the first line.
    Original labels may be arbitrary integers ({-1, 1}, {1..K}, ...) and are
    remapped to {0..n_classes-1} in ascending order of original value.
    """
    path = Path(path)
    raw_lines = path.read_text().splitlines()
    lines = [(i + 1, ln) for i, ln in enumerate(raw_lines) if ln.strip()]
    if not lines:
        raise DatasetFormatError(f"{path}: empty dataset file")

    sep = "\t" if "\t" in lines[0][1] else ","
    rows = []
    width = None
    for line_no, line in lines:
        tokens = [t for t in line.strip().split(sep) if t != ""]
        if len(tokens) < 2:
            raise DatasetFormatError(f"{path}: line {line_no}: need a label and at least one value")
        if width is None:
            width = len(tokens)
        elif len(tokens) != width:
            raise DatasetFormatError(
                f"{path}: line {line_no}: expected {width} fields, got {len(tokens)} (ragged row)"
            )
        label_raw = _parse_number(tokens[0], line_no, path)
        if abs(label_raw - round(label_raw)) > 1e-9:
            raise DatasetParseError(f"{path}: line {line_no}: non-integer label {tokens[0]!r}")
        values = np.array(
            [_parse_number(t, line_no, path) for t in tokens[1:]], dtype=np.float64
        )
        rows.append((int(round(label_raw)), values))

    original_labels = sorted({lab for lab, _ in rows})
    remap = {lab: i for i, lab in enumerate(original_labels)}
    samples = [
        TimeSeriesSample(values=vals, target=remap[lab], id=i)
        for i, (lab, vals) in enumerate(rows)
    ]
    return Dataset(
        samples=samples,
        task=CLASSIFICATION,
        series_len=len(samples[0].values),
        n_classes=len(original_labels),
        name=name or path.stem,
    )


def save_ucr_tsv(dataset: Dataset, path: str | Path, sep: str = "\t") -> None:
    """Re-export in the same text format; floats use shortest round-trip repr."""
    path = Path(path)
    with path.open("w") as fh:
        for s in dataset.samples:
            if dataset.task == CLASSIFICATION:
                label = str(int(s.target))
            else:
                label = repr(float(s.target))
            fh.write(sep.join([label] + [repr(float(v)) for v in s.values]))
            fh.write("\n")


def make_windowed_regression(
    series: Sequence[float], window: int, name: str = "windowed"
) -> Dataset:
    """Next-point regression: sample k = series[k..k+window-1], target series[k+window]."""
    series = np.asarray(series, dtype=np.float64)
    if window < 1:
        raise ConfigError(f"window must be >= 1, got {window}")
    if len(series) <= window:
        raise ConfigError(
            f"series length {len(series)} must exceed window {window}"
        )
    samples = [
        TimeSeriesSample(values=series[k : k + window], target=float(series[k + window]), id=k)
        for k in range(len(series) - window)
    ]
    return Dataset(samples=samples, task=REGRESSION, series_len=window, name=name)


def generate_spike_dataset(
    n_samples: int, series_len: int, seed: int
) -> tuple[Dataset, list[np.ndarray]]:
    """Synthetic two-class data with a known-relevant region per sample.

    Each sample is Gaussian noise (sigma 0.1) plus one spike of peak amplitude
    2.0 and width max(1, round(series_len/20)), placed uniformly at random
    inside the first half (class 0) or second half (class 1).  The spike is a
    decaying ramp with the peak at its first index, so reordering or
    flattening it is a real signal change, not a no-op.  Returns the dataset
    and, aligned with it, the exact spike index set of every sample -- the
    ground-truth attribution oracle.
    """
    if series_len < 8:
        raise ConfigError(f"series_len must be >= 8, got {series_len}")
    if n_samples < 2 or n_samples % 2 != 0:
        raise ConfigError(f"n_samples must be even and >= 2, got {n_samples}")

    rng = np.random.Generator(np.random.PCG64(seed))
    width = max(1, int(np.floor(series_len / 20 + 0.5)))
    half = series_len // 2
    ramp = 2.0 * np.arange(width, 0, -1) / width

    samples = []
    truth = []
    for i in range(n_samples):
        label = i % 2
        values = rng.normal(0.0, 0.1, size=series_len)
        if label == 0:
            start = int(rng.integers(0, half - width + 1))
        else:
            start = int(rng.integers(half, series_len - width + 1))
        values[start : start + width] += ramp
        samples.append(TimeSeriesSample(values=values, target=label, id=i))
        truth.append(np.arange(start, start + width))
    dataset = Dataset(
        samples=samples,
        task=CLASSIFICATION,
        series_len=series_len,
        n_classes=2,
        name=f"spike-n{n_samples}-l{series_len}-s{seed}",
    )
    return dataset, truth


def znormalize(dataset: Dataset) -> Dataset:
    """Rescale each sample independently to mean 0, population std 1.

    Constant samples map to all zeros rather than NaN.  Idempotent within
    1e-12 and length-preserving.
    """
    out = []
    for s in dataset.samples:
        mu = float(np.mean(s.values))
        sd = float(np.std(s.values))
        if sd == 0.0:
            values = np.zeros_like(s.values)
        else:
            values = (s.values - mu) / sd
        out.append(replace(s, values=values))
    return replace(dataset, samples=tuple(out))


def split_dataset(dataset: Dataset, test_fraction: float) -> tuple[Dataset, Dataset]:
    """Contiguous train/test split; the last round(n * fraction) samples are held out."""
    if not (0.0 < test_fraction < 1.0):
        raise ConfigError(f"test_fraction must be in (0, 1), got {test_fraction}")
    n_test = int(np.floor(len(dataset) * test_fraction + 0.5))
    n_test = min(max(n_test, 1), len(dataset) - 1)
    cut = len(dataset) - n_test
    train = replace(dataset, samples=dataset.samples[:cut], name=dataset.name + "-train")
    test = replace(dataset, samples=dataset.samples[cut:], name=dataset.name + "-test")
    return train, test
