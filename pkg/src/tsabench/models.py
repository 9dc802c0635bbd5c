"""Small differentiable models with deterministic training.

Everything is plain numpy: forward passes, backprop for parameters, and exact
analytic gradients of a chosen pre-softmax logit with respect to the input.
Given the same config and data, training is bit-reproducible on a platform --
seeded init, seeded shuffling, a fixed number of epochs, and no early
stopping.

The gradient contract: for classification, ``input_gradient`` differentiates
the selected pre-softmax logit, never the probability.  Attribution methods
that need a scalar score read the same logit via ``logits``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, runtime_checkable

import numpy as np

from .dataset import CLASSIFICATION, REGRESSION, Dataset
from .errors import CapabilityError, ConfigError, DivergenceError, ValidationError
from .seeding import rng_for

INIT_BOUND = 0.05  # uniform init range for all weights and biases

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class TrainConfig:
    kind: str = "mlp"  # linear | mlp | cnn1d
    hidden: tuple[int, ...] = (32,)
    activation: str = "relu"  # relu | tanh
    epochs: int = 50
    batch_size: int = 32
    learning_rate: float = 0.01
    seed: int = 13
    ensemble_size: int = 1

    def validate(self) -> None:
        if self.kind not in ("linear", "mlp", "cnn1d"):
            raise ConfigError(f"unknown model kind {self.kind!r}")
        if self.activation not in ("relu", "tanh"):
            raise ConfigError(f"unknown activation {self.activation!r}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.ensemble_size not in (1, 10):
            raise ConfigError(f"ensemble_size must be 1 or 10, got {self.ensemble_size}")
        if self.kind == "mlp" and (not self.hidden or any(h < 1 for h in self.hidden)):
            raise ConfigError(f"mlp needs positive hidden sizes, got {self.hidden}")


# ---------------------------------------------------------------------------
# layers


class _Dense:
    def __init__(self, w: np.ndarray, b: np.ndarray):
        self.w = w  # (out, in)
        self.b = b  # (out,)

    def params(self):
        return [self.w, self.b]

    def forward(self, x):
        return x @ self.w.T + self.b, x

    def backward(self, cache, d_out):
        x = cache
        dw = d_out.T @ x
        db = d_out.sum(axis=0)
        dx = d_out @ self.w
        return dx, [dw, db]


class _Activation:
    def __init__(self, kind: str):
        self.kind = kind

    def params(self):
        return []

    def forward(self, x):
        if self.kind == "tanh":
            out = np.tanh(x)
            return out, out
        out = np.maximum(x, 0.0)
        return out, x

    def backward(self, cache, d_out):
        if self.kind == "tanh":
            return d_out * (1.0 - cache * cache), []
        return d_out * (cache > 0.0), []


class _Conv1dSame:
    """Single-channel 1-d convolution, stride 1, zero same-padding."""

    def __init__(self, kernels: np.ndarray, b: np.ndarray):
        self.kernels = kernels  # (filters, kernel_len)
        self.b = b  # (filters,)
        k = kernels.shape[1]
        self.pad_left = (k - 1) // 2
        self.pad_right = k - 1 - self.pad_left

    def params(self):
        return [self.kernels, self.b]

    def forward(self, x):
        # x: (B, L) -> out: (B, F, L)
        n, length = x.shape
        xp = np.pad(x, ((0, 0), (self.pad_left, self.pad_right)))
        k = self.kernels.shape[1]
        out = np.zeros((n, self.kernels.shape[0], length))
        for j in range(k):
            out += self.kernels[:, j][None, :, None] * xp[:, None, j : j + length]
        out += self.b[None, :, None]
        return out, xp

    def backward(self, cache, d_out):
        xp = cache
        n, _, length = d_out.shape
        k = self.kernels.shape[1]
        dk = np.zeros_like(self.kernels)
        dxp = np.zeros_like(xp)
        for j in range(k):
            dk[:, j] = np.einsum("bft,bt->f", d_out, xp[:, j : j + length])
            dxp[:, j : j + length] += np.tensordot(d_out, self.kernels[:, j], axes=([1], [0]))
        db = d_out.sum(axis=(0, 2))
        dx = dxp[:, self.pad_left : self.pad_left + length]
        return dx, [dk, db]


class _GlobalAvgPool:
    def params(self):
        return []

    def forward(self, x):
        # (B, F, L) -> (B, F)
        return x.mean(axis=2), x.shape[2]

    def backward(self, cache, d_out):
        length = cache
        return np.repeat(d_out[:, :, None], length, axis=2) / length, []


class _Net:
    def __init__(self, layers):
        self.layers = layers

    def param_arrays(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out.extend(layer.params())
        return out

    def forward(self, x):
        caches = []
        for layer in self.layers:
            x, cache = layer.forward(x)
            caches.append(cache)
        return x, caches

    def backward(self, caches, d_out):
        """Propagate d(loss)/d(logits) back; returns (d_input, param grads)."""
        grads = []
        for layer, cache in zip(reversed(self.layers), reversed(caches)):
            d_out, layer_grads = layer.backward(cache, d_out)
            grads = layer_grads + grads
        return d_out, grads


def _build_net(config: TrainConfig, input_len: int, n_outputs: int, rng) -> _Net:
    def uniform(shape):
        return rng.uniform(-INIT_BOUND, INIT_BOUND, size=shape)

    layers = []
    if config.kind == "linear":
        layers.append(_Dense(uniform((n_outputs, input_len)), uniform(n_outputs)))
    elif config.kind == "mlp":
        widths = [input_len, *config.hidden]
        for i in range(len(widths) - 1):
            layers.append(_Dense(uniform((widths[i + 1], widths[i])), uniform(widths[i + 1])))
            layers.append(_Activation(config.activation))
        layers.append(_Dense(uniform((n_outputs, widths[-1])), uniform(n_outputs)))
    else:  # cnn1d: 8 filters, kernel 7, same padding, GAP, dense head
        layers.append(_Conv1dSame(uniform((8, 7)), uniform(8)))
        layers.append(_Activation(config.activation))
        layers.append(_GlobalAvgPool())
        layers.append(_Dense(uniform((n_outputs, 8)), uniform(n_outputs)))
    return _Net(layers)


# ---------------------------------------------------------------------------
# predictor surface


@runtime_checkable
class Predictor(Protocol):
    """What the rest of the harness needs from a model, built-in or adapter."""

    task: str
    input_len: int
    n_outputs: int
    capabilities: frozenset

    def predict(self, batch: np.ndarray) -> np.ndarray: ...

    def logits(self, batch: np.ndarray) -> np.ndarray: ...

    def input_gradient(self, sample: np.ndarray, output_index: int) -> np.ndarray: ...


def softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _as_batch(batch, input_len) -> np.ndarray:
    arr = np.asarray(batch, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != input_len:
        raise ValidationError(
            f"batch shape {arr.shape} incompatible with input_len {input_len}"
        )
    return arr


class BuiltinPredictor:
    """In-process model handle with predict, logits, and exact input gradients."""

    capabilities = frozenset({"predict", "input_gradient"})

    def __init__(self, net: _Net, task: str, input_len: int, n_outputs: int,
                 config: TrainConfig, model_id: str = "model0"):
        self.net = net
        self.task = task
        self.input_len = input_len
        self.n_outputs = n_outputs
        self.config = config
        self.model_id = model_id

    def logits(self, batch) -> np.ndarray:
        x = _as_batch(batch, self.input_len)
        out, _ = self.net.forward(x)
        return out

    def predict(self, batch) -> np.ndarray:
        out = self.logits(batch)
        if self.task == CLASSIFICATION:
            return softmax(out)
        return out

    def predict_classes(self, batch) -> np.ndarray:
        if self.task != CLASSIFICATION:
            raise CapabilityError("predict_classes is classification-only")
        return np.argmax(self.predict(batch), axis=1)

    def input_gradient(self, sample, output_index: int) -> np.ndarray:
        grads = self.input_gradient_batch(np.asarray(sample)[None, :], output_index)
        return grads[0]

    def input_gradient_batch(self, batch, output_index: int) -> np.ndarray:
        """d(logit_c)/d(input) for each row; same output index for the batch."""
        x = _as_batch(batch, self.input_len)
        if not (0 <= output_index < self.n_outputs):
            raise ValidationError(
                f"output_index {output_index} out of range [0, {self.n_outputs})"
            )
        out, caches = self.net.forward(x)
        d_out = np.zeros_like(out)
        d_out[:, output_index] = 1.0
        d_in, _ = self.net.backward(caches, d_out)
        return d_in

    def param_arrays(self) -> list[np.ndarray]:
        return self.net.param_arrays()

    def n_params(self) -> int:
        return sum(p.size for p in self.param_arrays())


# ---------------------------------------------------------------------------
# training


@dataclass
class TrainLog:
    epoch_losses: list[float] = field(default_factory=list)


def init_model(config: TrainConfig, input_len: int, n_outputs: int,
               task: str = CLASSIFICATION, model_id: str = "model0") -> BuiltinPredictor:
    """Fresh model with every weight and bias ~ U[-0.05, 0.05], seeded."""
    config.validate()
    if input_len < 1 or n_outputs < 1:
        raise ConfigError("input_len and n_outputs must be positive")
    rng = rng_for("init", config.seed)
    net = _build_net(config, input_len, n_outputs, rng)
    return BuiltinPredictor(net, task, input_len, n_outputs, config, model_id)


def _loss_and_grads(model: BuiltinPredictor, x: np.ndarray, y: np.ndarray):
    out, caches = model.net.forward(x)
    n = x.shape[0]
    if model.task == CLASSIFICATION:
        shifted = out - out.max(axis=1, keepdims=True)
        lse = np.log(np.exp(shifted).sum(axis=1)) + out.max(axis=1)
        loss = float(np.mean(lse - out[np.arange(n), y]))
        d_out = softmax(out)
        d_out[np.arange(n), y] -= 1.0
        d_out /= n
    else:
        resid = out[:, 0] - y
        loss = float(np.mean(resid * resid))
        d_out = (2.0 * resid / n)[:, None]
    _, grads = model.net.backward(caches, d_out)
    return loss, grads


def _check_compatible(model: BuiltinPredictor, dataset: Dataset) -> None:
    if dataset.series_len != model.input_len:
        raise ConfigError(
            f"dataset series_len {dataset.series_len} != model input_len {model.input_len}"
        )
    if dataset.task != model.task:
        raise ConfigError(f"dataset task {dataset.task} != model task {model.task}")
    if dataset.task == CLASSIFICATION and dataset.n_classes != model.n_outputs:
        raise ConfigError(
            f"dataset has {dataset.n_classes} classes but model has {model.n_outputs} outputs"
        )
    if dataset.task == REGRESSION and model.n_outputs != 1:
        raise ConfigError("regression model must have exactly one output")


def train(model: BuiltinPredictor, dataset: Dataset,
          config: TrainConfig) -> tuple[BuiltinPredictor, TrainLog]:
    """Exactly config.epochs epochs of seeded mini-batch Adam, no early stopping."""
    config.validate()
    _check_compatible(model, dataset)
    x_all = dataset.values_matrix()
    y_all = dataset.targets()

    params = model.param_arrays()
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    t = 0
    log = TrainLog()
    shuffle_rng = rng_for("shuffle", config.seed)

    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(len(dataset))
        epoch_loss = 0.0
        for start in range(0, len(dataset), config.batch_size):
            idx = order[start : start + config.batch_size]
            loss, grads = _loss_and_grads(model, x_all[idx], y_all[idx])
            if not np.isfinite(loss):
                raise DivergenceError(f"non-finite loss at epoch {epoch + 1}")
            epoch_loss += loss * len(idx)
            t += 1
            for p, g, mi, vi in zip(params, grads, m, v):
                mi *= ADAM_BETA1
                mi += (1.0 - ADAM_BETA1) * g
                vi *= ADAM_BETA2
                vi += (1.0 - ADAM_BETA2) * g * g
                m_hat = mi / (1.0 - ADAM_BETA1**t)
                v_hat = vi / (1.0 - ADAM_BETA2**t)
                p -= config.learning_rate * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
        log.epoch_losses.append(epoch_loss / len(dataset))
    return model, log


def train_ensemble(dataset: Dataset, config: TrainConfig,
                   input_len: int | None = None,
                   n_outputs: int | None = None) -> list[BuiltinPredictor]:
    """Train config.ensemble_size models with seeds seed+0 .. seed+k-1.

    Downstream scoring averages the quality metric over the returned models;
    size 1 degenerates to a single plain training run.
    """
    config.validate()
    input_len = input_len or dataset.series_len
    if n_outputs is None:
        n_outputs = dataset.n_classes if dataset.task == CLASSIFICATION else 1
    models = []
    for i in range(config.ensemble_size):
        member_cfg = TrainConfig(**{**config.__dict__, "seed": config.seed + i})
        model = init_model(member_cfg, input_len, n_outputs, dataset.task,
                           model_id=f"model{i}")
        model, _ = train(model, dataset, member_cfg)
        models.append(model)
    return models


# ---------------------------------------------------------------------------
# persistence

MODEL_FORMAT = "tsabench-model"
MODEL_FORMAT_VERSION = 1


def save_model(model: BuiltinPredictor, path: str | Path) -> None:
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_FORMAT_VERSION,
        "task": model.task,
        "input_len": model.input_len,
        "n_outputs": model.n_outputs,
        "model_id": model.model_id,
        "config": {**model.config.__dict__, "hidden": list(model.config.hidden)},
        "params": [p.tolist() for p in model.param_arrays()],
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True))


def load_model(path: str | Path) -> BuiltinPredictor:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != MODEL_FORMAT or doc.get("version") != MODEL_FORMAT_VERSION:
        raise ValidationError(f"{path}: not a version-{MODEL_FORMAT_VERSION} model file")
    cfg = dict(doc["config"])
    cfg["hidden"] = tuple(cfg["hidden"])
    config = TrainConfig(**cfg)
    model = init_model(config, doc["input_len"], doc["n_outputs"], doc["task"],
                       model_id=doc.get("model_id", "model0"))
    for p, stored in zip(model.param_arrays(), doc["params"], strict=True):
        arr = np.asarray(stored, dtype=np.float64)
        if arr.shape != p.shape:
            raise ValidationError(f"{path}: parameter shape mismatch {arr.shape} vs {p.shape}")
        p[...] = arr
    return model
