"""Shared builders for the test suite."""

import numpy as np
import pytest

from tsabench.models import TrainConfig, init_model


def make_linear(W, b=None, task="classification"):
    """A BuiltinPredictor with handcrafted dense weights.

    W has shape (n_outputs, input_len); logit_c(x) = W[c] @ x + b[c], so the
    exact input gradient of logit_c is the row W[c].
    """
    W = np.asarray(W, dtype=np.float64)
    n_outputs, input_len = W.shape
    b = np.zeros(n_outputs) if b is None else np.asarray(b, dtype=np.float64)
    cfg = TrainConfig(kind="linear", seed=0)
    model = init_model(cfg, input_len, n_outputs, task=task)
    w_arr, b_arr = model.param_arrays()
    w_arr[:] = W
    b_arr[:] = b
    return model


def scaled_mlp(input_len, n_outputs, hidden=(16,), activation="tanh",
               seed=5, scale=1.0, task="classification"):
    """A freshly initialised MLP with all parameters multiplied by ``scale``.

    The stock init keeps weights in [-0.05, 0.05], which makes a tanh net
    almost perfectly linear; scaling up buys real curvature for quadrature
    and sampling tests.
    """
    cfg = TrainConfig(kind="mlp", hidden=tuple(hidden), activation=activation,
                      seed=seed)
    model = init_model(cfg, input_len, n_outputs, task=task)
    for p in model.param_arrays():
        p *= scale
    return model


@pytest.fixture
def rng():
    return np.random.default_rng(42)
