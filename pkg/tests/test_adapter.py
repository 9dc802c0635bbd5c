"""Wire-protocol client tests against a scriptable subprocess server."""

import json
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from tsabench.adapter import AdapterEndpoint, AdapterPredictor
from tsabench.config import build_run_config
from tsabench.errors import (CapabilityError, ConfigError, ProtocolError,
                             TransportError, ValidationError)
from tsabench.models import save_model
from tsabench.runner import execute_run, load_run

from conftest import make_linear

STUB = str(Path(__file__).parent / "helpers" / "stub_server.py")


def stub_cmd(mode, model_path=None):
    cmd = [sys.executable, STUB, mode]
    if model_path is not None:
        cmd.append(str(model_path))
    return cmd


@pytest.fixture(scope="module")
def linear_setup(tmp_path_factory):
    rng = np.random.default_rng(21)
    W = rng.normal(size=(3, 12))
    b = rng.normal(size=3)
    model = make_linear(W, b)
    path = tmp_path_factory.mktemp("adapter") / "model.json"
    save_model(model, path)
    return model, W, b, path


@pytest.fixture
def served(linear_setup):
    model, W, b, path = linear_setup
    with AdapterEndpoint(stub_cmd("linear", path), timeout=10.0) as ep:
        yield model, W, ep


class TestEndpointLifecycle:
    def test_handshake_descriptor(self, served):
        _, _, ep = served
        d = ep.descriptor
        assert d["protocol"] == 1
        assert d["input_len"] == 12
        assert d["n_outputs"] == 3
        assert set(d["capabilities"]) == {"predict", "gradient"}

    def test_double_start_rejected(self, served):
        _, _, ep = served
        with pytest.raises(ProtocolError, match="already started"):
            ep.start()

    def test_close_is_idempotent(self, linear_setup):
        *_, path = linear_setup
        ep = AdapterEndpoint(stub_cmd("linear", path))
        ep.start()
        ep.close()
        ep.close()
        assert ep.proc is None

    def test_close_before_start_is_noop(self):
        AdapterEndpoint(["whatever"]).close()

    def test_unlaunchable_command(self):
        ep = AdapterEndpoint(["/no/such/binary/anywhere"])
        with pytest.raises(TransportError, match="cannot launch"):
            ep.start()

    def test_constructor_validation(self):
        with pytest.raises(ConfigError):
            AdapterEndpoint([])
        with pytest.raises(ConfigError):
            AdapterEndpoint(["x"], timeout=0)
        with pytest.raises(ConfigError):
            AdapterEndpoint(["x"], max_batch=0)

    def test_string_command_is_wrapped(self):
        ep = AdapterEndpoint("server-binary")
        assert ep.command == ["server-binary"]


class TestHandshakeRejections:
    @pytest.mark.parametrize("mode,needle", [
        ("wrong-version", "version mismatch"),
        ("no-caps", "missing 'capabilities'"),
        ("alien-caps", "unknown capabilities"),
        ("no-predict", "predict capability"),
    ])
    def test_bad_info_reply(self, mode, needle):
        ep = AdapterEndpoint(stub_cmd(mode), timeout=10.0)
        try:
            with pytest.raises(ProtocolError, match=needle):
                ep.start()
        finally:
            ep.close()


class TestPredictAndGradient:
    def test_predict_matches_in_process(self, served):
        model, _, ep = served
        pred = AdapterPredictor(ep, "classification")
        rng = np.random.default_rng(4)
        x = rng.uniform(-2, 2, size=(17, 12))
        np.testing.assert_allclose(pred.predict(x), model.predict(x),
                                   rtol=0, atol=1e-12)

    def test_predict_single_sample(self, served):
        model, _, ep = served
        pred = AdapterPredictor(ep, "classification")
        x = np.linspace(-1, 1, 12)
        got = pred.predict(x)
        assert got.shape == (1, 3)
        np.testing.assert_allclose(got, model.predict(x[None, :]), atol=1e-12)

    def test_predict_classes_match(self, served):
        model, _, ep = served
        pred = AdapterPredictor(ep, "classification")
        x = np.random.default_rng(5).normal(size=(9, 12))
        np.testing.assert_array_equal(pred.predict_classes(x),
                                      model.predict_classes(x))

    def test_logits_preserve_argmax_and_ratios(self, served):
        model, _, ep = served
        pred = AdapterPredictor(ep, "classification")
        x = np.random.default_rng(6).normal(size=(8, 12))
        logits = pred.logits(x)
        probs = model.predict(x)
        assert logits.shape == probs.shape
        np.testing.assert_array_equal(np.argmax(logits, axis=1),
                                      np.argmax(probs, axis=1))
        # differences of log-probabilities recover probability ratios
        np.testing.assert_allclose(logits[:, 0] - logits[:, 1],
                                   np.log(probs[:, 0] / probs[:, 1]),
                                   atol=1e-9)

    def test_gradient_is_weight_row(self, served):
        _, W, ep = served
        pred = AdapterPredictor(ep, "classification")
        x = np.random.default_rng(7).normal(size=(5, 12))
        for c in range(3):
            got = pred.input_gradient_batch(x, c)
            np.testing.assert_allclose(got, np.tile(W[c], (5, 1)), atol=1e-12)

    def test_gradient_single_sample(self, served):
        _, W, ep = served
        pred = AdapterPredictor(ep, "classification")
        g = pred.input_gradient(np.zeros(12), 1)
        assert g.shape == (12,)
        np.testing.assert_allclose(g, W[1], atol=1e-12)

    def test_empty_batch(self, served):
        _, _, ep = served
        pred = AdapterPredictor(ep, "classification")
        out = pred.predict(np.empty((0, 12)))
        assert out.shape == (0, 3)

    def test_batches_are_chunked(self, linear_setup):
        model, _, _, path = linear_setup
        with AdapterEndpoint(stub_cmd("linear", path), timeout=10.0,
                             max_batch=4) as ep:
            pred = AdapterPredictor(ep, "classification")
            before = ep._next_id
            x = np.random.default_rng(8).normal(size=(10, 12))
            got = pred.predict(x)
            # 10 rows at max_batch 4 -> exactly three wire requests
            assert ep._next_id - before == 3
            np.testing.assert_allclose(got, model.predict(x), atol=1e-12)

    def test_oversize_batch_rejected_at_endpoint(self, linear_setup):
        *_, path = linear_setup
        with AdapterEndpoint(stub_cmd("linear", path), timeout=10.0,
                             max_batch=2) as ep:
            with pytest.raises(ValidationError, match="max_batch"):
                ep.predict_batch(np.zeros((3, 12)))

    def test_wrong_input_length(self, served):
        _, _, ep = served
        pred = AdapterPredictor(ep, "classification")
        with pytest.raises(ValidationError, match="input_len"):
            pred.predict(np.zeros((2, 13)))

    def test_bad_output_index(self, served):
        _, _, ep = served
        pred = AdapterPredictor(ep, "classification")
        for c in (-1, 3):
            with pytest.raises(ValidationError):
                pred.input_gradient_batch(np.zeros((2, 12)), c)


class TestFailureHandling:
    def test_server_error_frame(self):
        with AdapterEndpoint(stub_cmd("error-op"), timeout=10.0) as ep:
            with pytest.raises(ProtocolError, match="deliberate failure"):
                ep.predict_batch(np.zeros((1, 30)))

    def test_malformed_reply(self):
        with AdapterEndpoint(stub_cmd("bad-json"), timeout=10.0) as ep:
            with pytest.raises(ProtocolError):
                ep.predict_batch(np.zeros((1, 30)))

    def test_id_from_the_future(self):
        with AdapterEndpoint(stub_cmd("wrong-id"), timeout=10.0) as ep:
            with pytest.raises(ProtocolError, match="id mismatch"):
                ep.predict_batch(np.zeros((1, 30)))

    def test_timeout_then_retry_discards_stale_reply(self, linear_setup):
        model, _, _, path = linear_setup
        with AdapterEndpoint(stub_cmd("stale-then-ok", path),
                             timeout=0.4) as ep:
            before = ep._next_id
            x = np.random.default_rng(9).normal(size=(2, 12))
            got = ep.predict_batch(x)
            assert ep._next_id - before == 2  # original attempt plus retry
            np.testing.assert_allclose(got, model.predict(x), atol=1e-12)

    def test_both_attempts_time_out(self):
        with AdapterEndpoint(stub_cmd("silent"), timeout=0.3) as ep:
            t0 = time.monotonic()
            with pytest.raises(TransportError, match="timed out"):
                ep.predict_batch(np.zeros((1, 30)))
            elapsed = time.monotonic() - t0
            assert 0.5 < elapsed < 5.0

    def test_dead_server_fails_fast(self):
        ep = AdapterEndpoint(stub_cmd("die"), timeout=10.0)
        try:
            ep.start()
            before = ep._next_id
            t0 = time.monotonic()
            with pytest.raises(TransportError):
                ep.predict_batch(np.zeros((1, 30)))
            # EOF is detected immediately, not after the 10s timeout, and
            # a dead server earns at most the single allowed retry
            assert time.monotonic() - t0 < 5.0
            assert ep._next_id - before <= 2
        finally:
            ep.close()

    def test_non_finite_outputs_rejected(self):
        with AdapterEndpoint(stub_cmd("non-finite"), timeout=10.0) as ep:
            with pytest.raises(ValidationError, match="non-finite"):
                ep.predict_batch(np.zeros((2, 30)))

    def test_wrong_width_rejected(self):
        with AdapterEndpoint(stub_cmd("wrong-shape"), timeout=10.0) as ep:
            with pytest.raises(ValidationError):
                ep.predict_batch(np.zeros((2, 30)))

    def test_unnormalized_probabilities_rejected(self, linear_setup):
        *_, path = linear_setup
        with AdapterEndpoint(stub_cmd("bad-probs", path), timeout=10.0) as ep:
            pred = AdapterPredictor(ep, "classification")
            with pytest.raises(ValidationError, match="sum"):
                pred.predict(np.random.default_rng(3).normal(size=(2, 12)))

    def test_missing_gradient_capability(self, linear_setup):
        *_, path = linear_setup
        with AdapterEndpoint(stub_cmd("no-gradient", path), timeout=10.0) as ep:
            pred = AdapterPredictor(ep, "classification")
            assert "input_gradient" not in pred.capabilities
            assert pred.predict(np.zeros((1, 12))).shape == (1, 3)
            with pytest.raises(CapabilityError):
                pred.input_gradient_batch(np.zeros((1, 12)), 0)


class TestRunnerIntegration:
    """A full benchmark run served over the wire matches the in-process run."""

    BASE = {
        "dataset": {"kind": "spike", "n_samples": 20, "series_len": 30,
                    "test_fraction": 0.3},
        "task": "classification",
        "methods": [{"id": "oracle"}, {"id": "saliency"},
                    {"id": "input_x_gradient"},
                    {"id": "integrated_gradients", "steps": 20}],
        "strategies": [{"id": "topk", "fraction": 0.05}],
        "verifications": [{"kind": "point_zero"},
                          {"kind": "interval_swap", "radius": 1}],
        "seed": 13,
    }

    def test_adapter_run_reproduces_in_process_run(self, tmp_path):
        native = dict(self.BASE, out=str(tmp_path / "runs"),
                      model={"kind": "linear", "epochs": 30,
                             "learning_rate": 0.05})
        res1 = execute_run(build_run_config(native))
        saved = sorted(Path(res1.run_dir, "models").glob("*.json"))
        assert len(saved) == 1

        adapted = dict(self.BASE, out=str(tmp_path / "runs"),
                       model={"kind": "adapter",
                              "command": stub_cmd("linear", saved[0]),
                              "timeout": 30})
        res2 = execute_run(build_run_config(adapted))
        assert res2.run_dir != res1.run_dir

        _, rep1 = load_run(res1.run_dir)
        _, rep2 = load_run(res2.run_dir)
        recs1, recs2 = rep1["records"], rep2["records"]
        assert len(recs1) == len(recs2) == 1 + 4 * 4 * 1 * 2
        for a, b in zip(recs1, recs2):
            for key in ("method", "strategy", "verification", "variant",
                        "metric"):
                assert a[key] == b[key]
            assert abs(a["value"] - b["value"]) <= 1e-9
            assert abs(a["delta"] - b["delta"]) <= 1e-9

        rank1 = [r["method"] for r in rep1["ranking"]]
        rank2 = [r["method"] for r in rep2["ranking"]]
        assert rank1 == rank2

    def test_length_mismatch_is_rejected_up_front(self, tmp_path,
                                                  linear_setup):
        *_, path = linear_setup  # serves input_len 12, dataset wants 30
        cfg = dict(self.BASE, out=str(tmp_path / "runs"),
                   model={"kind": "adapter",
                          "command": stub_cmd("linear", path)})
        with pytest.raises(ConfigError, match="input_len"):
            execute_run(build_run_config(cfg))
