"""Client for external model servers speaking newline-delimited JSON on stdio.

The harness launches the server as a child process and exchanges one frame
per line: {"op":"info"} for the handshake, then predict/gradient requests
with strictly increasing ids and exactly one request in flight.  A timeout
produces one retry under a fresh id before failing; stale responses from a
timed-out request are discarded by id.  ``AdapterPredictor`` wraps an
endpoint in the same predictor surface the built-in models expose, so every
downstream module works unchanged.

Classification servers return probabilities.  The wrapper derives logits as
log(p), which preserves argmax and gradients of log-probability ratios but
differs from true pre-softmax logits by a per-sample constant; score-based
attribution methods over an adapter are therefore approximations, while
gradient-based methods are exact.
"""

from __future__ import annotations

import json
import os
import select
import subprocess
import sys
import time

import numpy as np

from .dataset import CLASSIFICATION
from .errors import (CapabilityError, ConfigError, ProtocolError,
                     TransportError, ValidationError)

PROTOCOL_VERSION = 1
DEFAULT_TIMEOUT = 60.0
MAX_BATCH = 256

_PROB_TOL = 1e-6


class AdapterEndpoint:
    """Exclusive-access connection to one server process.

    One request in flight at a time; not safe to share across threads.
    """

    def __init__(self, command, timeout: float = DEFAULT_TIMEOUT,
                 max_batch: int = MAX_BATCH):
        if isinstance(command, str):
            command = [command]
        if not command:
            raise ConfigError("adapter needs a non-empty launch command")
        if timeout <= 0 or max_batch < 1:
            raise ConfigError("timeout must be > 0 and max_batch >= 1")
        self.command = list(command)
        self.timeout = timeout
        self.max_batch = max_batch
        self.proc = None
        self.descriptor = None
        self._next_id = 1
        self._buffer = b""

    # -- lifecycle ----------------------------------------------------------

    def start(self) -> dict:
        if self.proc is not None:
            raise ProtocolError("endpoint already started")
        try:
            self.proc = subprocess.Popen(
                self.command, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                stderr=sys.stderr.fileno() if hasattr(sys.stderr, "fileno") else None,
            )
        except OSError as exc:
            raise TransportError(f"cannot launch {self.command[0]!r}: {exc}") from exc
        return self.handshake()

    def close(self) -> None:
        if self.proc is None:
            return
        if self.proc.poll() is None:
            try:
                self._send({"op": "shutdown"})
                self.proc.stdin.close()
                self.proc.wait(timeout=5.0)
            except (TransportError, OSError, subprocess.TimeoutExpired):
                self.proc.kill()
                self.proc.wait()
        self.proc = None

    def __enter__(self):
        self.start()
        return self

    def __exit__(self, *exc):
        self.close()
        return False

    # -- framing ------------------------------------------------------------

    def _send(self, frame: dict) -> None:
        if self.proc is None or self.proc.poll() is not None:
            raise TransportError(f"server {self.command[0]!r} is not running")
        data = json.dumps(frame, separators=(",", ":")) + "\n"
        try:
            self.proc.stdin.write(data.encode("utf-8"))
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise TransportError(
                f"server {self.command[0]!r} closed its input: {exc}"
            ) from exc

    def _read_line(self, deadline: float) -> bytes:
        fd = self.proc.stdout.fileno()
        while True:
            nl = self._buffer.find(b"\n")
            if nl >= 0:
                line, self._buffer = self._buffer[:nl], self._buffer[nl + 1 :]
                return line
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise TransportError(
                    f"timed out after {self.timeout:g}s waiting for "
                    f"{self.command[0]!r}"
                )
            ready, _, _ = select.select([fd], [], [], remaining)
            if not ready:
                continue
            chunk = os.read(fd, 65536)
            if not chunk:
                code = self.proc.poll()
                raise TransportError(
                    f"server {self.command[0]!r} closed its output"
                    + (f" (exit code {code})" if code is not None else "")
                )
            self._buffer += chunk

    def _read_frame(self, deadline: float) -> dict:
        line = self._read_line(deadline)
        try:
            frame = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(
                f"malformed frame from {self.command[0]!r}: {line[:200]!r}"
            ) from exc
        if not isinstance(frame, dict):
            raise ProtocolError(f"frame is not an object: {line[:200]!r}")
        return frame

    def _request(self, frame: dict) -> dict:
        """Send one id-tagged request; one retry under a fresh id on timeout."""
        last_exc = None
        for _ in range(2):
            req_id = self._next_id
            self._next_id += 1
            self._send({**frame, "id": req_id})
            deadline = time.monotonic() + self.timeout
            try:
                while True:
                    reply = self._read_frame(deadline)
                    got = reply.get("id")
                    if got == req_id:
                        if "error" in reply:
                            raise ProtocolError(
                                f"server error for op {frame['op']!r}: {reply['error']}"
                            )
                        return reply
                    if isinstance(got, int) and got < req_id:
                        continue  # stale answer to a timed-out request
                    raise ProtocolError(
                        f"id mismatch: sent {req_id}, received {got!r}"
                    )
            except TransportError as exc:
                last_exc = exc
                if self.proc.poll() is not None:
                    break  # dead server: retrying cannot help
        raise last_exc

    # -- operations ---------------------------------------------------------

    def handshake(self) -> dict:
        reply = self._request({"op": "info"})
        for field in ("protocol", "n_outputs", "input_len", "capabilities"):
            if field not in reply:
                raise ProtocolError(f"info reply missing {field!r}: {reply}")
        if reply["protocol"] != PROTOCOL_VERSION:
            raise ProtocolError(
                f"protocol version mismatch: server speaks {reply['protocol']}, "
                f"client speaks {PROTOCOL_VERSION}"
            )
        caps = set(reply["capabilities"])
        unknown = caps - {"predict", "gradient"}
        if unknown:
            raise ProtocolError(f"unknown capabilities declared: {sorted(unknown)}")
        if "predict" not in caps:
            raise ProtocolError("server must declare the predict capability")
        if not (isinstance(reply["n_outputs"], int) and reply["n_outputs"] >= 1):
            raise ProtocolError(f"bad n_outputs {reply['n_outputs']!r}")
        if not (isinstance(reply["input_len"], int) and reply["input_len"] >= 1):
            raise ProtocolError(f"bad input_len {reply['input_len']!r}")
        self.descriptor = {
            "protocol": reply["protocol"],
            "n_outputs": reply["n_outputs"],
            "input_len": reply["input_len"],
            "capabilities": frozenset(caps),
        }
        return self.descriptor

    def _require_hands_shaken(self):
        if self.descriptor is None:
            raise ProtocolError("handshake has not completed")

    def _check_matrix(self, rows, n_rows: int, width: int, what: str) -> np.ndarray:
        arr = np.asarray(rows, dtype=np.float64)
        if arr.size == 0:
            arr = arr.reshape(0, width)
        if arr.ndim != 2 or arr.shape != (n_rows, width):
            raise ValidationError(
                f"{what}: expected shape {(n_rows, width)}, got {arr.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise ValidationError(f"{what}: non-finite value from server")
        return arr

    def predict_batch(self, batch: np.ndarray) -> np.ndarray:
        self._require_hands_shaken()
        batch = np.asarray(batch, dtype=np.float64)
        if batch.ndim != 2 or batch.shape[1] != self.descriptor["input_len"]:
            raise ValidationError(
                f"batch shape {batch.shape} does not match input_len "
                f"{self.descriptor['input_len']}"
            )
        if batch.shape[0] > self.max_batch:
            raise ValidationError(
                f"batch of {batch.shape[0]} exceeds max_batch {self.max_batch}"
            )
        reply = self._request({"op": "predict", "inputs": batch.tolist()})
        if "outputs" not in reply:
            raise ProtocolError(f"predict reply missing 'outputs': {reply}")
        return self._check_matrix(reply["outputs"], batch.shape[0],
                                  self.descriptor["n_outputs"], "predict outputs")

    def gradient_batch(self, batch: np.ndarray, output_index: int) -> np.ndarray:
        self._require_hands_shaken()
        if "gradient" not in self.descriptor["capabilities"]:
            raise CapabilityError(
                f"server {self.command[0]!r} does not declare the gradient capability"
            )
        batch = np.asarray(batch, dtype=np.float64)
        if batch.ndim != 2 or batch.shape[1] != self.descriptor["input_len"]:
            raise ValidationError(
                f"batch shape {batch.shape} does not match input_len "
                f"{self.descriptor['input_len']}"
            )
        if not (0 <= output_index < self.descriptor["n_outputs"]):
            raise ValidationError(
                f"output_index {output_index} out of range "
                f"[0, {self.descriptor['n_outputs']})"
            )
        reply = self._request({"op": "gradient", "output_index": int(output_index),
                               "inputs": batch.tolist()})
        if "gradients" not in reply:
            raise ProtocolError(f"gradient reply missing 'gradients': {reply}")
        return self._check_matrix(reply["gradients"], batch.shape[0],
                                  self.descriptor["input_len"], "gradients")


class AdapterPredictor:
    """Predictor surface over an adapter endpoint.

    Interchangeable with the built-in models everywhere downstream; batches
    larger than the endpoint's max batch are chunked transparently.
    """

    def __init__(self, endpoint: AdapterEndpoint, task: str,
                 model_id: str = "adapter"):
        if endpoint.descriptor is None:
            endpoint.start()
        self.endpoint = endpoint
        self.task = task
        self.model_id = model_id
        self.input_len = endpoint.descriptor["input_len"]
        self.n_outputs = endpoint.descriptor["n_outputs"]
        caps = {"predict"}
        if "gradient" in endpoint.descriptor["capabilities"]:
            caps.add("input_gradient")
        self.capabilities = frozenset(caps)
        if task == CLASSIFICATION and self.n_outputs < 2:
            raise ConfigError(
                f"classification needs n_outputs >= 2, server declares "
                f"{self.n_outputs}"
            )

    def _as_batch(self, batch) -> np.ndarray:
        x = np.asarray(batch, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.input_len:
            raise ValidationError(
                f"batch shape {x.shape} does not match input_len {self.input_len}"
            )
        return x

    def _chunked(self, x: np.ndarray, call) -> np.ndarray:
        if x.shape[0] <= self.endpoint.max_batch:
            return call(x)
        parts = [call(x[i : i + self.endpoint.max_batch])
                 for i in range(0, x.shape[0], self.endpoint.max_batch)]
        return np.concatenate(parts, axis=0)

    def predict(self, batch) -> np.ndarray:
        x = self._as_batch(batch)
        out = self._chunked(x, self.endpoint.predict_batch)
        if self.task == CLASSIFICATION and out.shape[0]:
            sums = out.sum(axis=1)
            if np.any(np.abs(sums - 1.0) > _PROB_TOL) or np.any(out < -_PROB_TOL):
                raise ValidationError(
                    "classification outputs are not probability vectors "
                    f"(row sums {sums.min():.9f}..{sums.max():.9f})"
                )
        return out

    def predict_classes(self, batch) -> np.ndarray:
        if self.task != CLASSIFICATION:
            raise CapabilityError("predict_classes is classification-only")
        return np.argmax(self.predict(batch), axis=1)

    def logits(self, batch) -> np.ndarray:
        out = self.predict(batch)
        if self.task != CLASSIFICATION:
            return out
        # log of probabilities: argmax-faithful, offset from true logits by a
        # per-sample constant
        return np.log(np.clip(out, 1e-300, None))

    def input_gradient(self, sample, output_index: int) -> np.ndarray:
        return self.input_gradient_batch(np.asarray(sample)[None, :], output_index)[0]

    def input_gradient_batch(self, batch, output_index: int) -> np.ndarray:
        if "input_gradient" not in self.capabilities:
            raise CapabilityError(
                "gradient capability not declared by the server"
            )
        x = self._as_batch(batch)
        return self._chunked(
            x, lambda part: self.endpoint.gradient_batch(part, output_index)
        )

    def close(self) -> None:
        self.endpoint.close()
