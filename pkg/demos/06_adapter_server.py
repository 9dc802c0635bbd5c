"""Benchmarking a model served by an external process.

The harness talks to foreign models over a newline-delimited JSON protocol
on stdin/stdout (see docs/protocol.md). This demo drives the bundled
reference server in server-ts/ and shows that its linear demo model scores
identically to the in-process one.
"""

import shutil
import sys
from pathlib import Path

from tsabench import AdapterEndpoint, AdapterPredictor, build_run_config, execute_run

repo = Path(__file__).resolve().parent.parent
serve_linear = repo / "server-ts" / "dist" / "serve_linear.js"
if shutil.which("node") is None or not serve_linear.exists():
    sys.exit("needs node and the built server-ts package (npm run build)")

base = {
    "dataset": {"kind": "spike", "n_samples": 40, "series_len": 30,
                "test_fraction": 0.3},
    "task": "classification",
    "methods": [{"id": "oracle"}, {"id": "saliency"},
                {"id": "integrated_gradients", "steps": 25}],
    "strategies": [{"id": "topk", "fraction": 0.05}],
    "verifications": [{"kind": "point_zero"},
                      {"kind": "interval_swap", "radius": 1}],
    "seed": 13,
    "out": "runs/demo",
}

# First a normal in-process run with a linear model; the runner saves the
# trained weights in the harness's JSON model format.
native = execute_run(build_run_config(dict(
    base, model={"kind": "linear", "epochs": 40, "learning_rate": 0.05})))
model_file = next(Path(native.run_dir, "models").glob("*.json"))

# Poke the server directly: handshake, one prediction, one gradient.
command = ["node", str(serve_linear), str(model_file)]
with AdapterEndpoint(command, timeout=30.0) as ep:
    print(f"\nserver descriptor: {ep.descriptor}")
    pred = AdapterPredictor(ep, "classification")
    probs = pred.predict([[0.0] * 30])
    print(f"predict over the wire: {probs.round(4).tolist()}")
    g = pred.input_gradient([0.0] * 30, output_index=1)
    print(f"gradient over the wire: first weights {g[:4].round(4).tolist()}")

# Now the same benchmark with the model served externally. Only the model
# section changes; dataset, methods, seeds all stay as they were.
adapted = execute_run(build_run_config(dict(
    base, model={"kind": "adapter", "command": command, "timeout": 60})))

print("\nmethod (degradation)          in-process     adapter")
for a, b in zip(native.report.ranking, adapted.report.ranking):
    print(f"{a.method_id:<28}{a.degradation:+12.4f}{b.degradation:+12.4f}")

same = all(abs(a.degradation - b.degradation) <= 1e-9
           for a, b in zip(native.report.ranking, adapted.report.ranking))
print(f"\nadapter run reproduces the in-process run -> {same}")
