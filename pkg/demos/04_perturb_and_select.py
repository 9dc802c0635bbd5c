"""Selection strategies and verification methods, the evaluation's two dials."""

import numpy as np

from tsabench import (VerificationMethod, integrated_gradients, normalize,
                      perturb_points, random_baselines, reference_range,
                      select, TrainConfig, generate_spike_dataset,
                      split_dataset, train_ensemble)

data, _ = generate_spike_dataset(n_samples=80, series_len=50, seed=13)
train_set, test_set = split_dataset(data, test_fraction=0.25)
model = train_ensemble(train_set, TrainConfig(
    kind="mlp", hidden=(24,), activation="tanh", epochs=40, seed=13))[0]

x = test_set.samples[0].values
amap = normalize(integrated_gradients(model, x, steps=50))

# Three ways of turning a normalized map into "the relevant time points":
# top 5% of positions, a dynamic threshold tied to the map's max and mean,
# and a fixed threshold at 0.8.
for strategy in ("topk", "dynamic_threshold", "fixed_threshold"):
    sel = select(amap, strategy)
    print(f"{strategy:<18} -> {len(sel.indices):2d} points {list(sel.indices)}")

# Matched random baselines: same cardinality (and +-10%) as the selection,
# drawn from a seeded stream keyed by sample, strategy, and scale.
sel = select(amap, "topk")
for rb in random_baselines(sel, series_len=len(x), seed=13):
    print(f"random {rb.variant:<10} -> {len(rb.indices):2d} points {list(rb.indices)}")

# Verification methods perturb exactly the selected points. Point modes
# touch single positions; interval modes act on a radius around them.
# The inverse mode reflects across a symmetric per-sample range, so it
# needs the sample's reference range.
ref = reference_range(x)
print(f"\noriginal values at selection: "
      f"{np.round(x[list(sel.indices)], 2).tolist()}")
for mode in ("zero", "inverse", "series_mean"):
    z = perturb_points(x, sel.indices, mode, ref)
    print(f"point {mode:<12} -> {np.round(z[list(sel.indices)], 2).tolist()} "
          f"(elsewhere untouched: {np.array_equal(np.delete(z, sel.indices), np.delete(x, sel.indices))})")

# The same thing via the VerificationMethod wrapper the runner uses; the
# interval radius defaults to 2.5% of the length (at least 1).
vm = VerificationMethod(kind="interval_swap", radius=2)
swapped = vm.apply(x, sel.indices, ref)
changed = np.flatnonzero(swapped != x)
print(f"\n{vm.kind} r={vm.radius}: {changed.size} positions touched "
      f"({changed.tolist()})")
print(f"multiset preserved -> {np.array_equal(np.sort(swapped), np.sort(x))}")
