"""Brute-force Shapley oracles, shared by module and acceptance tests."""

import itertools
import math

import numpy as np


def shapley_exact_subsets(model, x, target):
    """Exact Shapley values by the subset-weight formula (2^n evaluations)."""
    n = x.size
    vals = {}
    for mask in range(1 << n):
        s = np.zeros_like(x)
        for i in range(n):
            if mask >> i & 1:
                s[i] = x[i]
        vals[mask] = float(model.logits(s[None, :])[0, target])
    fact = [math.factorial(k) for k in range(n + 1)]
    phi = np.zeros(n)
    for i in range(n):
        for mask in range(1 << n):
            if mask >> i & 1:
                continue
            k = bin(mask).count("1")
            phi[i] += fact[k] * fact[n - 1 - k] / fact[n] * \
                (vals[mask | (1 << i)] - vals[mask])
    return phi


def shapley_all_permutations(model, x, target):
    """Average marginal contribution over every permutation (n! sweeps)."""
    n = x.size
    phi = np.zeros(n)
    count = 0
    for order in itertools.permutations(range(n)):
        cur = np.zeros_like(x)
        prev = float(model.logits(cur[None, :])[0, target])
        for idx in order:
            cur[idx] = x[idx]
            now = float(model.logits(cur[None, :])[0, target])
            phi[idx] += now - prev
            prev = now
        count += 1
    return phi / count
