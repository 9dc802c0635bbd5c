"""Randomized selection-formula properties, shared with the acceptance gate."""

import numpy as np

from tsabench.attribution import AttributionMap, normalize
from tsabench.selection import (random_baselines, select_dynamic, select_fixed,
                                select_topk)


def _round_half_up(x):
    return int(np.floor(x + 0.5))


def run_selection_properties(n_maps: int, seed: int = 77) -> int:
    """Assert strategy contracts over random normalized maps.

    topk: exact cardinality max(1, round(0.05 n)) and dominance (every
    selected score >= every unselected score).  dynamic/fixed: membership is
    exactly the strict predicate against max - (max-mean)*0.1 and 0.8.
    Random baselines: sizes {k, round(1.1 k), round(0.9 k)}, in bounds,
    duplicate-free, deterministic.  Returns the number of maps exercised.
    """
    rng = np.random.default_rng(seed)
    for case in range(n_maps):
        n = int(rng.integers(4, 200))
        raw = rng.normal(size=n) * float(rng.uniform(0.5, 20.0))
        amap = normalize(AttributionMap(case, "m", raw, False, 0))
        scores = amap.scores

        top = select_topk(amap, 0.05)
        k = max(1, _round_half_up(0.05 * n))
        assert top.count == k, f"case {case}: k={top.count} want {k}"
        assert list(top.indices) == sorted(set(top.indices))
        chosen = np.zeros(n, dtype=bool)
        chosen[list(top.indices)] = True
        if k < n:
            assert scores[chosen].min() >= scores[~chosen].max(), f"case {case}"

        dyn = select_dynamic(amap)
        theta = float(scores.max() - (scores.max() - scores.mean()) * 0.1)
        expect = set(np.flatnonzero(scores > theta).tolist())
        assert set(dyn.indices) == expect, f"case {case} dynamic"

        fix = select_fixed(amap, 0.8)
        assert set(fix.indices) == set(np.flatnonzero(scores > 0.8).tolist()), \
            f"case {case} fixed"

        for sel in (top, dyn, fix):
            sets = random_baselines(sel, n, seed=13)
            sizes = [len(s.indices) for s in sets]
            want = [min(max(_round_half_up(scale * sel.count), 0), n)
                    for scale in (1.0, 1.1, 0.9)]
            assert sizes == want, f"case {case} {sel.strategy}: {sizes} != {want}"
            for s in sets:
                assert len(set(s.indices)) == len(s.indices)
                assert all(0 <= i < n for i in s.indices)
            again = random_baselines(sel, n, seed=13)
            assert [s.indices for s in sets] == [s.indices for s in again]
    return n_maps
