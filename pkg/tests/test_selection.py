"""Selection strategies and their random controls."""

import numpy as np
import pytest

from helpers.selection_props import run_selection_properties
from tsabench.attribution import AttributionMap
from tsabench.errors import ConfigError, ValidationError
from tsabench.selection import (load_selections, random_baselines,
                                save_selections, select, select_dynamic,
                                select_fixed, select_topk)


def nmap(scores, sample_id=0):
    return AttributionMap(sample_id, "m", np.asarray(scores, dtype=np.float64),
                          True, 0)


class TestTopk:
    def test_five_percent_of_100_is_5(self):
        amap = nmap(np.linspace(0.0, 1.0, 100))
        assert select_topk(amap, 0.05).count == 5

    def test_hand_example(self):
        sel = select_topk(nmap([0.9, 0.1, 0.8, 0.2]), 0.5)
        assert sel.indices == (0, 2)

    def test_ties_break_to_smaller_index(self):
        sel = select_topk(nmap([0.5, 0.5, 0.5, 0.5]), 0.5)
        assert sel.indices == (0, 1)

    def test_k_clamped_to_at_least_one(self):
        # 0.05 * 5 = 0.25 rounds to 0, clamped up
        sel = select_topk(nmap([0.1, 0.9, 0.2, 0.3, 0.4]), 0.05)
        assert sel.indices == (1,)

    def test_rounding_is_half_up(self):
        assert select_topk(nmap(np.linspace(0, 1, 10)), 0.05).count == 1  # 0.5 -> 1
        assert select_topk(nmap(np.linspace(0, 1, 30)), 0.05).count == 2  # 1.5 -> 2

    def test_permutation_equivariance(self, rng):
        scores = rng.permutation(np.linspace(0.0, 1.0, 40))
        perm = rng.permutation(40)
        base = set(select_topk(nmap(scores), 0.1).indices)
        moved = set(select_topk(nmap(scores[perm]), 0.1).indices)
        # position j in the permuted map holds old index perm[j]
        assert {int(perm[j]) for j in moved} == base

    def test_requires_normalized_map(self):
        raw = AttributionMap(0, "m", np.array([1.0, -2.0]), False, 0)
        with pytest.raises(ValidationError, match="normalized"):
            select_topk(raw)

    def test_bad_fraction_rejected(self):
        with pytest.raises(ConfigError):
            select_topk(nmap([0.1, 0.2]), 0.0)


class TestDynamicThreshold:
    def test_hand_example(self):
        """[0, 0.5, 1] -> theta = 1 - 0.5*0.1 = 0.95, so only index 2."""
        assert select_dynamic(nmap([0.0, 0.5, 1.0])).indices == (2,)

    def test_constant_map_selects_nothing(self):
        assert select_dynamic(nmap([0.0, 0.0, 0.0])).indices == ()
        assert select_dynamic(nmap([1.0, 1.0])).indices == ()

    def test_single_point_map_is_degenerate(self):
        # max == mean forces theta == max, and strict > excludes it
        assert select_dynamic(nmap([1.0])).indices == ()


class TestFixedThreshold:
    def test_strict_comparison(self):
        assert select_fixed(nmap([0.79, 0.80, 0.81]), 0.8).indices == (2,)

    def test_threshold_one_selects_nothing(self):
        assert select_fixed(nmap([1.0, 0.5, 1.0]), 1.0).indices == ()

    def test_monotone_in_threshold(self, rng):
        amap = nmap(rng.random(50))
        lo = set(select_fixed(amap, 0.3).indices)
        hi = set(select_fixed(amap, 0.7).indices)
        assert hi <= lo

    def test_threshold_range_validated(self):
        with pytest.raises(ConfigError):
            select_fixed(nmap([0.5]), -1.0)
        with pytest.raises(ConfigError):
            select_fixed(nmap([0.5]), 1.5)


class TestDispatch:
    def test_by_name(self):
        amap = nmap([0.0, 1.0])
        assert select(amap, "topk", fraction=0.5).indices == (1,)
        assert select(amap, "dynamic_threshold").indices == (1,)
        assert select(amap, "fixed_threshold", threshold=0.8).indices == (1,)

    def test_unknown_strategy(self):
        with pytest.raises(ConfigError):
            select(nmap([0.5]), "bottomk")


class TestRandomBaselines:
    def test_sizes_ten_percent_each_way(self):
        sel = select_topk(nmap(np.linspace(0, 1, 100)), 0.1)  # count 10
        sizes = {s.variant: len(s.indices) for s in random_baselines(sel, 100, 13)}
        assert sizes == {"matched": 10, "plus10": 11, "minus10": 9}

    def test_empty_selection_gives_empty_baselines(self):
        sel = select_dynamic(nmap([0.5, 0.5]))
        assert all(s.indices == () for s in random_baselines(sel, 2, 13))

    def test_deterministic_and_seed_sensitive(self):
        sel = select_topk(nmap(np.linspace(0, 1, 60)), 0.2)
        a = random_baselines(sel, 60, 13)
        b = random_baselines(sel, 60, 13)
        c = random_baselines(sel, 60, 14)
        assert [s.indices for s in a] == [s.indices for s in b]
        assert [s.indices for s in a] != [s.indices for s in c]

    def test_streams_differ_per_strategy(self):
        scores = np.linspace(0, 1, 60)
        t = select_topk(nmap(scores), 0.2)
        f = select_fixed(nmap(scores), 0.5)
        rt = random_baselines(t, 60, 13)[0]
        rf = random_baselines(f, 60, 13)[0]
        assert rt.indices != rf.indices  # different derived streams


class TestAuditExport:
    def test_round_trip(self, tmp_path):
        sels = [select_topk(nmap(np.linspace(0, 1, 20), sample_id=i), 0.2)
                for i in range(3)]
        sels.append(select_dynamic(nmap([0.5, 0.5], sample_id=3)))  # empty
        path = tmp_path / "selections.csv"
        save_selections(path, sels)
        back = load_selections(path)
        assert [(s.sample_id, s.strategy, s.indices) for s in back] == \
               [(s.sample_id, s.strategy, s.indices) for s in sels]

    def test_rejects_other_files(self, tmp_path):
        p = tmp_path / "x.csv"
        p.write_text("a,b\n")
        with pytest.raises(ValidationError):
            load_selections(p)


class TestPropertySuite:
    def test_thousand_random_maps(self):
        assert run_selection_properties(1000, seed=77) == 1000
