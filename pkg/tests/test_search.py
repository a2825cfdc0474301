import math

import numpy as np
import pytest

from lcmarg.geometry import cube_body
from lcmarg.grassmann import Subspace, distance
from lcmarg.measures import builtin
from lcmarg.search import (
    SearchConfig, deviation_profile, marginal_L_sample, neighborhood_search, polytope_surrogate, sharpness_demo,
    stability_check, tail_slope,
)

E_LINE = Subspace.coordinate(8, [0])


class TestSearchConfig:
    def test_threshold(self):
        cfg = SearchConfig(epsilon=0.3)
        assert cfg.threshold(8, 1) == pytest.approx(10 / 0.3 ** (7 / 8))

    @pytest.mark.parametrize("kwargs", [{"epsilon": 0.0}, {"epsilon": 1.0}, {"epsilon": 0.3, "beta": 0.5},
                                        {"epsilon": 0.3, "metric": "chordal"},
                                        {"epsilon": 0.3, "L_method": "exact"}])
    def test_rejects(self, kwargs):
        with pytest.raises(ValueError):
            SearchConfig(**kwargs)


class TestNeighborhoodSearch:
    def test_accepts_and_is_consistent(self):
        res = neighborhood_search(builtin("cube", 8), E_LINE, SearchConfig(epsilon=0.3, seed=42))
        assert res.found and res.self_consistent()
        assert distance(E_LINE, res.accepted, "d") < 0.3

    def test_repeatable(self):
        cfg = SearchConfig(epsilon=0.3, seed=42)
        a = neighborhood_search(builtin("cube", 8), E_LINE, cfg)
        b = neighborhood_search(builtin("cube", 8), E_LINE, cfg)
        assert a.trials == b.trials
        assert a.accepted.to_text() == b.accepted.to_text()

    def test_impossible_threshold_exhausts(self):
        cfg = SearchConfig(epsilon=0.3, C=1e-6, max_trials=5, seed=1)
        res = neighborhood_search(builtin("cube", 8), E_LINE, cfg)
        assert not res.found and len(res.trials) == 5

    @pytest.mark.parametrize("workers", [1, 3])
    def test_best_of_budget_logs_every_trial(self, workers):
        cfg = SearchConfig(epsilon=0.3, seed=3, max_trials=6, best_of_budget=True, workers=workers)
        res = neighborhood_search(builtin("lp_ball", 8, 1), E_LINE, cfg)
        assert len(res.trials) == 6
        assert sum(t["accepted"] for t in res.trials) == 1

    def test_sigma_metric(self):
        res = neighborhood_search(builtin("cube", 8), E_LINE, SearchConfig(epsilon=0.3, metric="sigma_inf"))
        assert res.found and distance(E_LINE, res.accepted, "sigma_inf") < 0.3


class TestDeviationProfile:
    def test_tail_slope_power_law(self):
        ts = np.array([1.5, 2.0, 3.0])
        assert tail_slope(ts, ts ** -4.0, 10_000) == pytest.approx(-4.0)

    def test_tail_slope_needs_two_points(self):
        assert math.isnan(tail_slope([0.5, 2.0], [1.0, 0.1], 100))

    def test_profile_from_values(self):
        L = np.array([1.0, 1.0, 1.0, 2.0, 4.0])
        prof = deviation_profile(builtin("cube", 8), 1, [1.5, 3.0], 5, 0, L_values=L)
        assert [r["tail_fraction"] for r in prof.rows] == [0.4, 0.2]
        assert prof.csv_rows()[0].keys() >= {"t", "tail_fraction", "ci_low", "ci_high", "N_F"}

    def test_cube8_monotone(self):
        prof = deviation_profile(builtin("cube", 8), 1, [1.01, 1.25, 1.5, 2.0, 3.0], 100, 0)
        tails = [r["tail_fraction"] for r in prof.rows]
        assert tails == sorted(tails, reverse=True)
        assert all(r["ci_low"] <= r["tail_fraction"] <= r["ci_high"] for r in prof.rows)

    @pytest.mark.parametrize("workers", [1, 4])
    def test_sample_independent_of_workers(self, workers):
        ref = marginal_L_sample(builtin("cube", 8), 1, 12, 5)
        assert np.array_equal(marginal_L_sample(builtin("cube", 8), 1, 12, 5, workers=workers), ref)


class TestStability:
    @pytest.mark.parametrize("k", [1, 2])
    def test_cube_body(self, k):
        rep = stability_check(cube_body(4), k, 30, 0)
        assert rep["violations"] == 0
        assert rep["t"] == pytest.approx(2.0)

    def test_measure_with_L_rows(self):
        rep = stability_check(builtin("cube", 4), 2, 20, 1, N=20_000, M=100, L_pairs=5)
        assert rep["violations"] == 0 and rep["L_violations"] == 0
        assert len(rep["L_rows"]) == 5

    def test_k_limit(self):
        with pytest.raises(ValueError):
            stability_check(cube_body(6), 4, 1, 0)

    def test_surrogate_is_symmetric(self):
        P = polytope_surrogate(builtin("cube", 3), 2, 20_000, 60, 0)
        U = np.eye(3)
        assert np.allclose(P.support(U), P.support(-U))


class TestSharpness:
    def test_cube4_n8(self):
        rep = sharpness_demo(builtin("cube", 4), 0.5, 8, 0, N_F=10, N=20_000)
        assert rep["inequality_ok"] and rep["coordinate_matches_base"]
        assert rep["m"] == 4

    def test_lambda_mismatch(self):
        with pytest.raises(ValueError):
            sharpness_demo(builtin("cube", 4), 0.3, 8, 0)
