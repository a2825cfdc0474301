import json
import math
import threading

import numpy as np
import pytest

from lcmarg.records import (
    EstimateWithCI, RunLog, binomial_se, child_rng, digest_array, inputs_digest, iter_jsonl, make_rng,
    parallel_map, power_mean, seed_of, wilson_interval,
)


class TestStreams:
    def test_child_streams_are_reproducible(self):
        a = child_rng(7, 3).standard_normal(5)
        b = child_rng(7, 3).standard_normal(5)
        assert np.array_equal(a, b)

    def test_children_differ(self):
        assert not np.array_equal(child_rng(7, 0).standard_normal(5), child_rng(7, 1).standard_normal(5))

    def test_make_rng_passthrough(self):
        g = np.random.default_rng(1)
        assert make_rng(g) is g

    def test_seed_of_child(self):
        assert seed_of(child_rng(9, 4)) == "9/4"

    @pytest.mark.parametrize("workers", [1, 2, 5])
    def test_parallel_map_keeps_order(self, workers):
        assert parallel_map(lambda x: x * x, list(range(20)), workers) == [x * x for x in range(20)]

    def test_parallel_map_uses_threads(self):
        seen = set()
        parallel_map(lambda _: seen.add(threading.get_ident()), range(8), 4)
        assert len(seen) >= 1


class TestIntervals:
    def test_binomial_se(self):
        assert binomial_se(0.5, 100) == pytest.approx(0.05)

    @pytest.mark.parametrize("k,n", [(0, 10), (5, 10), (10, 10), (3, 500)])
    def test_wilson_contains_phat(self, k, n):
        lo, hi = wilson_interval(k, n)
        assert 0 <= lo <= k / n <= hi <= 1

    def test_power_mean_of_constant(self):
        v, se = power_mean(np.full(100, 2.5), 3)
        assert v == pytest.approx(2.5)
        assert se == pytest.approx(0, abs=1e-12)

    def test_power_mean_geometric(self):
        x = np.array([1.0, 4.0])
        assert power_mean(x, 0)[0] == pytest.approx(2.0)

    def test_estimate_ci_and_record(self):
        e = EstimateWithCI(1.0, 0.1, 100, "0/1", "test")
        lo, hi = e.ci
        assert lo < 1 < hi
        assert e.pessimistic_upper == pytest.approx(1.2)
        rec = e.to_record()
        assert rec["value"] == 1.0 and rec["method"] == "test"


class TestLogging:
    def test_digest_is_rounding_stable(self):
        a = np.array([1.0, 2.0])
        assert digest_array(a) == digest_array(a + 1e-13)

    def test_inputs_digest_order_free(self):
        assert inputs_digest({"a": 1, "b": 2}) == inputs_digest({"b": 2, "a": 1})

    def test_runlog_roundtrip(self, tmp_path):
        log = RunLog(tmp_path / "log.jsonl")
        log.emit("x", {"n": 3}, EstimateWithCI(math.pi, 0.0, 1, "0/0", "exact"))
        log.emit("y", {"n": 4}, {"value": 2})
        recs = list(iter_jsonl(tmp_path / "log.jsonl"))
        assert [r["kind"] for r in recs] == ["x", "y"]
        assert recs[0]["value"] == math.pi
        assert json.loads((tmp_path / "log.jsonl").read_text().splitlines()[1])["inputs"] == {"n": 4}
