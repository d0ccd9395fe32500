import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gcph.errors import DataError, UndefinedMetricError
from gcph.metrics import (Horizon, brier_score, c_index, evaluate_at_horizons, kaplan_meier,
                          percentile_horizons)
from oracles import naive_c_index


class TestKaplanMeier:
    def test_hand_example(self):
        km = kaplan_meier([1.0, 2.0, 3.0], [1, 0, 1])
        np.testing.assert_allclose(km([1.0, 2.0, 3.0]), [2 / 3, 2 / 3, 0.0], atol=1e-15)

    def test_no_events(self):
        km = kaplan_meier([1.0, 2.0, 5.0], [0, 0, 0])
        np.testing.assert_array_equal(km(np.linspace(0, 10, 11)), 1.0)

    def test_empirical(self):
        n = 7
        km = kaplan_meier(np.arange(1.0, n + 1), np.ones(n, bool))
        np.testing.assert_allclose(km(np.arange(1.0, n + 1)), (n - np.arange(1, n + 1)) / n, atol=1e-15)

    def test_left_limit(self):
        km = kaplan_meier([1.0, 2.0, 3.0], [1, 0, 1])
        assert km.left(1.0) == 1.0
        assert km.left(3.0) == pytest.approx(2 / 3)
        assert km(0.5) == 1.0

    def test_double_flip(self, rng):
        t = rng.exponential(size=50) + 0.01
        e = rng.random(50) < 0.6
        a, b = kaplan_meier(t, e), kaplan_meier(t, ~~e)
        np.testing.assert_array_equal(a.times, b.times)
        np.testing.assert_array_equal(a.surv, b.surv)

    def test_non_increasing(self, rng):
        t = rng.integers(1, 20, size=100).astype(float)
        km = kaplan_meier(t, rng.random(100) < 0.5)
        assert np.all(np.diff(km.surv) <= 0) and km.surv[0] <= 1

    def test_empty(self):
        with pytest.raises(DataError):
            kaplan_meier([], [])


class TestCIndex:
    def test_perfect(self):
        assert c_index([1, 2, 3], [1, 1, 1], [3, 2, 1], 3.0) == 1.0

    def test_anti(self):
        assert c_index([1, 2, 3], [1, 1, 1], [1, 2, 3], 3.0) == 0.0

    def test_hand_example(self):
        assert c_index([1, 2, 3], [1, 1, 0], [2, 2, 1], Horizon(3.0, "p75")) == 0.75

    def test_no_pairs(self):
        with pytest.raises(UndefinedMetricError):
            c_index([1, 2], [0, 0], [1, 2])
        with pytest.raises(UndefinedMetricError):
            c_index([1, 2], [1, 1], [1, 2], horizon=0.5)

    def test_oracle_exact(self, rng):
        for k in range(100):
            n = int(rng.integers(2, 501)) if k % 10 == 0 else int(rng.integers(2, 60))
            times = rng.integers(1, max(2, n // 3), size=n).astype(float)
            events = rng.random(n) < 0.6
            scores = rng.integers(0, 10, size=n).astype(float)  # ties on purpose
            horizon = float(rng.choice(times)) if k % 2 else np.inf
            weighting = "event_sum" if k % 3 else "harrell"
            try:
                want = naive_c_index(times, events, scores, horizon, weighting)
            except ZeroDivisionError:
                with pytest.raises(UndefinedMetricError):
                    c_index(times, events, scores, horizon, weighting)
                continue
            assert c_index(times, events, scores, horizon, weighting) == want

    @settings(max_examples=100, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_complement(self, seed):
        rng = np.random.default_rng(seed)
        times = rng.exponential(size=40)
        events = rng.random(40) < 0.7
        events[0] = True
        times[0] = times.min() / 2
        s = rng.normal(size=40)
        assert abs(c_index(times, events, s) + c_index(times, events, -s) - 1) < 1e-12

    def test_rank_invariance(self, rng):
        times = rng.exponential(size=80)
        events = rng.random(80) < 0.7
        s = rng.normal(size=80)
        assert c_index(times, events, s) == c_index(times, events, np.exp(3 * s) + 1)

    def test_random_scores_near_half(self):
        rng = np.random.default_rng(7)
        times = rng.exponential(size=1000)
        events = rng.random(1000) >= 0.2
        assert 0.45 <= c_index(times, events, rng.normal(size=1000)) <= 0.55


class TestBrier:
    def test_perfect(self):
        g = kaplan_meier([3.0, 4.0], [0, 0])
        assert brier_score([3.0, 4.0], [1, 1], [1.0, 1.0], g, 2.5) == 0.0

    def test_constant_half(self):
        g = kaplan_meier([1.0, 2.0, 3.0, 4.0], [0, 0, 0, 0])
        assert brier_score([1.0, 2.0, 3.0, 4.0], [1, 1, 1, 1], [0.5] * 4, g, 2.5) == pytest.approx(0.25)

    def test_hand_example(self):
        times, events = [1.0, 2.0, 3.0, 4.0], [1, 0, 1, 0]
        g = kaplan_meier(times, [0, 1, 0, 1])
        # G(1-) = 1 and G(2.5) = 2/3; subject 2 is censored before the horizon
        want = (0.9**2 / 1 + (1 - 0.4) ** 2 / (2 / 3) + (1 - 0.3) ** 2 / (2 / 3)) / 4
        got = brier_score(times, events, [0.9, 0.8, 0.4, 0.3], g, 2.5)
        assert got == pytest.approx(want, abs=1e-14)
        assert got == pytest.approx(0.52125, abs=1e-12)

    def test_zero_censoring_survivor(self):
        g = kaplan_meier([1.0], [1])
        with pytest.raises(UndefinedMetricError):
            brier_score([2.0], [0], [0.5], g, 1.5)

    def test_minimised_near_event_fraction(self):
        rng = np.random.default_rng(3)
        times = rng.exponential(size=400)
        events = np.ones(400, bool)
        t = 0.7
        g = kaplan_meier(times, ~events)
        grid = np.linspace(0, 1, 201)
        scores = [brier_score(times, events, np.full(400, c), g, t) for c in grid]
        best = grid[int(np.argmin(scores))]
        assert abs(best - np.mean(times > t)) <= 0.005


class TestHorizons:
    def test_quartiles(self):
        assert [h.t for h in percentile_horizons([1, 2, 3, 4, 5])] == [2, 3, 4]
        assert [h.label for h in percentile_horizons([1, 2, 3])] == ["p25", "p50", "p75"]

    def test_single(self):
        assert [h.t for h in percentile_horizons([4.2])] == [4.2] * 3

    def test_uniform(self):
        u = np.random.default_rng(0).uniform(size=10000)
        np.testing.assert_allclose([h.t for h in percentile_horizons(u)], [0.25, 0.5, 0.75], atol=0.02)

    def test_empty(self):
        with pytest.raises(DataError):
            percentile_horizons([])


class TestEvaluate:
    def test_rows(self, rng):
        t = rng.exponential(size=200) + 0.01
        e = rng.random(200) < 0.8
        s = rng.normal(size=200)
        rows = evaluate_at_horizons(t[:150], e[:150], s[:150], t[150:], e[150:], s[150:])
        assert [r["horizon_label"] for r in rows] == ["p25", "p50", "p75"]
        for r in rows:
            assert 0 <= r["c_index"] <= 1 and r["brier"] >= 0
            assert r["c_index_untruncated"] == c_index(t[150:], e[150:], s[150:])
