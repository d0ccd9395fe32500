import math
from dataclasses import replace

import numpy as np
import pytest

from gcph.cox import build_risk_index, log_partial_likelihood, log_partial_likelihood_grad
from gcph.datasets import SyntheticConfig, generate_synthetic
from gcph.errors import ConfigurationError, DataError, InputError, NumericalError
from gcph.kan import (GcphModel, activation_outputs, dumps_model, flatten_params, log_risk_batch,
                      log_risk_grad_batch, param_slices, unflatten_params)
from gcph.spline import Activation, KnotGrid, basis_fn
from gcph.trainer import (RegConfig, TrainConfig, _Objective, entropy_loss, init_model,
                          l1_norm_per_activation, linear_model, linear_slopes, total_loss,
                          total_loss_grad, train, train_multi_seed)
from oracles import central_difference
from conftest import random_model


def zero_model(V=2):
    g = KnotGrid(-2.0, 2.0, 5, 3)
    return GcphModel(tuple(Activation(0.0, 0.0, np.zeros(8), g) for _ in range(V)),
                     tuple(f"x{v + 1}" for v in range(V)))


def instance(rng, n=30, V=2):
    X = rng.normal(size=(n, V))
    time = rng.exponential(size=n) + 0.01
    event = rng.random(n) < 0.7
    event[0] = True
    return X, build_risk_index(time, event)


class TestConfigs:
    @pytest.mark.parametrize("kw", [{"mu1": -1}, {"mu2": np.nan}, {"gamma": np.inf}])
    def test_reg(self, kw):
        with pytest.raises(ConfigurationError):
            RegConfig(**kw)

    @pytest.mark.parametrize("kw", [{"learning_rate": 0}, {"max_steps": 0}, {"seed": -1},
                                    {"init_coeff_sd": -0.1}, {"num_intervals": 0}])
    def test_train(self, kw):
        with pytest.raises(ConfigurationError):
            train(generate_synthetic(SyntheticConfig("linear", n=20)), TrainConfig(**kw))

    def test_defaults(self):
        r, t = RegConfig(), TrainConfig()
        assert (r.mu1, r.mu2, r.gamma) == (1.0, 10.0, 0.1)
        assert (t.num_intervals, t.order, t.learning_rate, t.max_steps) == (5, 3, 0.01, 2000)


class TestL1:
    def test_zero(self, rng):
        np.testing.assert_array_equal(l1_norm_per_activation(zero_model(), rng.normal(size=(5, 2))), 0.0)

    def test_constant(self, rng):
        m = GcphModel((Activation(0.0, 1.0, np.full(8, 2.0), KnotGrid(-3.0, 3.0, 5, 3)),), ("a",))
        np.testing.assert_allclose(l1_norm_per_activation(m, rng.uniform(-3, 3, size=(9, 1))), [2.0])

    def test_loop(self, rng):
        m = random_model(rng, V=2)
        X = rng.normal(size=(7, 2))
        from gcph.spline import activation_eval
        want = [sum(abs(activation_eval(m.activations[v], X[i, v])) for i in range(7)) / 7 for v in range(2)]
        np.testing.assert_allclose(l1_norm_per_activation(m, X), want, atol=1e-12)

    def test_empty(self):
        with pytest.raises(InputError):
            l1_norm_per_activation(zero_model(), np.zeros((0, 2)))


class TestEntropy:
    def test_uniform(self):
        assert entropy_loss([0.3] * 4) == pytest.approx(math.log(4), abs=1e-15)
        assert entropy_loss([0.3] * 4) == pytest.approx(1.386294, abs=1e-6)

    def test_degenerate(self):
        assert entropy_loss([0.0, 2.0, 0.0]) == 0.0
        assert entropy_loss([0.0, 0.0]) == 0.0

    def test_example(self):
        assert entropy_loss([1.0, 3.0]) == pytest.approx(-(0.25 * math.log(0.25) + 0.75 * math.log(0.75)))
        assert entropy_loss([1.0, 3.0]) == pytest.approx(0.562335, abs=1e-6)

    def test_negative(self):
        with pytest.raises(InputError):
            entropy_loss([-1.0, 1.0])


class TestTotalLoss:
    def test_no_regularization(self, rng):
        m = random_model(rng)
        X, idx = instance(rng)
        loss, _ = total_loss(m, X, idx, RegConfig(gamma=0.0))
        assert loss == -log_partial_likelihood(log_risk_batch(m, X), idx)

    def test_zero_model(self):
        idx = build_risk_index([1.0, 2.0, 3.0], [1, 1, 1])
        loss, parts = total_loss(zero_model(), np.zeros((3, 2)), idx, RegConfig())
        assert parts == {"nll": pytest.approx(math.log(6)), "l1": 0.0, "entropy": 0.0}
        assert loss == pytest.approx(math.log(6), abs=1e-15)

    def test_composition(self, rng):
        m = random_model(rng, V=3)
        X, idx = instance(rng, V=3)
        cfg = RegConfig(0.7, 3.0, 0.2)
        loss, parts = total_loss(m, X, idx, cfg)
        l1s = np.abs(activation_outputs(m, X)).mean(axis=0)
        p = l1s / l1s.sum()
        nll = -log_partial_likelihood(log_risk_batch(m, X), idx)
        want = nll + 0.2 * (0.7 * l1s.sum() + 3.0 * -np.sum(p * np.log(p)))
        assert abs(loss - want) < 1e-12

    def test_gauge_invariance(self, rng):
        m = random_model(rng, V=2)
        X, idx = instance(rng)
        X = np.clip(X, -1.4, 1.4)  # partition of unity holds inside the grid
        a0 = m.activations[0]
        # a constant added to one activation through its spline weights
        shifted = replace(a0, coeffs=a0.coeffs + 0.5 / a0.omega_s)
        m2 = replace(m, activations=(shifted, m.activations[1]))
        _, p1 = total_loss(m, X, idx, RegConfig())
        _, p2 = total_loss(m2, X, idx, RegConfig())
        assert abs(p1["nll"] - p2["nll"]) < 1e-10
        assert p1["l1"] != p2["l1"]


def away_from_kinks(rng, V=2, n=25):
    while True:
        m = random_model(rng, V=V)
        X, idx = instance(rng, n=n, V=V)
        if np.min(np.abs(activation_outputs(m, X))) > 1e-3:
            return m, X, idx


class TestGradient:
    def test_finite_differences(self, rng):
        cfg = RegConfig(1.0, 10.0, 0.1)
        for _ in range(20):
            m, X, idx = away_from_kinks(rng)
            fd = central_difference(lambda th: total_loss(unflatten_params(m, th), X, idx, cfg)[0],
                                    flatten_params(m), h=1e-6)
            np.testing.assert_allclose(total_loss_grad(m, X, idx, cfg), fd, rtol=1e-3, atol=1e-6)

    def test_no_regularization(self, rng):
        m = random_model(rng)
        X, idx = instance(rng)
        want = -log_risk_grad_batch(m, X).T @ log_partial_likelihood_grad(log_risk_batch(m, X), idx)
        np.testing.assert_allclose(total_loss_grad(m, X, idx, RegConfig(gamma=0)), want, atol=1e-14)

    def test_zero_model_omega_b(self, rng):
        X, idx = instance(rng)
        m = zero_model()
        g = log_partial_likelihood_grad(np.zeros(X.shape[0]), idx)
        grad = total_loss_grad(m, X, idx, RegConfig())
        for v, sl in enumerate(param_slices(m)):
            assert grad[sl.start] == pytest.approx(-g @ basis_fn(X[:, v]), abs=1e-12)

    def test_cached_objective_agrees(self, rng):
        cfg = RegConfig(1.0, 10.0, 0.1)
        m, X, idx = away_from_kinks(rng, V=3)
        loss, _, grad = _Objective(m, X, idx, cfg)(flatten_params(m))
        assert loss == pytest.approx(total_loss(m, X, idx, cfg)[0], abs=1e-10)
        np.testing.assert_allclose(grad, total_loss_grad(m, X, idx, cfg), atol=1e-10)


@pytest.fixture(scope="module")
def linear_data():
    return generate_synthetic(SyntheticConfig("linear", n=2000, seed=42))


@pytest.fixture(scope="module")
def nonlinear_data():
    return generate_synthetic(SyntheticConfig("nonlinear", n=2000, seed=42))


class TestTrain:
    def test_init(self, rng):
        X = rng.normal(size=(20, 2))
        m = init_model(X, TrainConfig(seed=3))
        assert all(a.omega_b == 1.0 and a.omega_s == 1.0 for a in m.activations)
        c = np.concatenate([a.coeffs for a in m.activations])
        assert 0.01 < c.std() < 0.3
        assert init_model(X, TrainConfig(seed=3)) == m

    def test_loss_decreases(self, linear_data):
        m, log = train(linear_data, TrainConfig(max_steps=200))
        assert log.best_loss <= log.initial_loss
        assert len(log.rows) == 201

    def test_centering(self, linear_data):
        m, _ = train(linear_data, TrainConfig(max_steps=20))
        assert abs(np.mean(log_risk_batch(m, linear_data.X))) < 1e-12

    def test_one_step_deterministic(self, linear_data):
        a, la = train(linear_data, TrainConfig(max_steps=1, seed=9))
        b, lb = train(linear_data, TrainConfig(max_steps=1, seed=9))
        assert dumps_model(a) == dumps_model(b)
        assert la.to_csv() == lb.to_csv()

    def test_log_csv(self, linear_data):
        _, log = train(linear_data, TrainConfig(max_steps=3))
        lines = log.to_csv().splitlines()
        assert lines[0] == "step,nll,l1,entropy,total"
        assert len(lines) == 5

    def test_no_events(self, linear_data):
        sub = replace(linear_data, event=np.zeros(len(linear_data), bool))
        with pytest.raises(DataError):
            train(sub, TrainConfig(max_steps=2))

    def test_too_few(self):
        from gcph.cox import SurvivalRecord
        with pytest.raises(DataError):
            train([SurvivalRecord(np.zeros(1), 1.0, True)], TrainConfig(max_steps=2))

    def test_nan_aborts(self, linear_data):
        with pytest.raises(NumericalError):
            train(linear_data, TrainConfig(max_steps=50, learning_rate=1e300))

    def test_records_input(self, linear_data):
        recs = linear_data.subset(np.arange(50)).records
        m, _ = train(recs, TrainConfig(max_steps=5))
        assert m.feature_names == ("x1", "x2")

    @pytest.mark.slow
    def test_linear_slope_ratio(self, linear_data):
        m, _ = train(linear_data, TrainConfig(linear_only=True, seed=42))
        w = linear_slopes(m)
        assert 1.8 <= w[1] / w[0] <= 2.2
        assert all(a.omega_s == 0 and not a.coeffs.any() for a in m.activations)

    @pytest.mark.slow
    def test_nonlinear_beats_linear_only(self, nonlinear_data):
        _, full = train(nonlinear_data, TrainConfig(seed=42))
        _, lin = train(nonlinear_data, TrainConfig(seed=42, linear_only=True))
        assert full.best_loss < lin.best_loss

    @pytest.mark.slow
    def test_regularization_monotone(self, nonlinear_data):
        X = nonlinear_data.X
        weak, _ = train(nonlinear_data, TrainConfig(seed=1), RegConfig(mu1=1.0, mu2=0.0, gamma=1.0))
        strong, _ = train(nonlinear_data, TrainConfig(seed=1), RegConfig(mu1=10.0, mu2=0.0, gamma=1.0))
        assert l1_norm_per_activation(strong, X).sum() <= l1_norm_per_activation(weak, X).sum()

    @pytest.mark.slow
    def test_determinism_bytes(self, linear_data):
        a, _ = train(linear_data, TrainConfig(seed=5, max_steps=300))
        b, _ = train(linear_data, TrainConfig(seed=5, max_steps=300))
        assert dumps_model(a) == dumps_model(b)


class TestMultiSeed:
    def test_same_and_different(self, linear_data):
        runs = train_multi_seed(linear_data, TrainConfig(max_steps=5), RegConfig(), [1, 1, 2])
        assert dumps_model(runs[0][0]) == dumps_model(runs[1][0])
        assert not np.array_equal(runs[0][0].activations[0].coeffs, runs[2][0].activations[0].coeffs)

    def test_empty(self, linear_data):
        with pytest.raises(ConfigurationError):
            train_multi_seed(linear_data, TrainConfig(), RegConfig(), [])

    @pytest.mark.slow
    def test_slope_ratios(self, linear_data):
        runs = train_multi_seed(linear_data, TrainConfig(linear_only=True), RegConfig(), range(5))
        for m, _ in runs:
            w = linear_slopes(m)
            assert 1.7 <= w[1] / w[0] <= 2.3


class TestLinearHelpers:
    def test_linear_model(self, rng):
        X = rng.normal(size=(30, 2))
        m = linear_model([0.5, -1.0], X)
        np.testing.assert_allclose(linear_slopes(m), [0.5, -1.0])
        f = X @ [0.5, -1.0]
        np.testing.assert_allclose(log_risk_batch(m, X), f - f.mean(), atol=1e-12)

    def test_slopes_rejects_spline(self, rng):
        with pytest.raises(ConfigurationError):
            linear_slopes(random_model(rng))
