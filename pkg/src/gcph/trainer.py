"""Penalized partial-likelihood objective and the full-batch Adam trainer.

The loss is ``-ll + gamma * (mu1 * sum_v L1_v + mu2 * H)`` where ``L1_v`` is the
mean absolute output of activation ``v`` over the batch and ``H`` the entropy
of the normalised ``L1_v``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .cox import (RiskSetIndex, build_risk_index, log_partial_likelihood,
                  log_partial_likelihood_grad, records_to_arrays)
from .errors import ConfigurationError, DataError, InputError, NumericalError
from .kan import (GcphModel, activation_outputs, flatten_params, log_risk_batch,
                  log_risk_grad_batch, param_slices, unflatten_params)
from .spline import BASIS_IDENTITY, BASIS_SILU, Activation, KnotGrid, bspline_basis


@dataclass(frozen=True)
class RegConfig:
    mu1: float = 1.0
    mu2: float = 10.0
    gamma: float = 0.1

    def __post_init__(self):
        for name in ("mu1", "mu2", "gamma"):
            val = getattr(self, name)
            if not np.isfinite(val) or val < 0:
                raise ConfigurationError(f"{name} must be finite and non-negative, got {val}")


@dataclass(frozen=True)
class TrainConfig:
    num_intervals: int = 5
    order: int = 3
    learning_rate: float = 0.01
    max_steps: int = 2000
    seed: int = 0
    linear_only: bool = False
    init_coeff_sd: float = 0.1

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigurationError("learning_rate must be positive")
        if int(self.max_steps) != self.max_steps or self.max_steps < 1:
            raise ConfigurationError("max_steps must be an integer >= 1")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigurationError("seed must be an unsigned 64-bit integer")
        if not self.init_coeff_sd >= 0:
            raise ConfigurationError("init_coeff_sd must be non-negative")


LOG_COLUMNS = ("step", "nll", "l1", "entropy", "total")


@dataclass
class TrainLog:
    rows: list = field(default_factory=list)  # tuples in LOG_COLUMNS order
    best_step: int = 0
    best_loss: float = np.inf

    @property
    def initial_loss(self) -> float:
        return self.rows[0][4]

    def to_csv(self) -> str:
        lines = [",".join(LOG_COLUMNS)]
        lines += [f"{r[0]},{r[1]!r},{r[2]!r},{r[3]!r},{r[4]!r}" for r in self.rows]
        return "\n".join(lines) + "\n"


def l1_norm_per_activation(m: GcphModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise InputError("L1 norm needs a nonempty batch")
    return np.abs(activation_outputs(m, X)).mean(axis=0)


def entropy_loss(l1s) -> float:
    l1s = np.asarray(l1s, dtype=float)
    if np.any(l1s < 0):
        raise InputError("L1 norms must be non-negative")
    total = l1s.sum()
    if total == 0:
        return 0.0
    p = l1s[l1s > 0] / total
    return float(-np.sum(p * np.log(p)))


def _entropy_grad(l1s: np.ndarray) -> np.ndarray:
    """dH/dL1_v = -(ln p_v + H) / sum(L1); zero where L1_v = 0."""
    total = l1s.sum()
    out = np.zeros_like(l1s)
    if total == 0:
        return out
    pos = l1s > 0
    out[pos] = -(np.log(l1s[pos] / total) + entropy_loss(l1s)) / total
    return out


def total_loss(m: GcphModel, X, idx: RiskSetIndex, cfg: RegConfig):
    scores = log_risk_batch(m, X)
    nll = -log_partial_likelihood(scores, idx)
    l1s = l1_norm_per_activation(m, X)
    l1 = float(l1s.sum())
    ent = entropy_loss(l1s)
    loss = nll + cfg.gamma * (cfg.mu1 * l1 + cfg.mu2 * ent)
    return loss, {"nll": nll, "l1": l1, "entropy": ent}


def total_loss_grad(m: GcphModel, X, idx: RiskSetIndex, cfg: RegConfig) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    J = log_risk_grad_batch(m, X)
    grad = -J.T @ log_partial_likelihood_grad(log_risk_batch(m, X), idx)
    if cfg.gamma == 0:
        return grad
    phi = activation_outputs(m, X)
    l1s = np.abs(phi).mean(axis=0)
    coef = cfg.mu1 + cfg.mu2 * _entropy_grad(l1s)
    for v, sl in enumerate(param_slices(m)):
        dl1 = np.sign(phi[:, v]) @ J[:, sl] / X.shape[0]
        grad[sl] += cfg.gamma * coef[v] * dl1
    return grad


class _Objective:
    """Loss and gradient with the spline design matrices cached for a fixed X."""

    def __init__(self, template: GcphModel, X, idx: RiskSetIndex, cfg: RegConfig):
        self.X = X
        self.idx = idx
        self.cfg = cfg
        self.slices = param_slices(template)
        self.base = np.column_stack([a.base_value(X[:, v]) for v, a in enumerate(template.activations)])
        self.bases = [bspline_basis(X[:, v], a.grid) for v, a in enumerate(template.activations)]

    def __call__(self, theta):
        n, V = self.X.shape
        phi = np.empty((n, V))
        J_blocks = []
        with np.errstate(over="ignore", invalid="ignore"):  # divergence is reported below
            for v, sl in enumerate(self.slices):
                p = theta[sl]
                spline = self.bases[v] @ p[2:]
                phi[:, v] = p[0] * self.base[:, v] + p[1] * spline
                J_blocks.append((self.base[:, v], spline, p[1] * self.bases[v]))
            scores = phi.sum(axis=1)
        if not np.all(np.isfinite(scores)):
            return np.nan, (np.nan, np.nan, np.nan), np.full_like(theta, np.nan)
        nll = -log_partial_likelihood(scores, self.idx)
        l1s = np.abs(phi).mean(axis=0)
        ent = entropy_loss(l1s)
        cfg = self.cfg
        loss = nll + cfg.gamma * (cfg.mu1 * l1s.sum() + cfg.mu2 * ent)
        # gradient weights on each row: -dll/df plus the L1 subgradient
        g_scores = -log_partial_likelihood_grad(scores, self.idx)
        coef = cfg.gamma * (cfg.mu1 + cfg.mu2 * _entropy_grad(l1s))
        grad = np.empty_like(theta)
        for v, sl in enumerate(self.slices):
            w = g_scores + coef[v] * np.sign(phi[:, v]) / n
            b, s, dc = J_blocks[v]
            grad[sl.start] = w @ b
            grad[sl.start + 1] = w @ s
            grad[sl.start + 2:sl.stop] = w @ dc
        return loss, (nll, float(l1s.sum()), ent), grad


class Adam:
    def __init__(self, lr=0.01, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = self.v = None
        self.t = 0

    def step(self, theta, grad):
        if self.m is None:
            self.m = np.zeros_like(theta)
            self.v = np.zeros_like(theta)
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad**2
        m_hat = self.m / (1 - self.beta1**self.t)
        v_hat = self.v / (1 - self.beta2**self.t)
        return theta - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def _coerce_data(data):
    """Accept a Dataset-like object (``X``, ``time``, ``event``) or a record list."""
    if hasattr(data, "X") and hasattr(data, "time"):
        X = np.asarray(data.X, dtype=float)
        names = tuple(getattr(data, "feature_names", None) or (f"x{v + 1}" for v in range(X.shape[1])))
        return X, np.asarray(data.time, float), np.asarray(data.event, bool), names, getattr(data, "standardization", None)
    X, time, event = records_to_arrays(data)
    return X, time, event, tuple(f"x{v + 1}" for v in range(X.shape[1])), None


def init_model(X, cfg: TrainConfig, feature_names=None, standardization=None) -> GcphModel:
    """Starting point: ``omega_b = omega_s = 1`` and ``coeffs ~ N(0, init_coeff_sd)``.

    In linear-only mode each activation is ``omega_b * x`` with ``omega_b = 1``.
    Coefficients are drawn from a PCG64 stream seeded by ``cfg.seed``.
    """
    X = np.asarray(X, dtype=float)
    V = X.shape[1]
    rng = np.random.default_rng(np.random.SeedSequence(int(cfg.seed)))
    acts = []
    for v in range(V):
        grid = KnotGrid.from_data(X[:, v], cfg.num_intervals, cfg.order)
        if cfg.linear_only:
            acts.append(Activation(1.0, 0.0, np.zeros(grid.num_basis), grid, BASIS_IDENTITY))
        else:
            coeffs = rng.normal(0.0, cfg.init_coeff_sd, grid.num_basis)
            acts.append(Activation(1.0, 1.0, coeffs, grid, BASIS_SILU))
    names = tuple(feature_names) if feature_names is not None else tuple(f"x{v + 1}" for v in range(V))
    return GcphModel(tuple(acts), names, 0.0, standardization)


def train(data, train_cfg: TrainConfig = None, reg_cfg: RegConfig = None):
    """Fit a GCPH model by full-batch Adam on the penalized partial likelihood.

    Returns the parameters with the lowest training loss seen, centred so the
    mean training log-risk is zero, and the per-step log.
    """
    train_cfg = train_cfg or TrainConfig()
    reg_cfg = reg_cfg or RegConfig()
    X, time, event, names, std = _coerce_data(data)
    if X.shape[0] < 2:
        raise DataError("need at least two records")
    idx = build_risk_index(time, event)
    if not idx.event_sorted.any():
        raise DataError("training data has no events")

    model = init_model(X, train_cfg, names, std)
    objective = _Objective(model, X, idx, reg_cfg)
    theta = flatten_params(model)
    mask = np.ones_like(theta)
    if train_cfg.linear_only:
        mask[:] = 0.0
        for sl in param_slices(model):
            mask[sl.start] = 1.0

    opt = Adam(lr=train_cfg.learning_rate)
    log = TrainLog()
    best_theta = theta
    for step in range(train_cfg.max_steps + 1):
        loss, (nll, l1, ent), grad = objective(theta)
        if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
            raise NumericalError(
                f"non-finite loss at step {step}: nll={nll}, l1={l1}, entropy={ent}")
        log.rows.append((step, float(nll), float(l1), float(ent), float(loss)))
        if loss < log.best_loss:
            log.best_loss, log.best_step, best_theta = float(loss), step, theta
        if step < train_cfg.max_steps:
            theta = opt.step(theta, grad * mask)

    fitted = unflatten_params(model, best_theta)
    offset = float(np.mean(log_risk_batch(fitted, X)))
    return replace(fitted, centering_offset=offset), log


def train_multi_seed(data, train_cfg: TrainConfig, reg_cfg: RegConfig, seeds) -> list:
    seeds = list(seeds)
    if not seeds:
        raise ConfigurationError("seed list is empty")
    return [train(data, replace(train_cfg, seed=int(s)), reg_cfg) for s in seeds]


def linear_slopes(m: GcphModel) -> np.ndarray:
    """Per-feature slopes of a linear-only model."""
    if any(a.basis != BASIS_IDENTITY or a.omega_s != 0 for a in m.activations):
        raise ConfigurationError("model is not linear-only")
    return np.array([a.omega_b for a in m.activations])


def linear_model(beta, X, feature_names=None, standardization=None) -> GcphModel:
    """Wrap linear coefficients (e.g. from ``fit_linear_cph``) as a linear-only model."""
    X = np.asarray(X, dtype=float)
    cfg = TrainConfig()
    acts = []
    for v, b in enumerate(np.asarray(beta, dtype=float)):
        grid = KnotGrid.from_data(X[:, v], cfg.num_intervals, cfg.order)
        acts.append(Activation(b, 0.0, np.zeros(grid.num_basis), grid, BASIS_IDENTITY))
    names = tuple(feature_names) if feature_names is not None else tuple(f"x{v + 1}" for v in range(X.shape[1]))
    m = GcphModel(tuple(acts), names, 0.0, standardization)
    return replace(m, centering_offset=float(np.mean(log_risk_batch(m, X))))
