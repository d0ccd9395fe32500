"""Cox partial likelihood with Breslow ties, Breslow baseline hazard, linear CPH."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConfigurationError, DataError, InputError


class SurvivalRecord(NamedTuple):
    x: np.ndarray
    time: float
    event: bool


def records_to_arrays(records):
    """Stack records into ``(X, time, event)`` arrays."""
    records = list(records)
    if not records:
        raise DataError("no records")
    X = np.array([np.asarray(r.x, dtype=float) for r in records])
    time = np.array([r.time for r in records], dtype=float)
    event = np.array([bool(r.event) for r in records])
    return X, time, event


@dataclass(frozen=True)
class RiskSetIndex:
    """Time-sorted view of a sample.

    ``group_start[p]`` / ``group_end[p]`` bound the tie group of sorted position
    ``p``; the risk set of that position is ``order[group_start[p]:]``.
    """
    order: np.ndarray
    time_sorted: np.ndarray
    event_sorted: np.ndarray
    group_start: np.ndarray
    group_end: np.ndarray

    @property
    def n(self) -> int:
        return self.order.size

    @property
    def event_positions(self) -> np.ndarray:
        """Original indices of subjects with an observed event, in time order."""
        return self.order[self.event_sorted]

    @property
    def tie_groups(self) -> list:
        starts = np.unique(self.group_start)
        return [self.order[s:self.group_end[s]] for s in starts]

    def risk_set(self, i: int) -> np.ndarray:
        """Original indices at risk at the time of original subject ``i``."""
        pos = int(np.flatnonzero(self.order == i)[0])
        return np.sort(self.order[self.group_start[pos]:])


def build_risk_index(time, event) -> RiskSetIndex:
    time = np.asarray(time, dtype=float)
    event = np.asarray(event).astype(bool)
    if time.ndim != 1 or time.size == 0:
        raise DataError("need a nonempty 1-d time vector")
    if event.shape != time.shape:
        raise InputError("time and event differ in length")
    if not np.all(np.isfinite(time)) or np.any(time <= 0):
        raise DataError("times must be finite and positive")
    order = np.argsort(time, kind="stable")
    ts = time[order]
    n = ts.size
    new_group = np.r_[True, ts[1:] != ts[:-1]]
    starts = np.flatnonzero(new_group)
    ends = np.r_[starts[1:], n]
    sizes = ends - starts
    return RiskSetIndex(
        order=order,
        time_sorted=ts,
        event_sorted=event[order],
        group_start=np.repeat(starts, sizes),
        group_end=np.repeat(ends, sizes),
    )


def _sorted_scores(scores, idx: RiskSetIndex) -> np.ndarray:
    scores = np.asarray(scores, dtype=float)
    if scores.shape != (idx.n,):
        raise InputError(f"expected {idx.n} scores, got shape {scores.shape}")
    if not np.all(np.isfinite(scores)):
        raise InputError("scores must be finite")
    return scores[idx.order]


def _log_risk_sums(s: np.ndarray, idx: RiskSetIndex) -> np.ndarray:
    """``log sum_{j in R(t_p)} exp(s_j)`` for each sorted position ``p``."""
    tail = np.logaddexp.accumulate(s[::-1])[::-1]
    return tail[idx.group_start]


def log_partial_likelihood(scores, idx: RiskSetIndex) -> float:
    s = _sorted_scores(scores, idx)
    lse = _log_risk_sums(s, idx)
    ev = idx.event_sorted
    return float(np.sum(s[ev] - lse[ev]))


def log_partial_likelihood_grad(scores, idx: RiskSetIndex) -> np.ndarray:
    s = _sorted_scores(scores, idx)
    lse = _log_risk_sums(s, idx)
    ev = idx.event_sorted
    # log of sum over events i with t_i <= t_q of 1 / sum_{R(t_i)} exp(s)
    inv = np.where(ev, -lse, -np.inf)
    log_cum = np.logaddexp.accumulate(inv)[idx.group_end - 1]
    grad_sorted = ev - np.exp(s + log_cum)
    grad = np.empty_like(grad_sorted)
    grad[idx.order] = grad_sorted
    return grad


@dataclass(frozen=True)
class BreslowBaseline:
    times: np.ndarray
    cum_hazard: np.ndarray

    def __call__(self, t):
        """Cumulative baseline hazard at ``t`` (right-continuous step function)."""
        t = np.asarray(t, dtype=float)
        pos = np.searchsorted(self.times, t, side="right") - 1
        out = np.where(pos >= 0, self.cum_hazard[np.maximum(pos, 0)], 0.0)
        return out[()] if out.ndim == 0 else out


def breslow_baseline(scores, idx: RiskSetIndex) -> BreslowBaseline:
    s = _sorted_scores(scores, idx)
    if not idx.event_sorted.any():
        raise DataError("baseline hazard is undefined without events")
    lse = _log_risk_sums(s, idx)
    starts = np.unique(idx.group_start)
    deaths = np.add.reduceat(idx.event_sorted.astype(float), starts)
    keep = deaths > 0
    starts, deaths = starts[keep], deaths[keep]
    increments = deaths * np.exp(-lse[starts])
    return BreslowBaseline(times=idx.time_sorted[starts], cum_hazard=np.cumsum(increments))


def predict_survival(score, base: BreslowBaseline, t):
    """``S(t | x) = exp(-H0(t) * exp(score))``; broadcasts ``score`` against ``t``."""
    score = np.asarray(score, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise InputError("prediction times must be non-negative")
    out = np.exp(-base(t) * np.exp(score))
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class LinearCphFit:
    beta: np.ndarray
    converged: bool
    iterations: int
    log_likelihood: float


def _cph_derivatives(beta, X_sorted, idx: RiskSetIndex):
    """Log partial likelihood, score vector and observed information for ``f = X beta``."""
    eta = X_sorted @ beta
    w = np.exp(eta - eta.max())
    S0 = np.cumsum(w[::-1])[::-1]
    S1 = np.cumsum((w[:, None] * X_sorted)[::-1], axis=0)[::-1]
    S2 = np.cumsum((w[:, None, None] * X_sorted[:, :, None] * X_sorted[:, None, :])[::-1], axis=0)[::-1]
    g = idx.group_start[idx.event_sorted]
    s0, s1, s2 = S0[g], S1[g], S2[g]
    xbar = s1 / s0[:, None]
    ll = float(np.sum(eta[idx.event_sorted] - eta.max() - np.log(s0)))
    score = np.sum(X_sorted[idx.event_sorted] - xbar, axis=0)
    info = np.sum(s2 / s0[:, None, None] - xbar[:, :, None] * xbar[:, None, :], axis=0)
    return ll, score, info


def fit_linear_cph(X, time, event, max_iter: int = 100, tol: float = 1e-8) -> LinearCphFit:
    """Newton-Raphson maximisation of the Breslow partial likelihood for ``f = X beta``.

    Steps are halved (up to 30 times) until the likelihood does not decrease.
    A failed line search or a non-finite iterate returns ``converged=False``
    together with the last accepted iterate.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise InputError("X must be a matrix")
    idx = build_risk_index(time, event)
    if X.shape[0] != idx.n:
        raise InputError("X and time differ in length")
    if idx.n < 2:
        raise DataError("need at least two records")
    if not idx.event_sorted.any():
        raise DataError("need at least one event")
    p = X.shape[1]
    if np.linalg.matrix_rank(X - X.mean(axis=0)) < p:
        raise ConfigurationError("design matrix is rank deficient")
    Xs = X[idx.order]
    beta = np.zeros(p)
    ll, score, info = _cph_derivatives(beta, Xs, idx)
    for it in range(max_iter + 1):
        if np.max(np.abs(score)) < tol:
            return LinearCphFit(beta, True, it, ll)
        if it == max_iter:
            break
        try:
            step = np.linalg.solve(info, score)
        except np.linalg.LinAlgError:
            break
        for _ in range(31):
            cand = beta + step
            new_ll, new_score, new_info = _cph_derivatives(cand, Xs, idx)
            if np.isfinite(new_ll) and new_ll >= ll - 1e-12 * max(1.0, abs(ll)):  # float noise near optimum
                break
            step = step / 2
        else:
            break
        if not np.all(np.isfinite(cand)):
            break
        beta, ll, score, info = cand, new_ll, new_score, new_info
    return LinearCphFit(beta, False, it, ll)
