"""Censoring-aware evaluation: Kaplan-Meier, truncated C-index, IPCW Brier score."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, InputError, UndefinedMetricError

HORIZON_LABELS = ("p25", "p50", "p75")


@dataclass(frozen=True)
class KaplanMeier:
    times: np.ndarray
    surv: np.ndarray

    def __call__(self, t):
        """Right-continuous value ``S(t)``."""
        t = np.asarray(t, dtype=float)
        pos = np.searchsorted(self.times, t, side="right") - 1
        out = np.where(pos >= 0, self.surv[np.maximum(pos, 0)], 1.0)
        return out[()] if out.ndim == 0 else out

    def left(self, t):
        """Left limit ``S(t-)``."""
        t = np.asarray(t, dtype=float)
        pos = np.searchsorted(self.times, t, side="left") - 1
        out = np.where(pos >= 0, self.surv[np.maximum(pos, 0)], 1.0)
        return out[()] if out.ndim == 0 else out


def kaplan_meier(times, events) -> KaplanMeier:
    """Product-limit estimator. Pass ``~events`` to estimate the censoring survivor ``G``."""
    times = np.asarray(times, dtype=float)
    events = np.asarray(events).astype(bool)
    if times.size == 0:
        raise DataError("Kaplan-Meier needs at least one observation")
    if events.shape != times.shape:
        raise InputError("times and events differ in length")
    if np.any(times <= 0):
        raise DataError("times must be positive")
    uniq, inverse = np.unique(times, return_inverse=True)
    deaths = np.bincount(inverse, weights=events.astype(float), minlength=uniq.size)
    counts = np.bincount(inverse, minlength=uniq.size)
    at_risk = times.size - np.r_[0, np.cumsum(counts)[:-1]]
    return KaplanMeier(times=uniq, surv=np.cumprod(1.0 - deaths / at_risk))


@dataclass(frozen=True)
class Horizon:
    t: float
    label: str


def percentile_horizons(train_times) -> tuple:
    train_times = np.asarray(train_times, dtype=float)
    if train_times.size == 0:
        raise DataError("no training times")
    qs = np.percentile(train_times, [25, 50, 75])
    return tuple(Horizon(float(q), lab) for q, lab in zip(qs, HORIZON_LABELS))


class _Fenwick:
    def __init__(self, n):
        self.tree = [0] * (n + 1)

    def add(self, i, val=1):
        i += 1
        while i < len(self.tree):
            self.tree[i] += val
            i += i & -i

    def prefix(self, i):
        """Sum of entries ``[0, i)``."""
        total = 0
        while i > 0:
            total += self.tree[i]
            i -= i & -i
        return total


def c_index(times, events, risk_scores, horizon=None, weighting: str = "event_sum") -> float:
    """Concordance over pairs ``t_i < t_j`` with ``delta_i = 1`` and ``t_i <= horizon``.

    ``weighting="event_sum"`` weights each pair by ``delta_i + delta_j``;
    ``"harrell"`` gives every comparable pair weight 1. Equal scores earn half
    the weight. ``horizon`` may be a :class:`Horizon`, a float, or ``None``
    (no truncation).
    """
    times = np.asarray(times, dtype=float)
    events = np.asarray(events).astype(bool)
    scores = np.asarray(risk_scores, dtype=float)
    if not (times.shape == events.shape == scores.shape) or times.ndim != 1:
        raise InputError("times, events and scores must be equal-length vectors")
    if weighting not in ("event_sum", "harrell"):
        raise InputError(f"unknown weighting {weighting!r}")
    limit = np.inf if horizon is None else float(getattr(horizon, "t", horizon))

    ranks = np.unique(scores, return_inverse=True)[1]
    nr = int(ranks.max()) + 1 if ranks.size else 0
    # later subjects split by their event flag so the pair weight is known
    later = [_Fenwick(nr), _Fenwick(nr)]
    n_later = [0, 0]
    num2 = 0  # twice the numerator, kept integral
    den = 0
    order = np.argsort(-times, kind="stable")
    pos = 0
    n = times.size
    while pos < n:
        end = pos
        while end < n and times[order[end]] == times[order[pos]]:
            end += 1
        group = order[pos:end]
        for i in group:
            if not events[i] or times[i] > limit:
                continue
            r = int(ranks[i])
            for dj in (0, 1):
                w = (1 + dj) if weighting == "event_sum" else 1
                below = later[dj].prefix(r)
                tied = later[dj].prefix(r + 1) - below
                num2 += w * (2 * below + tied)
                den += w * n_later[dj]
        for j in group:
            later[int(events[j])].add(int(ranks[j]))
            n_later[int(events[j])] += 1
        pos = end
    if den == 0:
        raise UndefinedMetricError("no comparable pairs")
    return (num2 / 2) / den


def brier_score(times, events, surv_at_t, censor_km: KaplanMeier, horizon) -> float:
    """IPCW Brier score at ``horizon`` with the censoring survivor ``censor_km``.

    Events at or before the horizon are weighted by ``1 / G(t_i-)``, subjects
    still at risk after it by ``1 / G(t)``; censored-before-horizon subjects
    contribute zero.
    """
    times = np.asarray(times, dtype=float)
    events = np.asarray(events).astype(bool)
    surv = np.asarray(surv_at_t, dtype=float)
    if not (times.shape == events.shape == surv.shape) or times.ndim != 1:
        raise InputError("times, events and predictions must be equal-length vectors")
    t = float(getattr(horizon, "t", horizon))
    died = (times <= t) & events
    alive = times > t
    total = 0.0
    if died.any():
        g = censor_km.left(times[died])
        if np.any(g <= 0):
            raise UndefinedMetricError("censoring survivor is zero before an event time")
        total += np.sum(surv[died] ** 2 / g)
    if alive.any():
        g_t = float(censor_km(t))
        if g_t <= 0:
            raise UndefinedMetricError("censoring survivor is zero at the horizon")
        total += np.sum((1.0 - surv[alive]) ** 2) / g_t
    return float(total / times.size)


def evaluate_at_horizons(train_time, train_event, train_scores,
                         test_time, test_event, test_scores) -> list:
    """C-index (truncated and not) and Brier score at the train-time quartiles.

    The Breslow baseline and censoring Kaplan-Meier come from the training
    sample. An undefined cell is reported as ``None`` with a ``reason``.
    """
    from .cox import breslow_baseline, build_risk_index, predict_survival

    train_time = np.asarray(train_time, dtype=float)
    train_event = np.asarray(train_event).astype(bool)
    base = breslow_baseline(train_scores, build_risk_index(train_time, train_event))
    censor_km = kaplan_meier(train_time, ~train_event)
    test_scores = np.asarray(test_scores, dtype=float)
    rows = []
    for h in percentile_horizons(train_time):
        row = {"horizon_label": h.label, "horizon_t": h.t}
        reasons = []
        for key, fn in (
            ("c_index", lambda: c_index(test_time, test_event, test_scores, h)),
            ("c_index_untruncated", lambda: c_index(test_time, test_event, test_scores)),
            ("brier", lambda: brier_score(test_time, test_event,
                                          predict_survival(test_scores, base, h.t), censor_km, h)),
        ):
            try:
                row[key] = float(fn())
            except UndefinedMetricError as exc:
                row[key] = None
                reasons.append(f"{key}: {exc}")
        if reasons:
            row["reason"] = "; ".join(reasons)
        rows.append(row)
    return rows
