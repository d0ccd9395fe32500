"""Distil trained activations into ``a3 * y(a1 * x + a2) + a4`` closed forms."""
from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Callable

import numpy as np

from .errors import InputError
from .kan import GcphModel, activation_outputs, per_feature_curve


@dataclass(frozen=True)
class CandidateFn:
    name: str
    token: str  # function name used in rendered formulas
    eval: Callable
    deriv: Callable
    domain: Callable  # elementwise predicate on the inner argument


def _all(u):
    return np.ones(np.shape(u), dtype=bool)


CANDIDATES = (
    CandidateFn("x", "x", lambda u: u, lambda u: np.ones_like(u), _all),
    CandidateFn("x^2", "pow2", lambda u: u**2, lambda u: 2 * u, _all),
    CandidateFn("x^3", "pow3", lambda u: u**3, lambda u: 3 * u**2, _all),
    CandidateFn("x^4", "pow4", lambda u: u**4, lambda u: 4 * u**3, _all),
    CandidateFn("exp", "exp", np.exp, np.exp, _all),
    CandidateFn("ln", "ln", np.log, lambda u: 1 / u, lambda u: u > 0),
    CandidateFn("sqrt", "sqrt", np.sqrt, lambda u: 0.5 / np.sqrt(u), lambda u: u >= 0),
    CandidateFn("tanh", "tanh", np.tanh, lambda u: 1 - np.tanh(u) ** 2, _all),
    CandidateFn("sin", "sin", np.sin, np.cos, _all),
)
CANDIDATES_BY_NAME = {c.name: c for c in CANDIDATES}

# inner slope grid: 0 plus 50 log-spaced magnitudes in [0.01, 10] of each sign
_SLOPES = np.logspace(-2, 1, 50)
SLOPE_GRID = np.r_[-_SLOPES[::-1], 0.0, _SLOPES]
SHIFT_POINTS = 101
REFINE_STEPS = 200


@dataclass(frozen=True)
class SymbolicTerm:
    feature: int
    candidate: str
    alpha: tuple  # (a1, a2, a3, a4)
    r2: float

    def inner(self, x):
        return self.alpha[2] * CANDIDATES_BY_NAME[self.candidate].eval(self.alpha[0] * np.asarray(x, float) + self.alpha[1])

    def __call__(self, x):
        return self.inner(x) + self.alpha[3]


@dataclass(frozen=True)
class SymbolicModel:
    """Kept terms, pruned feature indices and one merged constant.

    The model evaluates to ``sum_t a3 * y(a1 * x + a2) + constant``; each
    term's own ``a4`` is already folded into ``constant``.
    """
    terms: tuple
    dropped: tuple
    constant: float
    feature_names: tuple = ()

    def evaluate(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.full(X.shape[0], self.constant)
        for t in self.terms:
            out += t.inner(X[:, t.feature])
        return out

    def to_dict(self) -> dict:
        return {
            "terms": [{"feature": t.feature, "candidate": t.candidate,
                       "alpha": [float(a) for a in t.alpha], "r2": float(t.r2)} for t in self.terms],
            "dropped": [int(v) for v in self.dropped],
            "constant": float(self.constant),
        }


def _resolve(candidate) -> CandidateFn:
    if isinstance(candidate, CandidateFn):
        return candidate
    try:
        return CANDIDATES_BY_NAME[candidate]
    except KeyError:
        raise InputError(f"unknown candidate {candidate!r}") from None


def _r2(sse: float, sst: float) -> float:
    if sst <= 0:
        return 1.0 if sse < 1e-12 else 0.0
    return 1.0 - sse / sst


def _outer_fit(Y: np.ndarray, ys: np.ndarray):
    """Least-squares ``(a3, a4)`` for each row of ``Y`` and the resulting SSE."""
    ybar = ys.mean()
    yc = ys - ybar
    Ybar = Y.mean(axis=-1)
    Yc = Y - Ybar[..., None]
    var = np.einsum("...i,...i->...", Yc, Yc)
    cov = Yc @ yc
    flat = var <= 1e-14 * Y.shape[-1] * np.maximum(1.0, np.abs(Ybar)) ** 2
    a3 = np.where(flat, 0.0, cov / np.where(flat, 1.0, var))
    a4 = ybar - a3 * Ybar
    resid = ys - (a3[..., None] * Y + a4[..., None])
    return a3, a4, np.einsum("...i,...i->...", resid, resid)


def _eval_rows(cand: CandidateFn, xs, a1, a2):
    """Candidate values on ``a1 * xs + a2`` for a vector of shifts; infeasible rows are NaN."""
    u = a1 * xs[None, :] + np.atleast_1d(a2)[:, None]
    with np.errstate(all="ignore"):
        ok = np.all(cand.domain(u), axis=1)
        Y = cand.eval(np.where(ok[:, None], u, 1.0))
    ok &= np.all(np.isfinite(Y), axis=1) & (np.max(np.abs(Y), axis=1) < 1e150)
    Y[~ok] = np.nan
    return Y, ok


def _sse_at(cand, xs, ys, a1, a2):
    Y, ok = _eval_rows(cand, xs, a1, a2)
    if not ok[0]:
        return np.inf, 0.0, 0.0
    a3, a4, sse = _outer_fit(Y[0], ys)
    return float(sse), float(a3), float(a4)


def affine_fit(candidate, xs, ys):
    """Fit ``ys ~ a3 * y(a1 * xs + a2) + a4`` and score it by R^2.

    ``(a1, a2)`` are searched on a 101 x 101 grid (``a2`` spans enough shift to
    place the argument window anywhere within pi of the origin), then polished
    by coordinate descent; ``(a3, a4)`` are always the least-squares solution.
    Returns ``(alpha, r2)``; a candidate infeasible at every grid point gets
    ``r2 = -inf``.
    """
    cand = _resolve(candidate)
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1 or xs.size < 8:
        raise InputError("xs and ys must be equal-length vectors with at least 8 points")
    if np.all(xs == xs[0]):
        raise InputError("xs must not be constant")
    # an exactly constant target has SST = 0, whatever rounding leaves in the mean
    sst = 0.0 if np.all(ys == ys[0]) else float(np.sum((ys - ys.mean()) ** 2))
    reach = float(np.max(np.abs(xs)))

    best = (np.inf, 0.0, 0.0)
    for a1 in SLOPE_GRID:
        span = abs(a1) * reach + np.pi
        shifts = np.linspace(-span, span, SHIFT_POINTS)
        Y, ok = _eval_rows(cand, xs, a1, shifts)
        if not ok.any():
            continue
        _, _, sse = _outer_fit(Y[ok], ys)
        k = int(np.argmin(sse))
        if sse[k] < best[0]:
            best = (float(sse[k]), float(a1), float(shifts[ok][k]))
    if not np.isfinite(best[0]):
        return (0.0, 0.0, 0.0, float(ys.mean())), -np.inf

    _, a1, a2 = best
    sse, a3, a4 = _sse_at(cand, xs, ys, a1, a2)
    d1 = max(0.05 * abs(a1), 0.01)
    d2 = (abs(a1) * reach + np.pi) / (SHIFT_POINTS - 1)
    for _ in range(REFINE_STEPS):
        improved = False
        for which in (0, 1):
            for sign in (1.0, -1.0):
                t1 = a1 + sign * d1 if which == 0 else a1
                t2 = a2 + sign * d2 if which == 1 else a2
                s, b3, b4 = _sse_at(cand, xs, ys, t1, t2)
                if s < sse:
                    sse, a1, a2, a3, a4 = s, t1, t2, b3, b4
                    improved = True
        if not improved:
            d1 *= 0.5
            d2 *= 0.5
    return _canonical(cand.name, a1, a2, a3, a4), _r2(sse, sst)


def _canonical(name, a1, a2, a3, a4):
    """Remove scale redundancy so rounded coefficients stay meaningful.

    Powers, ln and sqrt get a unit inner slope, exp a zero inner shift and
    sin a positive slope and a phase in (-pi, pi]; the represented function is unchanged.
    """
    if name == "sin":
        # sin(-u) = -sin(u) and sin is 2*pi periodic
        if a1 < 0:
            a1, a2, a3 = -a1, -a2, -a3
        return (a1, float(np.pi - np.mod(np.pi - a2, 2 * np.pi)), a3, a4)
    if a1 == 0 or name == "tanh":
        return (a1, a2, a3, a4)
    if name == "exp":
        return (a1, 0.0, a3 * np.exp(a2), a4)
    if name == "x":
        return (1.0, 0.0, a3 * a1, a4 + a3 * a2)
    if name.startswith("x^"):
        k = int(name[2:])
        return (1.0, a2 / a1, a3 * a1**k, a4)
    s = abs(a1)
    if name == "ln":
        return (a1 / s, a2 / s, a3, a4 + a3 * np.log(s))
    if name == "sqrt":
        return (a1 / s, a2 / s, a3 * np.sqrt(s), a4)
    return (a1, a2, a3, a4)


def symbolify(m: GcphModel, train_X, n_points: int = 201, prune_threshold: float = 0.05,
              candidates=CANDIDATES) -> SymbolicModel:
    """Best-R^2 closed form per feature, fitted to its sweep curve over the training range.

    Terms whose fitted output varies by less than ``prune_threshold`` over the
    range are dropped and replaced by their mean level in the constant.
    """
    train_X = np.asarray(train_X, dtype=float)
    V = m.num_features
    # per_feature_curve(v) = phi_v(x) + sum_{u != v} phi_u(0) - centering
    at_zero = activation_outputs(m, np.zeros((1, V)))[0]
    constant = -m.centering_offset
    terms, dropped = [], []
    for v in range(V):
        lo, hi = float(train_X[:, v].min()), float(train_X[:, v].max())
        if hi == lo:
            lo, hi = lo - 0.5, hi + 0.5
        xs = np.linspace(lo, hi, n_points)
        ys = per_feature_curve(m, v, xs)
        offset = at_zero.sum() - at_zero[v] - m.centering_offset
        fits = [(affine_fit(c, xs, ys), c.name) for c in candidates]
        (alpha, r2), name = max(fits, key=lambda f: f[0][1])  # first wins on ties
        term = SymbolicTerm(v, name, tuple(float(a) for a in alpha), float(r2))
        fitted = term(xs)
        if fitted.max() - fitted.min() < prune_threshold:
            dropped.append(v)
            constant += float(ys.mean()) - offset
        else:
            terms.append(term)
            constant += term.alpha[3] - offset
    return SymbolicModel(tuple(terms), tuple(dropped), float(constant), tuple(m.feature_names))


def round_half_away(value: float, decimals: int = 2) -> float:
    q = Decimal(1).scaleb(-decimals)
    return float(Decimal(repr(float(value))).quantize(q, rounding=ROUND_HALF_UP))


def _fmt(value: float, decimals: int) -> str:
    r = round_half_away(value, decimals)
    return f"{0.0 if r == 0 else r:.{decimals}f}"


def render_formula(sm: SymbolicModel, decimals: int = 2) -> str:
    """Render as ``f = c*func(c*xV + c) ... + c`` with variables numbered from 1.

    Grammar::

        formula := 'f =' term (('+'|'-') term)*
        term    := COEFF '*' FUNC '(' COEFF '*' VAR (('+'|'-') COEFF)? ')'
                 | COEFF '*' VAR | COEFF
        FUNC    := pow2 | pow3 | pow4 | exp | ln | sqrt | tanh | sin

    Only the leading term (and the inner slope) may carry a '-' sign itself.
    The identity candidate collapses to ``COEFF*VAR``.
    """
    pieces = []  # (value, text without sign)
    constant = sm.constant
    for t in sorted(sm.terms, key=lambda t: t.feature):
        a1, a2, a3, _ = t.alpha
        var = f"x{t.feature + 1}"
        if t.candidate == "x":
            pieces.append((a3 * a1, f"{_fmt(abs(a3 * a1), decimals)}*{var}"))
            constant += a3 * a2
            continue
        inner = f"{_fmt(a1, decimals)}*{var}"
        if round_half_away(a2, decimals) != 0:
            inner += f" {'-' if a2 < 0 else '+'} {_fmt(abs(a2), decimals)}"
        token = CANDIDATES_BY_NAME[t.candidate].token
        pieces.append((a3, f"{_fmt(abs(a3), decimals)}*{token}({inner})"))
    if not pieces or round_half_away(constant, decimals) != 0:
        pieces.append((constant, _fmt(abs(constant), decimals)))

    out = "f = "
    for k, (value, text) in enumerate(pieces):
        negative = round_half_away(value, decimals) < 0
        if k == 0:
            out += ("-" if negative else "") + text
        else:
            out += (" - " if negative else " + ") + text
    return out
