"""B-spline bases on uniform extended knot grids and single KAN activations.

An activation is ``omega_b * b(x) + omega_s * sum_k c_k B_k(x)`` where ``b`` is
the SiLU function ``x * sigmoid(x)`` and ``B_k`` are the degree-``order``
B-splines on a uniform grid of ``num_intervals`` cells spanning ``[lo, hi]``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import ConfigurationError

BASIS_SILU = "silu"
BASIS_IDENTITY = "identity"


@dataclass(frozen=True)
class KnotGrid:
    lo: float
    hi: float
    num_intervals: int = 5
    order: int = 3

    def __post_init__(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi)) or not self.lo < self.hi:
            raise ConfigurationError(f"grid needs finite lo < hi, got [{self.lo}, {self.hi}]")
        if int(self.num_intervals) != self.num_intervals or self.num_intervals < 1:
            raise ConfigurationError(f"num_intervals must be a positive integer, got {self.num_intervals}")
        if int(self.order) != self.order or self.order < 1:
            raise ConfigurationError(f"order must be a positive integer, got {self.order}")

    @property
    def spacing(self) -> float:
        return (self.hi - self.lo) / self.num_intervals

    @property
    def knots(self) -> np.ndarray:
        """All ``G + 2K + 1`` knots, uniformly extended ``K`` cells past each end."""
        steps = np.arange(-self.order, self.num_intervals + self.order + 1)
        knots = self.lo + steps * self.spacing
        knots[self.order + self.num_intervals] = self.hi  # pin the interior end exactly
        return knots

    @property
    def num_basis(self) -> int:
        return self.num_intervals + self.order

    @classmethod
    def from_data(cls, values, num_intervals: int = 5, order: int = 3) -> "KnotGrid":
        """Grid covering the data range padded by 1% on each side."""
        values = np.asarray(values, dtype=float)
        vmin, vmax = float(values.min()), float(values.max())
        if vmax == vmin:
            return cls(vmin - 0.5, vmin + 0.5, num_intervals, order)
        pad = 0.01 * (vmax - vmin)
        return cls(vmin - pad, vmax + pad, num_intervals, order)


def bspline_basis(x, grid: KnotGrid) -> np.ndarray:
    """Evaluate all ``G + K`` B-splines at ``x``.

    Parameters
    ----------
    x : float or array_like
        Evaluation points. Points outside ``[grid.lo, grid.hi]`` use the
        extended knots; nothing is clamped.
    grid : KnotGrid

    Returns
    -------
    ndarray of shape ``x.shape + (G + K,)``
    """
    if not isinstance(grid, KnotGrid):
        raise ConfigurationError("grid must be a KnotGrid")
    x = np.asarray(x, dtype=float)
    t = grid.knots
    xe = x[..., None]
    bases = ((xe >= t[:-1]) & (xe < t[1:])).astype(float)
    for k in range(1, grid.order + 1):
        left = (xe - t[: -k - 1]) / (t[k:-1] - t[: -k - 1])
        right = (t[k + 1:] - xe) / (t[k + 1:] - t[1:-k])
        bases = left * bases[..., :-1] + right * bases[..., 1:]
    return bases


def basis_fn(x):
    """SiLU, ``x / (1 + exp(-x))``."""
    x = np.asarray(x, dtype=float)
    out = x * expit(x)
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class Activation:
    omega_b: float
    omega_s: float
    coeffs: np.ndarray
    grid: KnotGrid
    basis: str = BASIS_SILU

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=float)
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "omega_b", float(self.omega_b))
        object.__setattr__(self, "omega_s", float(self.omega_s))
        if coeffs.shape != (self.grid.num_basis,):
            raise ConfigurationError(
                f"expected {self.grid.num_basis} coefficients, got shape {coeffs.shape}")
        if not (np.isfinite(self.omega_b) and np.isfinite(self.omega_s) and np.all(np.isfinite(coeffs))):
            raise ConfigurationError("activation parameters must be finite")
        if self.basis not in (BASIS_SILU, BASIS_IDENTITY):
            raise ConfigurationError(f"unknown basis {self.basis!r}")

    @property
    def num_params(self) -> int:
        return 2 + self.grid.num_basis

    def base_value(self, x):
        if self.basis == BASIS_IDENTITY:
            return np.asarray(x, dtype=float)
        return basis_fn(x)

    def __eq__(self, other):
        if not isinstance(other, Activation):
            return NotImplemented
        return (self.omega_b == other.omega_b and self.omega_s == other.omega_s
                and np.array_equal(self.coeffs, other.coeffs)
                and self.grid == other.grid and self.basis == other.basis)


def activation_eval(a: Activation, x):
    x = np.asarray(x, dtype=float)
    out = a.omega_b * a.base_value(x)
    if a.omega_s != 0.0:
        out = out + a.omega_s * (bspline_basis(x, a.grid) @ a.coeffs)
    return out[()] if np.ndim(out) == 0 else out


def activation_grad(a: Activation, x):
    """Partial derivatives of ``activation_eval`` w.r.t. ``(omega_b, omega_s, coeffs)``.

    Vectorizes over ``x``; ``d_coeffs`` gains a trailing axis of length ``G + K``.
    """
    x = np.asarray(x, dtype=float)
    basis = bspline_basis(x, a.grid)
    d_omega_b = np.asarray(a.base_value(x), dtype=float)
    d_omega_s = basis @ a.coeffs
    d_coeffs = a.omega_s * basis
    if x.ndim == 0:
        return float(d_omega_b), float(d_omega_s), d_coeffs
    return d_omega_b, d_omega_s, d_coeffs
