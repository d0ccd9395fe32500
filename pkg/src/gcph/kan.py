"""Single-layer KAN log-risk ``f(x) = sum_v phi_v(x_v) - centering_offset``."""
from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigurationError, InputError
from .spline import Activation, KnotGrid, bspline_basis

MODEL_VERSION = 1


@dataclass(frozen=True)
class GcphModel:
    activations: tuple
    feature_names: tuple
    centering_offset: float = 0.0
    standardization: tuple = None  # ((mean, sd), ...) per feature

    def __post_init__(self):
        acts = tuple(self.activations)
        names = tuple(str(n) for n in self.feature_names)
        if len(acts) < 1:
            raise ConfigurationError("a model needs at least one activation")
        if len(names) != len(acts):
            raise ConfigurationError("feature_names and activations differ in length")
        std = self.standardization
        std = tuple((0.0, 1.0) for _ in acts) if std is None else tuple((float(m), float(s)) for m, s in std)
        if len(std) != len(acts) or any(not s > 0 for _, s in std):
            raise ConfigurationError("standardization needs one (mean, sd > 0) pair per feature")
        if not np.isfinite(self.centering_offset):
            raise ConfigurationError("centering_offset must be finite")
        object.__setattr__(self, "activations", acts)
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "standardization", std)
        object.__setattr__(self, "centering_offset", float(self.centering_offset))

    @property
    def num_features(self) -> int:
        return len(self.activations)

    @property
    def num_params(self) -> int:
        return sum(a.num_params for a in self.activations)

    def standardize(self, X_raw) -> np.ndarray:
        X_raw = _as_matrix(X_raw, self.num_features)
        mean = np.array([m for m, _ in self.standardization])
        sd = np.array([s for _, s in self.standardization])
        return (X_raw - mean) / sd


def _as_matrix(X, V) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1 and X.size == 0:
        X = X.reshape(0, V)
    if X.ndim != 2 or X.shape[1] != V:
        raise InputError(f"expected a matrix with {V} columns, got shape {X.shape}")
    return X


def activation_outputs(m: GcphModel, X) -> np.ndarray:
    """Raw per-activation values ``phi_v(X[:, v])``, shape ``(n, V)``, no centering."""
    X = _as_matrix(X, m.num_features)
    out = np.empty(X.shape)
    for v, a in enumerate(m.activations):
        col = X[:, v]
        vals = a.omega_b * a.base_value(col)
        if a.omega_s != 0.0:
            vals = vals + a.omega_s * (bspline_basis(col, a.grid) @ a.coeffs)
        out[:, v] = vals
    return out


def log_risk(m: GcphModel, x) -> float:
    x = np.asarray(x, dtype=float)
    if x.shape != (m.num_features,):
        raise InputError(f"expected {m.num_features} covariates, got shape {x.shape}")
    return float(log_risk_batch(m, x[None, :])[0])


def log_risk_batch(m: GcphModel, X) -> np.ndarray:
    return activation_outputs(m, X).sum(axis=1) - m.centering_offset


def log_risk_grad_batch(m: GcphModel, X) -> np.ndarray:
    """Jacobian of ``log_risk_batch`` w.r.t. the flattened parameter vector, ``(n, P)``."""
    X = _as_matrix(X, m.num_features)
    J = np.zeros((X.shape[0], m.num_params))
    start = 0
    for v, a in enumerate(m.activations):
        col = X[:, v]
        basis = bspline_basis(col, a.grid)
        J[:, start] = a.base_value(col)
        J[:, start + 1] = basis @ a.coeffs
        J[:, start + 2:start + a.num_params] = a.omega_s * basis
        start += a.num_params
    return J


def per_feature_curve(m: GcphModel, v: int, xs) -> np.ndarray:
    """``f`` with feature ``v`` swept over ``xs`` and every other feature held at 0."""
    if not 0 <= v < m.num_features:
        raise InputError(f"feature index {v} out of range for {m.num_features} features")
    xs = np.asarray(xs, dtype=float).ravel()
    X = np.zeros((xs.size, m.num_features))
    X[:, v] = xs
    return log_risk_batch(m, X)


def param_slices(m: GcphModel) -> list:
    slices, start = [], 0
    for a in m.activations:
        slices.append(slice(start, start + a.num_params))
        start += a.num_params
    return slices


def flatten_params(m: GcphModel) -> np.ndarray:
    return np.concatenate([np.r_[a.omega_b, a.omega_s, a.coeffs] for a in m.activations])


def unflatten_params(m: GcphModel, theta) -> GcphModel:
    """Model with the same grids and metadata as ``m`` and parameters ``theta``."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (m.num_params,):
        raise InputError(f"expected {m.num_params} parameters, got shape {theta.shape}")
    acts = [replace(a, omega_b=theta[s][0], omega_s=theta[s][1], coeffs=theta[s][2:])
            for a, s in zip(m.activations, param_slices(m))]
    return replace(m, activations=tuple(acts))


def model_to_dict(m: GcphModel) -> dict:
    return {
        "version": MODEL_VERSION,
        "feature_names": list(m.feature_names),
        "standardization": [{"mean": mu, "sd": sd} for mu, sd in m.standardization],
        "centering_offset": m.centering_offset,
        "activations": [
            {
                "omega_b": a.omega_b,
                "omega_s": a.omega_s,
                "coeffs": [float(c) for c in a.coeffs],
                "grid": {"lo": a.grid.lo, "hi": a.grid.hi,
                         "num_intervals": a.grid.num_intervals, "order": a.grid.order},
                "basis": a.basis,
            }
            for a in m.activations
        ],
    }


def model_from_dict(d: dict) -> GcphModel:
    if d.get("version") != MODEL_VERSION:
        raise ConfigurationError(f"unsupported model version {d.get('version')!r}")
    acts = []
    for a in d["activations"]:
        g = a["grid"]
        grid = KnotGrid(float(g["lo"]), float(g["hi"]), int(g["num_intervals"]), int(g["order"]))
        acts.append(Activation(a["omega_b"], a["omega_s"], a["coeffs"], grid, a.get("basis", "silu")))
    return GcphModel(
        activations=tuple(acts),
        feature_names=tuple(d["feature_names"]),
        centering_offset=d["centering_offset"],
        standardization=tuple((s["mean"], s["sd"]) for s in d["standardization"]),
    )


def dumps_model(m: GcphModel) -> str:
    # json uses repr() for floats, which round-trips exactly
    return json.dumps(model_to_dict(m), indent=2) + "\n"


def loads_model(text: str) -> GcphModel:
    return model_from_dict(json.loads(text))


def save_model(m: GcphModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_model(m))


def load_model(path) -> GcphModel:
    with open(path, encoding="utf-8") as fh:
        return loads_model(fh.read())
