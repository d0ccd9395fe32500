"""Synthetic generators with known log-risk, CSV ingestion, and seeded splits.

Random streams come from numpy's PCG64 seeded through ``SeedSequence(seed,
spawn_key=(k,))`` with one key per purpose, so covariate draws and baseline
time draws never share state.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd

from .cox import SurvivalRecord
from .errors import ConfigurationError, DataError

STREAM_COVARIATES = 0
STREAM_BASELINE_TIME = 1
STREAM_SPLIT = 2


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(stream,)))


@dataclass(frozen=True)
class SyntheticConfig:
    kind: str = "linear"
    n: int = 2000
    lam: float = 5.0
    r: float = 2.0
    mean_t0: float = 5.0
    censor_fraction: float = 0.10
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("linear", "nonlinear"):
            raise ConfigurationError(f"kind must be 'linear' or 'nonlinear', got {self.kind!r}")
        if int(self.n) != self.n or self.n < 1:
            raise ConfigurationError("n must be a positive integer")
        if not (self.lam > 0 and self.r > 0 and self.mean_t0 > 0):
            raise ConfigurationError("lam, r and mean_t0 must be positive")
        if not 0 <= self.censor_fraction < 1:
            raise ConfigurationError("censor_fraction must lie in [0, 1)")


@dataclass(frozen=True)
class Dataset:
    """Covariates ``X`` stored on the standardized scale given by ``standardization``.

    ``standardization`` holds one ``(mean, sd)`` pair per column so that
    ``raw = X * sd + mean``; ``numeric`` flags which columns get re-standardized
    by :func:`split` (binary and one-hot columns keep ``(0, 1)``).
    """
    X: np.ndarray
    time: np.ndarray
    event: np.ndarray
    feature_names: tuple
    standardization: tuple = None
    numeric: tuple = None
    ground_truth: np.ndarray = None
    t0: np.ndarray = None
    encoder: object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        n = X.shape[0]
        V = X.shape[1] if X.ndim == 2 else 0
        if X.ndim != 2 or np.shape(self.time) != (n,) or np.shape(self.event) != (n,):
            raise DataError("X, time and event have inconsistent shapes")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "time", np.asarray(self.time, dtype=float))
        object.__setattr__(self, "event", np.asarray(self.event, dtype=bool))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        if len(self.feature_names) != V:
            raise DataError("feature_names does not match the number of columns")
        if self.standardization is None:
            object.__setattr__(self, "standardization", tuple((0.0, 1.0) for _ in range(V)))
        if self.numeric is None:
            object.__setattr__(self, "numeric", tuple(True for _ in range(V)))
        for name in ("ground_truth", "t0"):
            val = getattr(self, name)
            if val is not None:
                val = np.asarray(val, dtype=float)
                if val.shape != (n,):
                    raise DataError(f"{name} length does not match the records")
                object.__setattr__(self, name, val)

    def __len__(self):
        return self.X.shape[0]

    @property
    def records(self) -> list:
        return [SurvivalRecord(x, float(t), bool(e)) for x, t, e in zip(self.X, self.time, self.event)]

    def raw_X(self) -> np.ndarray:
        mean = np.array([m for m, _ in self.standardization])
        sd = np.array([s for _, s in self.standardization])
        return self.X * sd + mean

    @property
    def raw_ranges(self) -> list:
        raw = self.raw_X()
        return [(float(c.min()), float(c.max())) for c in raw.T] if len(self) else []

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        pick = lambda a: None if a is None else a[rows]  # noqa: E731
        return replace(self, X=self.X[rows], time=self.time[rows], event=self.event[rows],
                       ground_truth=pick(self.ground_truth), t0=pick(self.t0))

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for arr in (self.raw_X(), self.time, self.event.astype(np.uint8)):
            h.update(np.ascontiguousarray(arr).tobytes())
        h.update(json.dumps(self.feature_names).encode())
        return h.hexdigest()


def linear_log_risk(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return X[:, 0] + 2.0 * X[:, 1]


def nonlinear_log_risk(X, lam: float = 5.0, r: float = 2.0) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return np.log(lam) * np.exp(-(X[:, 0] ** 2 + X[:, 1] ** 2) / (2.0 * r**2))


def generate_synthetic(cfg: SyntheticConfig) -> Dataset:
    """Two U(-1, 1) covariates, ``t = t0 / exp(f(x))`` with ``t0 ~ Exp(mean_t0)``.

    Times above the ``1 - censor_fraction`` quantile are capped at that
    quantile and marked censored.
    """
    X = _rng(cfg.seed, STREAM_COVARIATES).uniform(-1.0, 1.0, size=(cfg.n, 2))
    t0 = _rng(cfg.seed, STREAM_BASELINE_TIME).exponential(cfg.mean_t0, size=cfg.n)
    if cfg.kind == "linear":
        f = linear_log_risk(X)
    else:
        f = nonlinear_log_risk(X, cfg.lam, cfg.r)
    t = t0 / np.exp(f)
    event = np.ones(cfg.n, dtype=bool)
    if cfg.censor_fraction > 0:
        cap = np.quantile(t, 1.0 - cfg.censor_fraction)
        event = t <= cap
        t = np.minimum(t, cap)
    return Dataset(X=X, time=t, event=event, feature_names=("x1", "x2"), ground_truth=f, t0=t0)


def _standardization_stats(raw: np.ndarray, numeric) -> tuple:
    stats = []
    for col, is_num in zip(raw.T, numeric):
        if not is_num:
            stats.append((0.0, 1.0))
            continue
        sd = float(col.std())
        stats.append((float(col.mean()), sd if sd > 0 else 1.0))
    return tuple(stats)


def restandardize(ds: Dataset, stats) -> Dataset:
    """Re-express ``ds`` on the scale given by ``stats``."""
    raw = ds.raw_X()
    mean = np.array([m for m, _ in stats])
    sd = np.array([s for _, s in stats])
    return replace(ds, X=(raw - mean) / sd, standardization=tuple(stats))


def split(ds: Dataset, test_fraction: float, seed: int):
    """Seeded shuffle split; numeric columns standardized with train statistics.

    Rows keep their original relative order within each part.
    """
    if not 0 < test_fraction < 1:
        raise ConfigurationError("test_fraction must lie in (0, 1)")
    n = len(ds)
    n_test = int(round(n * test_fraction))
    if n_test < 1 or n_test >= n:
        raise DataError(f"split of {n} rows at {test_fraction} leaves an empty part")
    perm = _rng(seed, STREAM_SPLIT).permutation(n)
    train = ds.subset(np.sort(perm[n_test:]))
    test = ds.subset(np.sort(perm[:n_test]))
    if not train.event.any():
        raise DataError("training part has no events")
    stats = _standardization_stats(train.raw_X(), ds.numeric)
    return restandardize(train, stats), restandardize(test, stats)


# ---------------------------------------------------------------------------
# CSV ingestion

@dataclass(frozen=True)
class CsvSchema:
    time_col: str = "time"
    event_col: str = "event"
    feature_cols: tuple = None  # None: every column not otherwise claimed
    categorical_cols: tuple = ()
    ignore_cols: tuple = ()
    truth_col: str = None

    @classmethod
    def from_dict(cls, d: dict) -> "CsvSchema":
        known = {"time_col", "event_col", "feature_cols", "categorical_cols", "ignore_cols", "truth_col"}
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown schema keys: {sorted(unknown)}")
        d = dict(d)
        for key in ("feature_cols", "categorical_cols", "ignore_cols"):
            if d.get(key) is not None:
                d[key] = tuple(d[key])
        return cls(**d)

    @classmethod
    def load(cls, path) -> "CsvSchema":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class CsvEncoder:
    """Column encodings learned from one CSV and reusable on another.

    ``columns`` holds ``(source, kind, levels)`` with kind ``numeric``,
    ``binary`` (levels[1] maps to 1) or ``categorical`` (one-hot, levels[0]
    dropped as reference).
    """
    columns: tuple

    @property
    def feature_names(self) -> tuple:
        names = []
        for src, kind, levels in self.columns:
            if kind == "categorical":
                names += [f"{src}_{lev}" for lev in levels[1:]]
            else:
                names.append(src)
        return tuple(names)

    @property
    def numeric(self) -> tuple:
        flags = []
        for _, kind, levels in self.columns:
            flags += [False] * (len(levels) - 1) if kind == "categorical" else [kind == "numeric"]
        return tuple(flags)

    @classmethod
    def fit(cls, df: pd.DataFrame, schema: CsvSchema) -> "CsvEncoder":
        cats = set(schema.categorical_cols)
        cols = []
        for src in _feature_columns(df, schema):
            values = df[src]
            if src in cats:
                cols.append((src, "categorical", tuple(sorted(set(values)))))
                continue
            parsed = _to_float(values)
            distinct = sorted(set(values))
            if parsed.isna().any():
                if len(distinct) == 2:
                    cols.append((src, "binary", tuple(distinct)))
                    continue
                _raise_unparseable(df, src, parsed)
            levels = sorted(set(parsed))
            if len(levels) == 2:
                cols.append((src, "binary", tuple(levels)))
            else:
                cols.append((src, "numeric", ()))
        return cls(tuple(cols))

    def transform(self, df: pd.DataFrame) -> np.ndarray:
        out = []
        for src, kind, levels in self.columns:
            if src not in df.columns:
                raise DataError(f"missing column {src!r}")
            values = df[src]
            if kind == "numeric":
                parsed = _to_float(values)
                if parsed.isna().any():
                    _raise_unparseable(df, src, parsed)
                out.append(parsed.to_numpy(dtype=float))
                continue
            if kind == "binary" and isinstance(levels[0], (int, float)):
                values = _to_float(values)
            unknown = ~values.isin(levels)
            if unknown.any():
                row = int(np.flatnonzero(unknown.to_numpy())[0])
                raise DataError(f"unknown category {values.iloc[row]!r} in column {src!r} at row {row}")
            if kind == "binary":
                out.append((values == levels[1]).to_numpy(dtype=float))
            else:
                out += [(values == lev).to_numpy(dtype=float) for lev in levels[1:]]
        return np.column_stack(out) if out else np.zeros((len(df), 0))

    def to_dict(self) -> dict:
        return {"columns": [[s, k, list(l)] for s, k, l in self.columns]}

    @classmethod
    def from_dict(cls, d: dict) -> "CsvEncoder":
        return cls(tuple((s, k, tuple(l)) for s, k, l in d["columns"]))


def _feature_columns(df: pd.DataFrame, schema: CsvSchema) -> list:
    if schema.feature_cols is not None:
        cols = list(schema.feature_cols)
        cols += [c for c in schema.categorical_cols if c not in cols]
    else:
        claimed = {schema.time_col, schema.event_col, schema.truth_col, *schema.ignore_cols}
        cols = [c for c in df.columns if c not in claimed]
    missing = [c for c in cols if c not in df.columns]
    if missing:
        raise DataError(f"missing column(s): {missing}")
    return cols


def _to_float(values: pd.Series) -> pd.Series:
    """Correctly rounded string-to-float parsing; unparseable cells become NaN."""
    def conv(v):
        try:
            return float(v)
        except (TypeError, ValueError):
            return np.nan
    return values.map(conv).astype(float)


def _raise_unparseable(df, col, parsed):
    row = int(np.flatnonzero(parsed.isna().to_numpy())[0])
    raise DataError(f"unparseable value {df[col].iloc[row]!r} in column {col!r} at row {row}")


def _parse_event(df: pd.DataFrame, col: str) -> np.ndarray:
    raw = df[col].astype(str).str.strip().str.lower()
    mapping = {"1": True, "0": False, "true": True, "false": False, "1.0": True, "0.0": False}
    bad = ~raw.isin(mapping.keys())
    if bad.any():
        row = int(np.flatnonzero(bad.to_numpy())[0])
        raise DataError(f"event value {df[col].iloc[row]!r} at row {row} is not 0/1")
    return raw.map(mapping).to_numpy(dtype=bool)


def load_csv(path, schema: CsvSchema = None, encoder: CsvEncoder = None,
             standardization=None) -> Dataset:
    """Read a header-first, comma-separated UTF-8 survival table.

    Categorical columns are one-hot encoded dropping the lexicographically
    first level; two-valued columns become 0/1; remaining numeric columns are
    z-scored with this file's mean and sd unless ``standardization`` is given.
    Pass the ``encoder`` of a training file to encode a test file identically.
    """
    schema = schema or CsvSchema()
    df = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    for col in (schema.time_col, schema.event_col):
        if col not in df.columns:
            raise DataError(f"missing column {col!r}")
    time = _to_float(df[schema.time_col])
    if time.isna().any():
        _raise_unparseable(df, schema.time_col, time)
    if (time <= 0).any():
        row = int(np.flatnonzero((time <= 0).to_numpy())[0])
        raise DataError(f"non-positive time at row {row}")
    event = _parse_event(df, schema.event_col)
    truth = None
    if schema.truth_col is not None and schema.truth_col in df.columns:
        truth = _to_float(df[schema.truth_col])
        if truth.isna().any():
            _raise_unparseable(df, schema.truth_col, truth)
        truth = truth.to_numpy(dtype=float)

    if encoder is None:
        encoder = CsvEncoder.fit(df, schema)
    raw = encoder.transform(df)
    numeric = encoder.numeric
    if standardization is None:
        stats = []
        for name, col, is_num in zip(encoder.feature_names, raw.T, numeric):
            if not is_num:
                stats.append((0.0, 1.0))
                continue
            sd = float(col.std())
            if sd == 0:
                raise DataError(f"cannot standardize constant column {name!r}")
            stats.append((float(col.mean()), sd))
        standardization = tuple(stats)
    mean = np.array([m for m, _ in standardization])
    sd = np.array([s for _, s in standardization])
    return Dataset(X=(raw - mean) / sd, time=time.to_numpy(dtype=float), event=event,
                   feature_names=encoder.feature_names, standardization=tuple(standardization),
                   numeric=numeric, ground_truth=truth, encoder=encoder)


def write_csv(ds: Dataset, path, include_truth: bool = True) -> None:
    """Write raw covariates, time, event (and ground truth) with lossless floats."""
    raw = ds.raw_X()
    header = list(ds.feature_names) + ["time", "event"]
    with_truth = include_truth and ds.ground_truth is not None
    if with_truth:
        header.append("truth")
    lines = [",".join(header)]
    for i in range(len(ds)):
        cells = [repr(float(v)) for v in raw[i]] + [repr(float(ds.time[i])), str(int(ds.event[i]))]
        if with_truth:
            cells.append(repr(float(ds.ground_truth[i])))
        lines.append(",".join(cells))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
