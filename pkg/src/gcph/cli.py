"""Batch front end: ``gcph simulate | train | eval | symbolify | sweep``.

Every command writes its artifacts plus ``manifest.json`` into ``--out``.
Exit codes: 0 ok, 1 usage, 2 data error, 3 numerical abort.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .cox import fit_linear_cph
from .datasets import CsvSchema, SyntheticConfig, generate_synthetic, load_csv, write_csv
from .errors import ConfigurationError, DataError, GcphError, InputError, NumericalError
from .kan import GcphModel, dumps_model, load_model, log_risk_batch, per_feature_curve
from .metrics import evaluate_at_horizons
from .symbolic import render_formula, symbolify
from .trainer import RegConfig, TrainConfig, l1_norm_per_activation, linear_model, train

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _int_list(text: str) -> list:
    """Parse ``1,2,3`` or an inclusive range ``1..5``."""
    text = str(text).strip()
    if ".." in text:
        lo, hi = text.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(s) for s in text.split(",") if s.strip()]


def _float_list(text: str) -> list:
    return [float(s) for s in str(text).split(",") if s.strip()]


def _add_common(p):
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config", help="JSON file of option defaults; flags take precedence")


def _add_schema(p):
    p.add_argument("--schema", help="JSON schema {time_col, event_col, categorical_cols, ...}")
    p.add_argument("--time-col", default="time")
    p.add_argument("--event-col", default="event")
    p.add_argument("--categorical", default="", help="comma-separated categorical columns")
    p.add_argument("--truth-col", default="truth", help="optional ground-truth column, excluded from features")


def _add_training(p, sweep=False):
    p.add_argument("--num-intervals", type=int, default=5)
    if not sweep:
        p.add_argument("--order", type=int, default=3)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--init-coeff-sd", type=float, default=0.1)
    p.add_argument("--mu1", type=float, default=1.0)
    p.add_argument("--mu2", type=float, default=10.0)
    if not sweep:
        p.add_argument("--gamma", type=float, default=0.1)


def build_parser() -> _Parser:
    parser = _Parser(prog="gcph", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"gcph {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="write a synthetic dataset CSV")
    _add_common(p)
    p.add_argument("--kind", choices=("linear", "nonlinear"), required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lam", type=float, default=5.0)
    p.add_argument("--r", type=float, default=2.0)
    p.add_argument("--mean-t0", type=float, default=5.0)
    p.add_argument("--censor-fraction", type=float, default=0.10)
    p.add_argument("--name", default="data.csv", help="output file name")

    p = sub.add_parser("train", help="fit GCPH, GCPH-l or linear CPH")
    _add_common(p)
    _add_schema(p)
    _add_training(p)
    p.add_argument("--data", required=True, help="training CSV")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--seeds", help="comma list; writes one model per seed")
    p.add_argument("--linear-only", action="store_true", help="GCPH-l: identity activations")
    p.add_argument("--cph", action="store_true", help="Newton-Raphson linear CPH baseline")

    p = sub.add_parser("eval", help="C-index and Brier score at train-time quartiles")
    _add_common(p)
    _add_schema(p)
    p.add_argument("--model", nargs="+", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--oracle-truth", action="store_true", help="also score the ground-truth column")
    p.add_argument("--surface", action="store_true", help="emit f on a 101x101 grid over [-1,1]^2")

    p = sub.add_parser("symbolify", help="closed-form formula and per-feature curves")
    _add_common(p)
    _add_schema(p)
    p.add_argument("--model", nargs="+", required=True)
    p.add_argument("--train", help="training CSV giving feature ranges (default: from model grids)")
    p.add_argument("--decimals", type=int, default=2)
    p.add_argument("--points", type=int, default=201)
    p.add_argument("--threshold", type=float, default=0.05)

    p = sub.add_parser("sweep", help="ablation over spline order or gamma")
    _add_common(p)
    _add_schema(p)
    _add_training(p, sweep=True)
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    axis = p.add_mutually_exclusive_group(required=True)
    axis.add_argument("--order", help="spline orders, e.g. 1..5 or 1,2,3 (gamma fixed at 0.1)")
    axis.add_argument("--gamma", help="gamma values, e.g. 0,0.1,1 (order fixed at 3)")
    p.add_argument("--seeds", default="0")
    return parser


def parse_args(argv) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                config = json.load(fh)
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(config, dict):
            raise UsageError("config file must hold a JSON object")
        config = {k.replace("-", "_"): v for k, v in config.items()}
        unknown = set(config) - set(vars(args))
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        # re-parse so explicit flags override config values
        sub = parser._subparsers._group_actions[0].choices[args.command]
        sub.set_defaults(**config)
        args = parser.parse_args(argv)
    return args


def _schema(args) -> CsvSchema:
    if args.schema:
        return CsvSchema.load(args.schema)
    cats = tuple(c for c in args.categorical.split(",") if c)
    return CsvSchema(time_col=args.time_col, event_col=args.event_col,
                     categorical_cols=cats, truth_col=args.truth_col)


def _file_hash(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


class _Run:
    """Collects artifacts and writes the manifest."""

    def __init__(self, args, inputs=()):
        self.args = args
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.inputs = {str(p): _file_hash(p) for p in inputs}
        self.artifacts = []
        self.started = time.perf_counter()

    def write(self, name: str, text: str) -> Path:
        path = self.out / name
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        self.artifacts.append(name)
        return path

    def finish(self, seeds=()):
        config = {k: v for k, v in sorted(vars(self.args).items()) if k != "func"}
        manifest = {
            "command": self.args.command,
            "version": __version__,
            "config": config,
            "seeds": list(seeds),
            "inputs": self.inputs,
            "artifacts": self.artifacts,
            "wall_clock_seconds": round(time.perf_counter() - self.started, 3),
        }
        with open(self.out / "manifest.json", "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2)
            fh.write("\n")


def _json(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def cmd_simulate(args) -> int:
    cfg = SyntheticConfig(kind=args.kind, n=args.n, lam=args.lam, r=args.r, mean_t0=args.mean_t0,
                          censor_fraction=args.censor_fraction, seed=args.seed)
    ds = generate_synthetic(cfg)
    run = _Run(args)
    path = run.out / args.name
    write_csv(ds, path)
    run.artifacts.append(args.name)
    run.finish(seeds=[args.seed])
    q = np.quantile(ds.time, [0.25, 0.5, 0.75])
    print(f"wrote {path}: n={len(ds)} censor_rate={1 - ds.event.mean():.4f} "
          f"time_quartiles={q[0]:.4f},{q[1]:.4f},{q[2]:.4f}")
    return EXIT_OK


def _train_configs(args, seed, order=None, gamma=None):
    tcfg = TrainConfig(num_intervals=args.num_intervals, order=args.order if order is None else order,
                       learning_rate=args.lr, max_steps=args.steps, seed=seed,
                       linear_only=getattr(args, "linear_only", False), init_coeff_sd=args.init_coeff_sd)
    return tcfg, RegConfig(mu1=args.mu1, mu2=args.mu2, gamma=args.gamma if gamma is None else gamma)


def cmd_train(args) -> int:
    ds = load_csv(args.data, _schema(args))
    run = _Run(args, inputs=[args.data])
    if ds.encoder is not None:
        run.write("encoder.json", _json(ds.encoder.to_dict()))
    if args.cph:
        fit = fit_linear_cph(ds.X, ds.time, ds.event)
        model = linear_model(fit.beta, ds.X, ds.feature_names, ds.standardization)
        run.write("model.json", dumps_model(model))
        run.finish()
        print(f"linear CPH converged={fit.converged} iterations={fit.iterations} beta={list(fit.beta)}")
        return EXIT_OK
    seeds = _int_list(args.seeds) if args.seeds else [args.seed]
    multi = args.seeds is not None
    for seed in seeds:
        tcfg, rcfg = _train_configs(args, seed)
        model, log = train(ds, tcfg, rcfg)
        suffix = f"_seed{seed}" if multi else ""
        run.write(f"model{suffix}.json", dumps_model(model))
        run.write(f"train_log{suffix}.csv", log.to_csv())
        summary = f"seed={seed} best_step={log.best_step} loss={log.best_loss:.6f}"
        if args.linear_only:
            w = [a.omega_b for a in model.activations]
            summary += f" slopes={w}"
            if len(w) >= 2 and w[0] != 0:
                summary += f" slope_ratio={w[1] / w[0]:.4f}"
        print(summary)
    run.finish(seeds=seeds)
    return EXIT_OK


def _load_pair(args):
    schema = _schema(args)
    train_ds = load_csv(args.train, schema)
    test_ds = load_csv(args.test, schema, encoder=train_ds.encoder)
    return train_ds, test_ds


def _model_scores(model: GcphModel, ds) -> np.ndarray:
    return log_risk_batch(model, model.standardize(ds.raw_X()))


def _summary(results) -> list:
    out = []
    for k, label in enumerate(("p25", "p50", "p75")):
        row = {"horizon_label": label}
        for key in ("c_index", "c_index_untruncated", "brier"):
            vals = [r["rows"][k][key] for r in results if r["rows"][k][key] is not None]
            row[f"{key}_mean"] = float(np.mean(vals)) if vals else None
            row[f"{key}_sd"] = float(np.std(vals, ddof=1)) if len(vals) > 1 else None
        out.append(row)
    return out


def cmd_eval(args) -> int:
    train_ds, test_ds = _load_pair(args)
    run = _Run(args, inputs=[args.train, args.test, *args.model])
    results = []
    models = [(path, load_model(path)) for path in args.model]
    for path, model in models:
        rows = evaluate_at_horizons(train_ds.time, train_ds.event, _model_scores(model, train_ds),
                                    test_ds.time, test_ds.event, _model_scores(model, test_ds))
        results.append({"model": Path(path).name, "rows": rows})
    report = {"models": results, "summary": _summary(results)}
    if args.oracle_truth:
        if train_ds.ground_truth is None or test_ds.ground_truth is None:
            raise DataError("--oracle-truth needs a ground-truth column in both CSVs")
        report["oracle_truth"] = evaluate_at_horizons(
            train_ds.time, train_ds.event, train_ds.ground_truth,
            test_ds.time, test_ds.event, test_ds.ground_truth)
    run.write("metrics.json", _json(report))
    if args.surface:
        axis = np.linspace(-1.0, 1.0, 101)
        g1, g2 = np.meshgrid(axis, axis, indexing="ij")
        grid_raw = np.column_stack([g1.ravel(), g2.ravel()])
        for k, (path, model) in enumerate(models):
            if model.num_features != 2:
                raise InputError("--surface needs two-feature models")
            f = log_risk_batch(model, model.standardize(grid_raw))
            lines = ["x1,x2,f"] + [f"{a!r},{b!r},{c!r}" for (a, b), c in zip(grid_raw.tolist(), f.tolist())]
            run.write(f"surface_{Path(path).stem}.csv", "\n".join(lines) + "\n")
    run.finish()
    for res in results:
        cells = " ".join(f"{r['horizon_label']}:C={_fmt(r['c_index'])},B={_fmt(r['brier'])}" for r in res["rows"])
        print(f"{res['model']} {cells}")
    return EXIT_OK


def _fmt(v):
    return "null" if v is None else f"{v:.4f}"


def _training_range(model: GcphModel, v: int):
    """Recover the training min/max from the padded knot grid."""
    g = model.activations[v].grid
    span = (g.hi - g.lo) / 1.02
    return g.lo + 0.01 * span, g.hi - 0.01 * span


def cmd_symbolify(args) -> int:
    models = [(Path(p), load_model(p)) for p in args.model]
    run = _Run(args, inputs=list(args.model) + ([args.train] if args.train else []))
    train_ds = load_csv(args.train, _schema(args)) if args.train else None
    formulas, structured = [], []
    for path, model in models:
        if train_ds is not None:
            X = model.standardize(train_ds.raw_X())
        else:
            X = np.array([_training_range(model, v) for v in range(model.num_features)]).T
        sm = symbolify(model, X, n_points=args.points, prune_threshold=args.threshold)
        formula = render_formula(sm, args.decimals)
        formulas.append(formula)
        structured.append({"model": path.name, "formula": formula,
                           "feature_names": list(model.feature_names), **sm.to_dict()})
    run.write("formula.txt", "\n".join(formulas) + "\n")
    run.write("symbolic.json", _json(structured if len(structured) > 1 else structured[0]))

    ref = models[0][1]
    for v, name in enumerate(ref.feature_names):
        mean, sd = ref.standardization[v]
        if train_ds is not None:
            raw = train_ds.raw_X()[:, v]
            lo, hi = float(raw.min()), float(raw.max())
        else:
            lo, hi = (mean + sd * e for e in _training_range(ref, v))
        xs_raw = np.linspace(lo, hi, args.points)
        cols = []
        for _, model in models:
            m_mean, m_sd = model.standardization[v]
            cols.append(per_feature_curve(model, v, (xs_raw - m_mean) / m_sd))
        header = ["x"] + [p.stem for p, _ in models]
        lines = [",".join(header)]
        for i, x in enumerate(xs_raw.tolist()):
            lines.append(",".join([repr(x)] + [repr(float(c[i])) for c in cols]))
        run.write(f"curves_{name}.csv", "\n".join(lines) + "\n")
    run.finish()
    print("\n".join(formulas))
    return EXIT_OK


def cmd_sweep(args) -> int:
    train_ds, test_ds = _load_pair(args)
    run = _Run(args, inputs=[args.train, args.test])
    seeds = _int_list(args.seeds)
    if args.order is not None:
        axis, values = "order", _int_list(args.order)
    else:
        axis, values = "gamma", _float_list(args.gamma)
    lines = ["axis,axis_value,seed,horizon,horizon_t,c_index,brier,l1,status"]
    failures = 0
    for value in values:
        for seed in seeds:
            try:
                if axis == "order":
                    tcfg, rcfg = _train_configs(args, seed, order=int(value), gamma=0.1)
                else:
                    tcfg, rcfg = _train_configs(args, seed, order=3, gamma=float(value))
                model, _ = train(train_ds, tcfg, rcfg)
                rows = evaluate_at_horizons(train_ds.time, train_ds.event, log_risk_batch(model, train_ds.X),
                                            test_ds.time, test_ds.event, _model_scores(model, test_ds))
                l1 = float(l1_norm_per_activation(model, train_ds.X).sum())
            except GcphError as exc:
                failures += 1
                print(f"{axis}={value} seed={seed}: {exc}", file=sys.stderr)
                lines.append(f"{axis},{value},{seed},,,,,,error")
                continue
            for r in rows:
                lines.append(f"{axis},{value},{seed},{r['horizon_label']},{r['horizon_t']!r},"
                             f"{_csv_num(r['c_index'])},{_csv_num(r['brier'])},{l1!r},ok")
    run.write("sweep.csv", "\n".join(lines) + "\n")
    run.finish(seeds=seeds)
    print(f"wrote {len(lines) - 1} rows to {run.out / 'sweep.csv'}")
    return EXIT_DATA if failures else EXIT_OK


def _csv_num(v):
    return "" if v is None else repr(float(v))


COMMANDS = {"simulate": cmd_simulate, "train": cmd_train, "eval": cmd_eval,
            "symbolify": cmd_symbolify, "sweep": cmd_sweep}


def main(argv=None) -> int:
    try:
        args = parse_args(sys.argv[1:] if argv is None else argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except NumericalError as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (GcphError, OSError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
