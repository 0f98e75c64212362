"""Command-line entry point: ``stormsketch <command> ...``.

Exit codes: 0 on success, 1 for bad input (files, arguments, sketches),
2 for numerical failures (singular systems, divergence).
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .dataset import gen_synthetic_classification, gen_synthetic_regression, load_csv, normalize, save_csv
from .errors import InputError, NumericalError
from .experiments import METHODS, StormSettings, run_sweep, summarize, write_results
from .lsh import Family
from .optimizer import OptimizerConfig, dfo_train
from .sketch import Sketch, build_sketch

logger = logging.getLogger("stormsketch")

FAMILIES = {"prp": Family.PRP, "classification": Family.CLASSIFICATION, "composed": Family.COMPOSED}


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.replace(",", " ").split()]


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.replace(",", " ").split()]


def _add_csv_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("data", help="numeric CSV file")
    p.add_argument("--delimiter", default=",")
    p.add_argument("--header", action="store_true", help="first line is a header")
    p.add_argument("--target-column", type=int, default=-1)
    p.add_argument("--task", choices=["regression", "classification"], default="regression")


def _load(args):
    return load_csv(args.data, delimiter=args.delimiter, header=args.header,
                    target_column=args.target_column, task=args.task)


def cmd_gen(args) -> None:
    if args.task == "regression":
        theta = _floats(args.theta) if args.theta else None
        ds = gen_synthetic_regression(args.n, args.d, theta, args.noise, seed=args.seed)
    else:
        ds = gen_synthetic_classification(args.n, args.separation, seed=args.seed)
    save_csv(ds, args.out, header=not args.no_header)
    print(f"wrote {ds.n} rows x {ds.d} features to {args.out}")


def cmd_sketch(args) -> None:
    ds = normalize(_load(args), c_max=args.c_max, norm_bound=args.norm_bound)
    family = FAMILIES[args.family] if args.family else None
    sk = build_sketch(ds, R=args.R, p=args.p, seed=args.seed, family=family)
    sk.save(args.out)
    print(json.dumps({"out": str(args.out), "N": sk.N, "R": sk.R, "B": sk.B, "bytes": sk.nbytes,
                      "scale": ds.scale, "clipped": ds.clipped, "d": ds.d}))


def cmd_merge(args) -> None:
    sketches = [Sketch.load(p) for p in args.inputs]
    merged = sketches[0]
    for other in sketches[1:]:
        merged = merged.merge(other)
    merged.save(args.out)
    print(json.dumps({"out": str(args.out), "N": merged.N, "inputs": len(sketches)}))


def cmd_train(args) -> None:
    sk = Sketch.load(args.sketch)
    cfg = OptimizerConfig(k=args.k, sigma=args.sigma, eta=args.eta, iterations=args.iterations,
                          seed=args.seed, eta_decay=args.eta_decay)
    trace = dfo_train(sk, cfg, median_of_means=args.median_of_means)
    out = {"theta": trace.theta.tolist(), "family": trace.family, "final_loss": trace.losses[-1],
           "optimizer": asdict(cfg), "sketch": str(args.sketch)}
    Path(args.out).write_text(json.dumps(out, indent=1) + "\n")
    if args.trace:
        Path(args.trace).write_text(trace.to_jsonl())
    print(json.dumps({"theta": out["theta"], "final_loss": out["final_loss"]}))


def cmd_eval(args) -> None:
    theta = np.asarray(json.loads(Path(args.theta).read_text())["theta"], dtype=np.float64)
    ds = _load(args)
    X = ds.X if ds.task == "regression" else np.column_stack([ds.X, -np.ones(ds.n)])
    if theta.shape[0] != X.shape[1]:
        raise InputError(f"theta has {theta.shape[0]} entries, data needs {X.shape[1]}")
    pred = X @ theta
    report = {"n": ds.n, "d": ds.d}
    if ds.task == "regression":
        report["mse"] = float(np.mean((ds.y - pred) ** 2))
    else:
        report["accuracy"] = float(np.mean(np.sign(pred) == ds.y))
    print(json.dumps(report))


def _sweep_dataset(cfg: configparser.ConfigParser, base: Path):
    sec = cfg["data"]
    c_max = sec.getfloat("c_max", 0.99)
    if "csv" in sec:
        path = base / sec["csv"]
        ds = load_csv(path, delimiter=sec.get("delimiter", ","), header=sec.getboolean("header", False),
                      target_column=sec.getint("target_column", -1))
    else:
        n, d = sec.getint("n"), sec.getint("d")
        if n is None or d is None:
            raise InputError("[data] needs either csv or n and d")
        theta = _floats(sec["theta"]) if "theta" in sec else None
        ds = gen_synthetic_regression(n, d, theta, sec.getfloat("noise", 0.0), seed=sec.getint("seed", 0))
    return normalize(ds, c_max=c_max)


def load_sweep_config(path):
    """Parse a sweep INI file into ``(dataset, budgets, methods, seeds, storm settings, output prefix)``."""
    path = Path(path)
    cfg = configparser.ConfigParser()
    if not cfg.read(path):
        raise InputError(f"cannot read config {path}")
    for needed in ("data", "sweep"):
        if needed not in cfg:
            raise InputError(f"config {path} lacks a [{needed}] section")
    sw = cfg["sweep"]
    if "seeds" not in sw or "budgets" not in sw:
        raise InputError("[sweep] must list budgets and seeds explicitly")
    methods = [m for m in METHODS if m in cfg]
    if not methods:
        raise InputError(f"config names no method section (choose from {', '.join(METHODS)})")
    storm = StormSettings()
    if "storm" in cfg:
        st = cfg["storm"]
        storm = StormSettings(p=st.getint("p", storm.p), k=st.getint("k", storm.k),
                              sigma=st.getfloat("sigma", storm.sigma), eta=st.getfloat("eta", storm.eta),
                              eta_decay=st.get("eta_decay", storm.eta_decay),
                              iterations=st.getint("iterations", storm.iterations))
    output = path.parent / sw.get("output", path.stem)
    return _sweep_dataset(cfg, path.parent), _ints(sw["budgets"]), methods, _ints(sw["seeds"]), storm, output


def cmd_sweep(args) -> None:
    ds, budgets, methods, seeds, storm, output = load_sweep_config(args.config)
    if args.output:
        output = Path(args.output)
    results = run_sweep(ds, budgets, methods, seeds, storm)
    write_results(results, output.with_suffix(".csv"), output.with_suffix(".json"),
                  output.with_name(output.name + ".timing.csv"))
    ols = results[0].ols_mse
    for method, curve in summarize(results).items():
        print(method, " ".join(f"{b}:{m / ols:.3f}" for b, m in curve))
    print(f"wrote {output.with_suffix('.csv')} and {output.with_suffix('.json')}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stormsketch", description="Train linear models on mergeable LSH count sketches.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write a synthetic dataset as CSV")
    p.add_argument("--task", choices=["regression", "classification"], default="regression")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--theta", help="comma-separated true parameter (regression)")
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--separation", type=float, default=4.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-header", action="store_true")
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("sketch", help="sketch a CSV into a .strm file")
    _add_csv_options(p)
    p.add_argument("-R", "--R", type=int, default=100)
    p.add_argument("-p", "--p", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--family", choices=sorted(FAMILIES))
    p.add_argument("--c-max", type=float, default=0.99)
    p.add_argument("--norm-bound", type=float,
                   help="a-priori row norm bound for one-pass scaling; larger rows are clipped")
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_sketch)

    p = sub.add_parser("merge", help="add sketches built with the same configuration")
    p.add_argument("inputs", nargs="+")
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_merge)

    p = sub.add_parser("train", help="fit a model on a sketch")
    p.add_argument("sketch")
    p.add_argument("--k", type=int, default=8)
    p.add_argument("--sigma", type=float, default=0.5)
    p.add_argument("--eta", type=float, default=3.0)
    p.add_argument("--eta-decay", choices=["none", "inverse_sqrt"], default="inverse_sqrt")
    p.add_argument("--iterations", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--median-of-means", type=int)
    p.add_argument("-o", "--out", required=True, help="theta JSON")
    p.add_argument("--trace", help="per-iteration JSONL trace")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a trained theta on a CSV")
    _add_csv_options(p)
    p.add_argument("--theta", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="run a memory sweep from an INI config")
    p.add_argument("config")
    p.add_argument("-o", "--output", help="output prefix (overrides the config)")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (InputError, OSError, ValueError, KeyError, configparser.Error) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
