"""Memory sweeps, merge simulation and the small 2D demos.

A sweep cell is one ``(method, budget, seed)`` triple. Cells share
nothing, so results are sorted before they are written and a re-run of
any single row only needs the fields stored on it.
"""

from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .baselines import MemoryBudget, ReservoirSampler, CountSketchLS
from .dataset import Dataset, gen_synthetic_classification, gen_synthetic_regression, normalize
from .errors import InputError, NumericalError
from .lsh import Family, HashFamilyConfig
from .optimizer import OptimizerConfig, dfo_train, ols_solve
from .sketch import build_sketch, new_sketch, serialize

__all__ = [
    "StormSettings",
    "ExperimentResult",
    "run_sweep",
    "summarize",
    "write_results",
    "MergeReport",
    "simulate_edge_merge",
    "demo_regression",
    "demo_classification",
    "METHODS",
]

logger = logging.getLogger(__name__)

METHODS = ("storm", "sample", "cw")


@dataclass(frozen=True)
class StormSettings:
    """Sketch and optimizer settings for the ``storm`` method."""

    p: int = 4
    k: int = 8
    sigma: float = 0.5
    eta: float = 3.0
    eta_decay: str = "inverse_sqrt"
    iterations: int = 1000

    def optimizer(self, seed: int) -> OptimizerConfig:
        return OptimizerConfig(k=self.k, sigma=self.sigma, eta=self.eta, iterations=self.iterations,
                               seed=seed, eta_decay=self.eta_decay)


@dataclass
class ExperimentResult:
    method: str
    budget: int
    seed: int
    capacity: int = 0
    bytes_used: int = 0
    mse: float = float("nan")
    raw_mse: float = float("nan")
    ols_mse: float = float("nan")
    param_error: float = float("nan")
    skipped: bool = False
    reason: str = ""
    seconds: float = 0.0
    dataset: str = ""
    settings: dict = field(default_factory=dict)

    @property
    def mse_ratio(self) -> float:
        return self.mse / self.ols_mse

    def sort_key(self):
        return (self.method, self.budget, self.seed)


def _training_mse(ds: Dataset, theta) -> float:
    return float(np.mean((ds.y - ds.X @ theta) ** 2))


def _run_cell(ds, method, budget, seed, storm, ols_theta, ols_mse) -> ExperimentResult:
    res = ExperimentResult(method, budget, seed, ols_mse=ols_mse, dataset=ds.source_hash)
    mem = MemoryBudget(budget)
    t0 = time.perf_counter()
    try:
        if method == "storm":
            res.settings = asdict(storm)
            B = HashFamilyConfig(Family.PRP, storm.p, ds.d + 2).B
            R = mem.storm_rows(B)
            if R < 1:
                raise InputError(f"{budget} bytes cannot hold one sketch row")
            sk = build_sketch(ds, R=R, p=storm.p, seed=seed)
            theta = dfo_train(sk, storm.optimizer(seed)).theta
            res.capacity, res.bytes_used = R, sk.nbytes
        elif method == "sample":
            m = mem.sample_rows(ds.d)
            if m < 1:
                raise InputError(f"{budget} bytes cannot hold one sample row")
            smp = ReservoirSampler(m, ds.d, seed).extend(ds.X, ds.y)
            theta = smp.solve().theta
            res.capacity, res.bytes_used = m, smp.nbytes
        elif method == "cw":
            m = mem.cw_rows(ds.d)
            if m < ds.d + 1:
                raise InputError(f"count sketch needs {ds.d + 1} rows, budget holds {m}")
            cw = CountSketchLS(m, ds.d, seed).update(ds.X, ds.y)
            theta = cw.solve().theta
            res.capacity, res.bytes_used = m, cw.nbytes
        else:
            raise InputError(f"unknown method {method!r}")
    except (InputError, NumericalError) as exc:
        res.skipped, res.reason = True, str(exc)
        logger.info("skipped %s at %d bytes, seed %d: %s", method, budget, seed, exc)
        return res
    res.seconds = time.perf_counter() - t0
    res.mse = _training_mse(ds, theta)
    res.raw_mse = res.mse / ds.scale ** 2
    res.param_error = float(np.linalg.norm(theta - ols_theta) / np.linalg.norm(ols_theta))
    return res


def run_sweep(dataset: Dataset, budgets, methods=METHODS, seeds=range(10),
              storm: StormSettings = StormSettings()) -> list[ExperimentResult]:
    """Train every method at every byte budget and seed.

    STORM always sketches the whole dataset; the budget only sets ``R``.
    Budgets a method cannot use come back as skipped rows.
    """
    if not dataset.normalized or dataset.task != "regression":
        raise InputError("sweeps need a normalized regression dataset")
    unknown = set(methods) - set(METHODS)
    if unknown:
        raise InputError(f"unknown methods {sorted(unknown)}")
    ols_theta = ols_solve(dataset).theta
    ols_mse = _training_mse(dataset, ols_theta)
    out = []
    for method in methods:
        for budget in budgets:
            for seed in seeds:
                out.append(_run_cell(dataset, method, int(budget), int(seed), storm, ols_theta, ols_mse))
    return sorted(out, key=ExperimentResult.sort_key)


def summarize(results, stat=np.mean) -> dict:
    """``{method: [(budget, stat of mse), ...]}`` over non-skipped rows."""
    table = {}
    for r in results:
        if not r.skipped:
            table.setdefault(r.method, {}).setdefault(r.budget, []).append(r.mse)
    return {m: [(b, float(stat(v))) for b, v in sorted(per.items())] for m, per in table.items()}


def write_results(results, csv_path=None, json_path=None, timing_path=None) -> None:
    """Write sorted rows as CSV and/or JSON.

    Wall-clock seconds go to the separate ``timing_path`` CSV so that the
    result files themselves are byte-identical across re-runs.
    """
    ordered = sorted(results, key=ExperimentResult.sort_key)
    rows = []
    for r in ordered:
        row = asdict(r)
        del row["seconds"]
        rows.append(row)
    if csv_path is not None:
        with Path(csv_path).open("w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]) if rows else ["method"])
            w.writeheader()
            for row in rows:
                w.writerow(dict(row, settings=json.dumps(row["settings"], sort_keys=True)))
    if json_path is not None:
        Path(json_path).write_text(json.dumps(rows, indent=1, sort_keys=True) + "\n")
    if timing_path is not None:
        with Path(timing_path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["method", "budget", "seed", "seconds"])
            for r in ordered:
                w.writerow([r.method, r.budget, r.seed, f"{r.seconds:.6f}"])


@dataclass
class MergeReport:
    shards: int
    sketch_bytes: int
    transmitted_bytes: int
    raw_bytes: int
    bit_equal: bool
    merge_order: list
    theta: np.ndarray
    theta_single: np.ndarray


def simulate_edge_merge(dataset: Dataset, shards: int, seed: int = 0, R: int = 100, p: int = 4,
                        optimizer: OptimizerConfig = OptimizerConfig(iterations=100)) -> MergeReport:
    """Sketch ``shards`` slices of the stream separately and merge them along a random tree.

    Every device uses the same master seed. Each merge sends one sketch
    over one edge, so ``shards - 1`` sketches are transmitted in total.
    """
    if shards < 2:
        raise InputError("need at least two shards")
    if shards > dataset.n:
        raise InputError(f"{shards} shards for {dataset.n} rows")
    V = dataset.augmented()
    family = Family.PRP if dataset.task == "regression" else Family.CLASSIFICATION
    cfg = HashFamilyConfig(family, p, V.shape[1], seed)
    single = new_sketch(cfg, R).insert_many(V)
    pending = [new_sketch(cfg, R).insert_many(part) for part in np.array_split(V, shards)]
    rng = np.random.default_rng(seed)
    order = []
    transmitted = 0
    while len(pending) > 1:
        i, j = sorted(rng.choice(len(pending), 2, replace=False).tolist())
        order.append((i, j))
        transmitted += pending[j].nbytes
        pending[i] = pending[i].merge(pending.pop(j))
    merged = pending[0]
    equal = serialize(merged) == serialize(single)
    if not equal:
        raise AssertionError("merged sketch differs from single-device sketch")
    theta = dfo_train(merged, optimizer).theta
    theta_single = dfo_train(single, optimizer).theta
    raw = dataset.n * (dataset.d + (1 if dataset.task == "regression" else 0)) * 4
    return MergeReport(shards, single.nbytes, transmitted, raw, equal, order, theta, theta_single)


def demo_regression(seed: int = 0, n: int = 1000, slope: float = 0.7, R: int = 100, p: int = 4,
                    optimizer: OptimizerConfig | None = None, data_seed: int = 1) -> float:
    """Fit ``y = slope * x`` from a sketch of noiseless 1-feature data; returns the learned slope."""
    ds = normalize(gen_synthetic_regression(n, 1, [slope], 0.0, seed=data_seed))
    cfg = optimizer or OptimizerConfig(k=8, sigma=0.5, eta=3.0, iterations=100, eta_decay="inverse_sqrt")
    cfg = OptimizerConfig(cfg.k, cfg.sigma, cfg.eta, cfg.iterations, seed, cfg.eta_decay)
    return float(dfo_train(build_sketch(ds, R=R, p=p, seed=seed), cfg).theta[0])


def demo_classification(seed: int = 0, n: int = 500, separation: float = 6.0, R: int = 100, p: int = 1,
                        optimizer: OptimizerConfig | None = None, data_seed: int = 0) -> float:
    """Training accuracy of a sketch-trained separator on two 2D blobs."""
    ds = normalize(gen_synthetic_classification(n, separation, seed=data_seed))
    cfg = optimizer or OptimizerConfig(k=8, sigma=0.5, eta=1.0, iterations=100)
    cfg = OptimizerConfig(cfg.k, cfg.sigma, cfg.eta, cfg.iterations, seed, cfg.eta_decay)
    theta = dfo_train(build_sketch(ds, R=R, p=p, seed=seed), cfg).theta
    return float(np.mean(np.sign(ds.X @ theta) == ds.y))
