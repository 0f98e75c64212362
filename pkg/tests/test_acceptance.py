"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line (printed in the terminal summary)
at the stated tolerance before asserting.
"""

import math
import time

import numpy as np

from stormsketch.baselines import MemoryBudget, cw_sketch_train, reservoir_sample_train
from stormsketch.dataset import gen_synthetic_regression, normalize
from stormsketch.experiments import demo_classification, demo_regression, run_sweep, summarize
from stormsketch.lsh import Family, HashFamilyConfig, augment_query
from stormsketch.optimizer import OptimizerConfig, exact_surrogate_train, ols_solve, solve_least_squares
from stormsketch.sketch import build_sketch, new_sketch, serialize
from stormsketch.surrogate import (
    SurrogateParams,
    classification_loss_slope,
    exact_empirical_risk,
    normalized_margin,
    prp_gradient,
    prp_loss,
    prp_loss_slope,
)

THETA_STAR = np.array([0.5, -0.4, 0.9])
QUERIES = [THETA_STAR, np.zeros(3), np.array([1.0, 1.0, 1.0]), np.array([-0.6, 0.2, 0.1]),
           np.array([2.0, -1.5, 0.3])]


def _hundred_points():
    return normalize(gen_synthetic_regression(100, 3, THETA_STAR, 0.1, seed=21))


def test_criterion_01_estimator_unbiased(criterion):
    t0 = time.perf_counter()
    ds = _hundred_points()
    Q = augment_query(np.column_stack([np.array(QUERIES), -np.ones(len(QUERIES))]))
    est = np.array([build_sketch(ds, R=50, p=4, seed=s).estimate_many(Q) for s in range(500)])
    exact = np.array([exact_empirical_risk(q, ds).mean_surrogate for q in QUERIES])
    z = (est.mean(axis=0) - exact) / (est.std(axis=0, ddof=1) / math.sqrt(len(est)))
    elapsed = time.perf_counter() - t0
    ok = bool(np.all(np.abs(z) < 3)) and elapsed < 60
    criterion(1, "estimator mean within 3 SE at 5 queries (500 sketches, R=50, p=4)", ok,
              f"|z| = {np.round(np.abs(z), 2).tolist()}, {elapsed:.1f}s")


def test_criterion_02_variance_scaling(criterion):
    t0 = time.perf_counter()
    ds = _hundred_points()
    q = augment_query(np.array([0.2, 0.1, 0.4, -1.0]))
    Rs = [10, 40, 160, 640]
    var = [np.var([build_sketch(ds, R=R, seed=1000 * R + s).estimate_mean_loss(q).value for s in range(300)],
                  ddof=1) for R in Rs]
    slope = np.polyfit(np.log(Rs), np.log(var), 1)[0]
    elapsed = time.perf_counter() - t0
    ok = abs(slope + 1) <= 0.2 and elapsed < 120
    criterion(2, "log-variance vs log-R slope is -1 +- 0.2", ok, f"slope {slope:.3f}, {elapsed:.1f}s")


def test_criterion_03_mergeability(criterion):
    ds = normalize(gen_synthetic_regression(1000, 3, noise_sigma=0.2, seed=8))
    V = ds.augmented()
    results = {}
    for family in Family:
        cfg = HashFamilyConfig(family, 3, V.shape[1], seed=12345)
        whole = new_sketch(cfg, 64).insert_many(V)
        parts = [new_sketch(cfg, 64).insert_many(chunk) for chunk in np.array_split(V, 8)]
        merged = parts[0]
        for p in parts[1:]:
            merged = merged.merge(p)
        results[family.name] = serialize(merged) == serialize(whole)
    criterion(3, "8-shard merge bit-identical to single pass for every family", all(results.values()),
              str(results))


def test_criterion_04_surrogate_minimum_is_ols(criterion):
    t0 = time.perf_counter()
    theta = [0.5, -0.3, 0.8, 0.1, -0.6]
    cfg = OptimizerConfig(eta=50.0, iterations=300)
    errs = []
    for noise in (0.0, 0.1):
        ds = normalize(gen_synthetic_regression(10_000, 5, theta, noise, seed=3))
        ols = ols_solve(ds).theta
        fit = exact_surrogate_train(ds, SurrogateParams(4), cfg).theta
        errs.append(np.linalg.norm(fit - ols) / np.linalg.norm(ols))
    elapsed = time.perf_counter() - t0
    ok = errs[0] <= 1e-3 and errs[1] <= 5e-2 and elapsed < 60
    criterion(4, "surrogate minimiser vs OLS (noiseless <= 1e-3, noise 0.1 <= 5e-2)", ok,
              f"relative errors {errs[0]:.2e}, {errs[1]:.2e}, {elapsed:.1f}s")


def test_criterion_05_gradient_fidelity(criterion):
    rng = np.random.default_rng(2024)
    h = 1e-6
    worst, checked = 0.0, 0
    while checked < 100:
        d = int(rng.integers(1, 10))
        p = int(rng.choice([2, 4, 8]))
        theta_aug = np.append(rng.standard_normal(d), -1.0)
        b = rng.standard_normal(d + 1)
        b *= rng.uniform(0.05, 0.99) / np.linalg.norm(b)
        if abs(normalized_margin(theta_aug, b)) > 0.95:
            continue
        fd = np.array([(prp_loss(normalized_margin(theta_aug + h * e, b), p)
                        - prp_loss(normalized_margin(theta_aug - h * e, b), p)) / (2 * h)
                       for e in np.eye(d + 1)])
        g = prp_gradient(theta_aug, b, p)
        worst = max(worst, np.linalg.norm(g - fd) / np.linalg.norm(fd))
        checked += 1
    criterion(5, "analytic gradient vs central differences on 100 triples", worst < 1e-5,
              f"max relative error {worst:.2e}")


def test_criterion_06_convexity_and_calibration(criterion):
    t = np.arange(-1000, 1001) * 1e-3
    second = {p: float(np.min(np.diff(prp_loss(t, p), 2))) for p in (2, 4, 8)}
    slopes = {p: classification_loss_slope(0.0, p) for p in (1, 2, 4)}
    ok = all(v >= -1e-9 for v in second.values()) and all(v < 0 for v in slopes.values())
    criterion(6, "second differences >= -1e-9 and classification slope at 0 < 0", ok,
              f"min second diff {second}, slopes {{{', '.join(f'{p}: {v:.4f}' for p, v in slopes.items())}}}")


def test_criterion_07_slope_peaks_at_four(criterion):
    slopes = {p: prp_loss_slope(0.1, p) for p in (2, 4, 8, 16)}
    expected = {2: 0.0204, 4: 0.0307, 8: 0.0091}
    close = all(abs(slopes[p] - v) < 1e-4 for p, v in expected.items())
    ok = max(slopes, key=slopes.get) == 4 and close
    criterion(7, "loss slope at t=0.1 is largest for p=4; values near 0.0204/0.0307/0.0091", ok,
              ", ".join(f"p={p}: {v:.6f}" for p, v in slopes.items()))


def test_criterion_08_end_to_end_regression(criterion):
    t0 = time.perf_counter()
    slopes = [demo_regression(seed) for seed in range(10)]
    med = float(np.median(slopes))
    elapsed = time.perf_counter() - t0
    ok = abs(med - 0.7) <= 0.1 and elapsed < 60
    criterion(8, "sketch-trained slope within 0.1 of 0.7 (median of 10 seeds)", ok,
              f"median {med:.3f} from {np.round(slopes, 3).tolist()}, {elapsed:.1f}s")


def test_criterion_09_end_to_end_classification(criterion):
    acc = [demo_classification(seed) for seed in range(10)]
    med = float(np.median(acc))
    criterion(9, "training accuracy >= 95% on separated blobs (median of 10 seeds)", med >= 0.95,
              f"median {med:.3f}")


def test_criterion_10_baseline_sanity(criterion):
    d = 9
    ds = gen_synthetic_regression(2000, d, noise_sigma=0.3, seed=17)
    ols = solve_least_squares(ds.X, ds.y).theta
    full = reservoir_sample_train(ds.X, ds.y, MemoryBudget(ds.n * (d + 1) * 4), seed=1).theta
    exact = bool(np.array_equal(full, ols))
    opt = np.sum((ds.y - ds.X @ ols) ** 2)
    medians = []
    for mult in (2, 5, 10, 20):
        ratios = [np.sum((ds.y - ds.X @ cw_sketch_train(ds.X, ds.y, mult * (d + 1), seed=s).theta) ** 2) / opt
                  for s in range(20)]
        medians.append(float(np.median(ratios)))
    decreasing = all(b < a for a, b in zip(medians, medians[1:]))
    criterion(10, "reservoir at full budget equals OLS; CW residual ratio decreases in m", exact and decreasing,
              f"exact={exact}, CW median ratios {np.round(medians, 4).tolist()}")


def test_criterion_11_sweep_shape(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    u = rng.standard_normal(9)
    ds = normalize(gen_synthetic_regression(2000, 9, u / np.linalg.norm(u), 0.15, seed=5))
    # sample rows 4, 10, 50, 400, 25600; sketch rows 1, 5, 30, 250, 16000
    budgets = [160, 400, 2036, 16036, 1_024_036]
    results = run_sweep(ds, budgets, ["storm", "sample"], range(10))
    curves = summarize(results)
    ols = results[0].ols_mse
    sample = [m for _, m in curves["sample"]]
    storm = [m for _, m in curves["storm"]]
    bump = any(b > a for a, b in zip(sample, sample[1:]))
    final = storm[-1] / ols
    elapsed = time.perf_counter() - t0
    ok = bump and final <= 1.5 and elapsed < 600
    criterion(11, "sampling curve non-monotone; STORM MSE <= 1.5x OLS at the largest budget", ok,
              f"sample/OLS {np.round(np.array(sample) / ols, 3).tolist()}, "
              f"STORM/OLS {np.round(np.array(storm) / ols, 3).tolist()}, {elapsed:.0f}s")
