import numpy as np
import pytest

from stormsketch.baselines import (
    CountSketchLS,
    MemoryBudget,
    ReservoirSampler,
    cw_sketch_train,
    reservoir_sample_train,
)
from stormsketch.dataset import gen_synthetic_regression
from stormsketch.errors import IncompatibleSketchError, InputError
from stormsketch.optimizer import solve_least_squares


def test_budget_accounting():
    b = MemoryBudget(1000)
    assert b.sample_rows(9) == 25
    assert b.cw_rows(4) == 50
    assert b.storm_rows(16) == (1000 - 36) // 64
    with pytest.raises(InputError):
        MemoryBudget(0)


def test_reservoir_keeps_everything_when_room():
    X = np.arange(10.0).reshape(5, 2)
    s = ReservoirSampler(8, 2).extend(X, np.arange(5.0))
    Xs, ys = s.sample()
    np.testing.assert_array_equal(Xs, X)
    assert s.size == 5 and s.nbytes == 8 * 3 * 4


def test_reservoir_uniform_inclusion():
    # each of N=100 items lands in a size-10 reservoir with probability 0.1
    N, m, trials = 100, 10, 10_000
    hits = np.zeros(N)
    X = np.zeros((N, 1))
    y = np.arange(N, dtype=float)
    for t in range(trials):
        s = ReservoirSampler(m, 1, seed=t).extend(X, y)
        hits[s.indices[:s.size]] += 1
    sd = np.sqrt(trials * 0.1 * 0.9)
    assert np.all(np.abs(hits - trials * 0.1) < 3 * sd)
    assert abs(hits.sum() - trials * m) == 0


def test_reservoir_full_budget_is_ols():
    ds = gen_synthetic_regression(200, 4, noise_sigma=0.3, seed=1)
    budget = MemoryBudget(200 * 5 * 4)
    theta = reservoir_sample_train(ds.X, ds.y, budget).theta
    np.testing.assert_array_equal(theta, solve_least_squares(ds.X, ds.y).theta)


def test_reservoir_rejects_tiny_budget():
    with pytest.raises(InputError):
        reservoir_sample_train(np.ones((3, 4)), np.ones(3), 10)


def test_count_sketch_single_nonzero_per_column():
    cw = CountSketchLS(7, 2, seed=3)
    for i in range(50):
        e = CountSketchLS(7, 2, seed=3, offset=i).update([[1.0, 0.0]], [0.0])
        col = e.SA[:, 0]
        assert np.count_nonzero(col) == 1
        bucket, sign = cw.route(np.array([i]))
        assert col[bucket[0]] == sign[0]


def test_count_sketch_noiseless_exact():
    ds = gen_synthetic_regression(500, 3, [0.5, -1.0, 2.0], seed=2)
    np.testing.assert_allclose(cw_sketch_train(ds.X, ds.y, 20, seed=1).theta, [0.5, -1.0, 2.0], atol=1e-8)


def test_count_sketch_residual_within_twice_optimum():
    ds = gen_synthetic_regression(2000, 4, noise_sigma=0.5, seed=3)
    opt = np.sum((ds.y - ds.X @ solve_least_squares(ds.X, ds.y).theta) ** 2)
    ratios = []
    for s in range(20):
        theta = cw_sketch_train(ds.X, ds.y, 200, seed=s).theta
        ratios.append(np.sum((ds.y - ds.X @ theta) ** 2) / opt)
    assert np.median(ratios) <= 2.0 + 1e-10


def test_count_sketch_merge_equals_whole():
    ds = gen_synthetic_regression(300, 3, noise_sigma=0.1, seed=4)
    whole = CountSketchLS(30, 3, seed=9).update(ds.X, ds.y)
    a = CountSketchLS(30, 3, seed=9, offset=0).update(ds.X[:120], ds.y[:120])
    b = CountSketchLS(30, 3, seed=9, offset=120).update(ds.X[120:], ds.y[120:])
    merged = a.merge(b)
    np.testing.assert_allclose(merged.SA, whole.SA, rtol=1e-13, atol=1e-15)
    assert merged.seen == 300
    with pytest.raises(IncompatibleSketchError):
        a.merge(CountSketchLS(30, 3, seed=8))


def test_count_sketch_streaming_matches_batch():
    ds = gen_synthetic_regression(100, 2, seed=5)
    batch = CountSketchLS(10, 2, seed=1).update(ds.X, ds.y)
    stream = CountSketchLS(10, 2, seed=1)
    for x, y in zip(ds.X, ds.y):
        stream.update([x], [y])
    np.testing.assert_allclose(stream.SA, batch.SA, atol=1e-15)


def test_cw_rejects_too_few_rows():
    with pytest.raises(InputError):
        cw_sketch_train(np.ones((10, 4)), np.ones(10), 4)
