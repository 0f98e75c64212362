import numpy as np
import pytest

from stormsketch.dataset import (
    Dataset,
    gen_synthetic_classification,
    gen_synthetic_regression,
    load_csv,
    normalize,
    save_csv,
)
from stormsketch.errors import DegenerateDataError, InputError
from stormsketch.lsh import augment_data
from stormsketch.optimizer import ols_solve


def test_load_three_line_csv(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("1,2,3\n4,5,6\n7,8,9\n")
    ds = load_csv(path)
    assert ds.n == 3 and ds.d == 2
    np.testing.assert_array_equal(ds.y, [3, 6, 9])
    np.testing.assert_array_equal(ds.X[:, 0], [1, 4, 7])


def test_load_header_and_target_column(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("y;a;b\n1;2;3\n4;5;6\n")
    ds = load_csv(path, delimiter=";", header=True, target_column=0)
    np.testing.assert_array_equal(ds.y, [1, 4])
    np.testing.assert_array_equal(ds.X, [[2, 3], [5, 6]])


def test_load_reports_bad_cell(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("1,2,3\n4,x,6\n")
    with pytest.raises(InputError, match="row 2, column 2"):
        load_csv(path)


def test_load_empty_file(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("")
    with pytest.raises(InputError):
        load_csv(path)


def test_csv_round_trip(tmp_path):
    ds = gen_synthetic_regression(20, 3, seed=4)
    save_csv(ds, tmp_path / "d.csv")
    back = load_csv(tmp_path / "d.csv", header=True)
    np.testing.assert_array_equal(back.X, ds.X)
    np.testing.assert_array_equal(back.y, ds.y)


def test_normalize_scale():
    ds = Dataset(np.array([[2.0], [0.6], [0.0]]), np.array([0.0, 0.8, 1.0]))
    out = normalize(ds)
    assert out.scale == pytest.approx(0.495)
    assert np.linalg.norm(out.rows(), axis=1).max() == pytest.approx(0.99)


def test_normalized_rows_augment():
    out = normalize(gen_synthetic_regression(500, 4, noise_sigma=0.3, seed=1))
    augment_data(out.rows())
    assert np.linalg.norm(out.rows(), axis=1).max() <= 0.99 + 1e-15


def test_ols_scale_invariant():
    ds = gen_synthetic_regression(300, 4, noise_sigma=0.2, seed=2, radius=5.0)
    raw = ols_solve(ds).theta
    scaled = ols_solve(normalize(ds)).theta
    np.testing.assert_allclose(scaled, raw, rtol=0, atol=1e-10)


def test_normalize_all_zero():
    with pytest.raises(DegenerateDataError):
        normalize(Dataset(np.zeros((3, 2)), np.zeros(3)))


def test_normalize_classification_bias():
    ds = gen_synthetic_classification(50, 4.0, seed=3)
    out = normalize(ds)
    assert out.d == 3 and out.bias_appended
    np.testing.assert_allclose(out.X[:, -1], -out.scale)
    np.testing.assert_array_equal(out.y, ds.y)


def test_normalize_with_norm_bound_clips():
    ds = Dataset(np.array([[3.0], [0.5]]), np.array([4.0, 0.0]))
    out = normalize(ds, norm_bound=2.0)
    assert out.clipped == 1
    assert out.scale == pytest.approx(0.495)
    np.testing.assert_allclose(np.linalg.norm(out.rows(), axis=1), [0.99, 0.2475])


def test_regression_generator_noiseless_recovery():
    theta = [0.4, -1.2, 2.0]
    ds = gen_synthetic_regression(200, 3, theta, seed=5)
    np.testing.assert_allclose(ols_solve(ds).theta, theta, atol=1e-8)
    assert np.linalg.norm(ds.X, axis=1).max() <= 1.0


def test_regression_generator_deterministic():
    a = gen_synthetic_regression(100, 2, noise_sigma=0.1, seed=9)
    b = gen_synthetic_regression(100, 2, noise_sigma=0.1, seed=9)
    assert a.X.tobytes() == b.X.tobytes() and a.y.tobytes() == b.y.tobytes()
    assert a.source_hash == b.source_hash


def test_regression_generator_noise_variance():
    theta = np.array([0.3, 0.5])
    ds = gen_synthetic_regression(10_000, 2, theta, noise_sigma=0.2, seed=6)
    resid = ds.y - ds.X @ theta
    assert abs(resid.var() / 0.04 - 1) < 0.1


def test_classification_generator_balanced_and_separable():
    for n in (101, 200):
        ds = gen_synthetic_classification(n, 12.0, seed=7)
        assert abs((ds.y == 1).sum() - n / 2) <= 1
        theta = ols_solve(normalize(ds)).theta
        Xb = np.column_stack([ds.X, -np.ones(n)])
        assert np.mean(np.sign(Xb @ theta) == ds.y) == 1.0


def test_dataset_validation():
    with pytest.raises(InputError):
        Dataset(np.zeros((3, 2)), np.zeros(2))
    with pytest.raises(InputError):
        Dataset(np.zeros((2, 2)), np.array([1.0, 0.0]), task="classification")
    with pytest.raises(InputError):
        Dataset(np.zeros((2, 2)), np.zeros(2)).augmented()
