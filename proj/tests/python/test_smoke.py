from pathlib import Path

import numpy as np
import pytest

import blocksel

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def load(name):
    return np.loadtxt(FIXTURES / name, delimiter=",", ndmin=2)


@pytest.fixture(scope="module")
def toy():
    X, _, _ = blocksel.standardize(load("toy_X.csv"))
    Y, _, _ = blocksel.standardize(load("toy_Y.csv"))
    return X, Y


def test_standardize_moments():
    raw = np.random.default_rng(0).normal(3.0, 2.0, size=(50, 4))
    data, centers, scales = blocksel.standardize(raw)
    np.testing.assert_allclose(data.mean(axis=0), 0.0, atol=1e-12)
    np.testing.assert_allclose(data.std(axis=0, ddof=1), 1.0, atol=1e-12)
    np.testing.assert_allclose(centers, raw.mean(axis=0), atol=1e-12)
    np.testing.assert_allclose(scales, raw.std(axis=0, ddof=1), atol=1e-12)


def test_select_matches_cli_golden(toy):
    X, Y = toy
    grid = blocksel.block_r2bar(X, Y, [5, 5], [2, 2])
    np.testing.assert_array_equal(grid, load("golden/select/r2bar.csv"))
    ind = blocksel.select_threshold(grid)
    np.testing.assert_array_equal(ind["delta"], load("golden/select/delta.csv").astype(int))
    assert ind["feasible"]


def test_cli_lasso_equals_library_fit(toy):
    X, Y = toy
    fit = blocksel.baseline(X, Y, [5, 5], [2, 2], method="lasso", seed=7)
    np.testing.assert_array_equal(fit["coefficients"], load("golden/fit_lasso/B_hat.csv"))


def test_nbslasso_respects_indicator(toy):
    X, Y = toy
    fit = blocksel.nbslasso(X, Y, [5, 5], [2, 2], seed=3)
    B, delta = fit["coefficients"], fit["indicator"]["delta"]
    for k in range(2):
        for j in range(2):
            if delta[k, j] == 0:
                assert not B[5 * k:5 * (k + 1), 2 * j:2 * (j + 1)].any()
    assert "r2bar" in fit


def test_lasso_orthonormal_closed_form():
    n, p = 40, 5
    q, _ = np.linalg.qr(np.random.default_rng(1).normal(size=(n, p)))
    X = np.sqrt(n) * q
    y = np.random.default_rng(2).normal(size=n)
    lam = 0.1
    fit = blocksel.lasso(X, y, lam)
    z = X.T @ y / n
    want = np.sign(z) * np.maximum(np.abs(z) - lam, 0.0)
    np.testing.assert_allclose(fit["coefficients"], want, atol=1e-10)
    assert fit["converged"]
    null = blocksel.lasso(X, y, blocksel.lambda_max(X, y))
    assert not null["coefficients"].any()


def test_single_block_ols_matches_lstsq():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(60, 4))
    Y = X @ rng.normal(size=(4, 2)) * 2.0 + rng.normal(size=(60, 2))
    fit = blocksel.single_block_ols(X, Y, 0.5)
    assert fit["indicator"]["delta"][0, 0] == 1
    np.testing.assert_allclose(fit["coefficients"], np.linalg.lstsq(X, Y, rcond=None)[0], atol=1e-10)


def test_errors_map_to_python_exceptions(toy):
    X, Y = toy
    with pytest.raises(ValueError):
        blocksel.block_r2bar(X, Y, [5, 4], [2, 2])
    with pytest.raises(ValueError):
        blocksel.select_threshold(np.zeros((2, 2)), alpha=1.5)
    bad = X.copy()
    bad[0, 0] = np.nan
    with pytest.raises(ArithmeticError):
        blocksel.standardize(bad)


def test_simulate_and_benchmark():
    spec = {"n": 40, "P": 20, "Q": 20, "group_size": 10, "kj_choices": [1], "sparsity": 50,
            "n_test": 50, "seed": 5}
    data = blocksel.simulate(spec)
    assert data["X_train"].shape == (40, 20)
    assert data["delta"].shape == (2, 2)
    reports, table = blocksel.benchmark(spec, ["nbslasso", "lasso"], replications=1)
    assert [r["method"] for r in reports] == ["nbslasso", "lasso"]
    assert all(r["ok"] for r in reports)
    assert table.splitlines()[0].split()[:2] == ["Sparsity", "Method"]
