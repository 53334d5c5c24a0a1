import csv
import json
import os
import shutil
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

HERE = Path(__file__).resolve().parent
FIXTURES = HERE.parent / "fixtures"
GOLDEN = FIXTURES / "golden"

sys.path.insert(0, str(HERE))
import oracle  # noqa: E402

CLI = os.environ.get("BLOCKSEL_CLI") or shutil.which("blocksel")
pytestmark = pytest.mark.skipif(not CLI, reason="BLOCKSEL_CLI is not set")

TOY = ["--x", str(FIXTURES / "toy_X.csv"), "--y", str(FIXTURES / "toy_Y.csv")]
TOY_GROUPS = TOY + ["--groups", str(FIXTURES / "toy_groups.json")]

BENCH_CONFIG = {
    "simulation": {
        "n": 60, "P": 40, "Q": 40, "group_setting": "equal", "group_size": 10,
        "kj_choices": [1, 2], "sparsity": 50, "n_test": 200, "seed": 3,
    },
    "methods": ["nbslasso", "lasso"],
    "replications": 2,
}


def run(*args, expect=0):
    proc = subprocess.run([CLI, *map(str, args)], capture_output=True, text=True)
    assert proc.returncode == expect, proc.stdout + proc.stderr
    return proc


def load_csv(path):
    return np.loadtxt(path, delimiter=",", ndmin=2)


def read_bytes(path):
    return Path(path).read_bytes()


def test_select_matches_golden(tmp_path):
    out = tmp_path / "sel"
    run("select", *TOY_GROUPS, "--out", out)
    for name in ("delta.csv", "r2bar.csv", "summary.json"):
        assert read_bytes(out / name) == read_bytes(GOLDEN / "select" / name), name


def test_select_agrees_with_numpy_oracle(tmp_path):
    out = tmp_path / "sel"
    run("select", *TOY_GROUPS, "--out", out)
    X = oracle.standardize(load_csv(FIXTURES / "toy_X.csv"))
    Y = oracle.standardize(load_csv(FIXTURES / "toy_Y.csv"))
    grid = oracle.r2bar_grid(X, Y, [5, 5], [2, 2])
    np.testing.assert_allclose(load_csv(out / "r2bar.csv"), grid, rtol=0, atol=1e-10)
    delta = load_csv(out / "delta.csv").astype(int)
    np.testing.assert_array_equal(delta, oracle.select(grid, 0.05))
    # the planted block is covariate group 1, response group 2
    assert delta[0, 1] == 1
    summary = json.loads((out / "summary.json").read_text())
    assert summary["selected"] == int(delta.sum())
    assert [1, 2] in summary["active_blocks"]


def test_select_single_block_is_empty(tmp_path):
    out = tmp_path / "sel"
    run("select", *TOY, "--groups", FIXTURES / "toy_single_group.json", "--out", out)
    assert load_csv(out / "delta.csv").sum() == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["selected"] == 0
    assert "no block passed" in summary["note"]


def test_malformed_csv_leaves_no_output(tmp_path):
    out = tmp_path / "sel"
    proc = run("select", "--x", FIXTURES / "toy_bad.csv", "--y", FIXTURES / "toy_Y.csv",
               "--groups", FIXTURES / "toy_groups.json", "--out", out, expect=2)
    assert "line 2" in proc.stderr
    assert not out.exists() or not any(out.iterdir())


def test_group_mismatch_names_the_group(tmp_path):
    out = tmp_path / "sel"
    proc = run("select", *TOY, "--covariate-sizes", "5,4", "--response-sizes", "2,2",
               "--out", out, expect=2)
    assert "group 2" in proc.stderr
    assert not out.exists() or not any(out.iterdir())


def test_overflowing_input_is_a_numeric_failure(tmp_path):
    X = load_csv(FIXTURES / "toy_X.csv")
    X[0, 0], X[1, 0] = 1e308, -1e308
    big = tmp_path / "big.csv"
    np.savetxt(big, X, delimiter=",", fmt="%.17g")
    out = tmp_path / "sel"
    run("select", "--x", big, "--y", FIXTURES / "toy_Y.csv",
        "--groups", FIXTURES / "toy_groups.json", "--out", out, expect=3)
    assert not out.exists() or not any(out.iterdir())


def test_fit_lasso_matches_golden(tmp_path):
    out = tmp_path / "fit"
    run("fit", "--method", "lasso", *TOY_GROUPS, "--seed", 7, "--out", out)
    for name in ("B_hat.csv", "delta.csv", "lambda.csv"):
        assert read_bytes(out / name) == read_bytes(GOLDEN / "fit_lasso" / name), name
    got = json.loads((out / "fit.json").read_text())
    want = json.loads((GOLDEN / "fit_lasso" / "fit.json").read_text())
    got.pop("elapsed_seconds")
    want.pop("elapsed_seconds")
    assert got == want


def test_fit_nbslasso_zeroes_unselected_blocks(tmp_path):
    out = tmp_path / "fit"
    run("fit", "--method", "nbslasso", *TOY_GROUPS, "--out", out)
    B = load_csv(out / "B_hat.csv")
    delta = load_csv(out / "delta.csv").astype(int)
    cov = [slice(0, 5), slice(5, 10)]
    resp = [slice(0, 2), slice(2, 4)]
    for k in range(2):
        for j in range(2):
            if delta[k, j] == 0:
                assert not B[cov[k], resp[j]].any()


def test_fit_is_reproducible_for_a_seed(tmp_path):
    for tag in ("a", "b"):
        run("fit", "--method", "nbslasso", *TOY_GROUPS, "--seed", 11, "--out", tmp_path / tag)
    for name in ("B_hat.csv", "delta.csv", "lambda.csv"):
        assert read_bytes(tmp_path / "a" / name) == read_bytes(tmp_path / "b" / name), name


def test_fit_unstandardize_writes_intercepts(tmp_path):
    out = tmp_path / "fit"
    run("fit", "--method", "lasso", *TOY_GROUPS, "--unstandardize", "--out", out)
    assert load_csv(out / "B_hat.csv").shape == (10, 4)
    assert load_csv(out / "intercept.csv").size == 4


def test_simulate_writes_consistent_files(tmp_path):
    cfg = tmp_path / "sim.json"
    cfg.write_text(json.dumps(BENCH_CONFIG["simulation"]))
    out = tmp_path / "sim"
    run("simulate", "--config", cfg, "--out", out)
    assert load_csv(out / "X_train.csv").shape == (60, 40)
    assert load_csv(out / "Y_test.csv").shape == (200, 40)
    B = load_csv(out / "B_true.csv")
    delta = load_csv(out / "delta_true.csv").astype(int)
    assert delta.shape == (4, 4)
    for k in range(4):
        for j in range(4):
            block = B[10 * k:10 * (k + 1), 10 * j:10 * (j + 1)]
            assert bool(block.any()) == bool(delta[k, j])


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_benchmark_smoke_and_thread_determinism(tmp_path):
    cfg = tmp_path / "bench.json"
    cfg.write_text(json.dumps(BENCH_CONFIG))
    start = time.monotonic()
    proc = run("benchmark", "--config", cfg, "--threads", 1, "--out", tmp_path / "t1")
    assert time.monotonic() - start < 30
    header = proc.stdout.splitlines()[0].split()
    assert header == ["Sparsity", "Method", "TestMSE", "Precision", "Recall",
                      "L1", "L2", "PDR", "FDR", "Time(s)"]
    run("benchmark", "--config", cfg, "--threads", 2, "--out", tmp_path / "t2")

    one = read_rows(tmp_path / "t1" / "replications.csv")
    two = read_rows(tmp_path / "t2" / "replications.csv")
    assert len(one) == 4
    for a, b in zip(one, two):
        a.pop("time_seconds")
        b.pop("time_seconds")
        assert a == b
    assert all(r["ok"] == "1" for r in one)
