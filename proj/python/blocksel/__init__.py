"""Python bindings for blocksel: block selection and block-restricted lasso."""

import json as _json

from ._blocksel import (
    ConfigError,
    DimensionError,
    DomainError,
    NumericError,
    baseline,
    block_r2bar,
    er_bound,
    lambda_max,
    lasso,
    nbslasso,
    select_threshold,
    set_threads,
    single_block_ols,
    single_block_screened,
    standardize,
)
from . import _blocksel

__version__ = "0.1.0"


def _spec_text(spec):
    return spec if isinstance(spec, str) else _json.dumps(spec)


def simulate(spec):
    """Draw one training/test data set. ``spec`` is a dict or JSON string."""
    return _blocksel.simulate(_spec_text(spec))


def benchmark(spec, methods=("nbslasso", "lasso"), replications=1, base_seed=1):
    """Run replications; returns (per-replication reports, aggregate table text)."""
    return _blocksel.benchmark(_spec_text(spec), list(methods), replications, base_seed)


__all__ = [
    "ConfigError",
    "DimensionError",
    "DomainError",
    "NumericError",
    "baseline",
    "benchmark",
    "block_r2bar",
    "er_bound",
    "lambda_max",
    "lasso",
    "nbslasso",
    "select_threshold",
    "set_threads",
    "simulate",
    "single_block_ols",
    "single_block_screened",
    "standardize",
]
