"""Python access to the moilab C++ core.

Functions are given by id ("exp", "gaussian", ...) or by a spec dict such as
{"id": "fourier", "s": 2.5}.
"""

import json

from . import _core
from ._core import (
    ConfigError,
    ConsistencyError,
    ContractViolation,
    DomainError,
    MoilabError,
    UnsupportedOrderError,
    counterexample_csv,
)


def _spec(f):
    return f if isinstance(f, str) else json.dumps(f)


def divided_difference(f, nodes):
    return _core.divided_difference(_spec(f), list(nodes))


def moi(f, operators, arguments):
    """Multiple operator integral with symbol f^[n], n = len(arguments)."""
    return _core.moi(_spec(f), list(operators), list(arguments))


def gateaux_derivative(f, a, b, k, t=0.0):
    return _core.gateaux_derivative(_spec(f), a, b, k, t)


def taylor_remainder(f, a, b, n):
    """Returns (remainder matrix, relative difference of the two evaluation paths)."""
    return _core.taylor_remainder(_spec(f), a, b, n)


def ssf(a, b, n):
    """Spectral shift function of order n; returns (t, values, sidecar dict)."""
    g = _core.ssf(a, b, n)
    return g["t"], g["values"], json.loads(g["sidecar"])


def generate_ensemble(config):
    return _core.generate_ensemble(json.dumps(config))


def run_suite(config, suite="all", out_dir=""):
    """Runs a check suite; returns the report as a dict."""
    return json.loads(_core.run_suite(json.dumps(config), suite, out_dir))


__all__ = [
    "ConfigError",
    "ConsistencyError",
    "ContractViolation",
    "DomainError",
    "MoilabError",
    "UnsupportedOrderError",
    "counterexample_csv",
    "divided_difference",
    "gateaux_derivative",
    "generate_ensemble",
    "moi",
    "run_suite",
    "ssf",
    "taylor_remainder",
]
