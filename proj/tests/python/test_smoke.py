import math

import numpy as np
import pytest

import moilab


def test_divided_difference_confluent_and_spec_dict():
    assert moilab.divided_difference("exp", [0.3, 0.3]) == pytest.approx(math.exp(0.3))
    v = moilab.divided_difference({"id": "fourier", "s": 2.0}, [0.0, 1.0])
    assert v == pytest.approx((np.exp(2j) - 1.0) / 1.0)


def test_moi_first_order_is_difference_of_functions():
    a = np.diag([0.0, 1.0]).astype(complex)
    c = np.diag([0.5, -1.0]).astype(complex)
    t = moilab.moi("exp", [a, c], [a - c])
    expected = np.diag(np.exp(np.diag(a).real) - np.exp(np.diag(c).real))
    assert np.allclose(t, expected, atol=1e-12)


def test_derivative_and_remainder():
    a, b = moilab.generate_ensemble({"seed": 3, "dimension": 3})
    assert np.allclose(a, a.conj().T)
    d1 = moilab.gateaux_derivative("gaussian", a, b, 1)
    h = 1e-5
    def f(x):
        w, v = np.linalg.eigh(x)
        return v @ np.diag(np.exp(-w**2)) @ v.conj().T
    fd = (f(a + h * b) - f(a - h * b)) / (2 * h)
    assert np.linalg.norm(d1 - fd) < 1e-7
    _, rel = moilab.taylor_remainder("gaussian", a, b, 2)
    assert rel < 1e-8


def test_ssf_scalar_closed_form():
    t, values, sidecar = moilab.ssf(np.zeros((1, 1)), np.ones((1, 1)), 2)
    assert sidecar["n"] == 2 and sidecar["method"] == "fourier"
    t = np.asarray(t)
    exact = np.where((t > 0) & (t < 1), 1 - t, 0.0)
    assert np.trapezoid(np.abs(np.asarray(values) - exact), t) < 1e-2


def test_run_suite_and_errors():
    report = moilab.run_suite({"seed": 1, "dimension": 2, "checks": ["telescoping"]}, "perturbation")
    assert [r["name"] for r in report["records"]] == ["telescoping"]
    assert report["pass"]
    with pytest.raises(moilab.ConfigError):
        moilab.run_suite({"dimension": 2})
    with pytest.raises(moilab.MoilabError):
        moilab.gateaux_derivative("no_such_family", np.eye(2), np.eye(2), 1)


def test_counterexample_csv_header():
    assert moilab.counterexample_csv(2.0, [16, 64]).startswith("d,t,r_heavy,r_bounded")
