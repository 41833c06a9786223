import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.special import erfcx, gamma

from fracspec.mittag_leffler import (
    SINGULAR,
    MLParams,
    kernel_derivative,
    kernel_second_derivative,
    ml,
    ml_eval,
    ml_kernel,
    ml_primitive,
    ml_time_derivative,
    rgamma,
)

REF = np.genfromtxt(Path(__file__).parent / "data" / "ml_reference.csv", delimiter=",",
                    skip_header=2)


def test_frozen_reference_table():
    # 30-digit direct series values, frozen in tests/data
    got = np.array([ml(a, b, z) for a, b, z, _ in REF])
    err = np.abs(got - REF[:, 3]) / np.maximum(1.0, np.abs(REF[:, 3]))
    assert err.max() <= 1e-13


def test_array_matches_scalar_path():
    z = np.linspace(-45.0, 4.0, 97)
    for a, b in ((0.4, 1.0), (0.75, 0.75), (1.6, 2.6)):
        arr = ml(a, b, z)
        sc = np.array([ml(a, b, float(v)) for v in z])
        np.testing.assert_allclose(arr, sc, rtol=0, atol=1e-15 * np.max(np.abs(sc)))


@pytest.mark.parametrize("x", np.linspace(0.0, 6.0, 13))
def test_half_order_is_scaled_erfc(x):
    # E_{1/2,1}(-x) = exp(x^2) erfc(x)
    assert ml(0.5, 1.0, -x) == pytest.approx(erfcx(x), rel=1e-13, abs=1e-15)


def test_other_closed_forms():
    x = np.linspace(0.05, 15.0, 60)
    np.testing.assert_allclose(ml(2.0, 2.0, -(x**2)), np.sin(x) / x, atol=1e-12)
    z = np.linspace(-20.0, 3.0, 50)
    z = z[np.abs(z) > 1e-3]
    np.testing.assert_allclose(ml(1.0, 2.0, z), np.expm1(z) / z, rtol=1e-12)


def test_value_at_zero_is_reciprocal_gamma():
    for b in (0.3, 1.0, 1.7, 2.5):
        assert ml(0.6, b, 0.0) == pytest.approx(1.0 / gamma(b), rel=1e-15)
    assert rgamma(-2.0) == 0.0
    assert rgamma(0.0) == 0.0


def test_params_validation():
    with pytest.raises(ValueError):
        MLParams(0.0, 1.0)
    with pytest.raises(ValueError):
        MLParams(0.5, -0.5)
    with pytest.raises(ValueError):
        MLParams(float("nan"), 1.0)
    assert ml_eval(MLParams(1.0, 1.0), 0.0) == 1.0
    assert ml_eval((1.0, 1.0), -1.0) == pytest.approx(math.exp(-1.0), rel=1e-15)
    with pytest.raises(ValueError):
        ml(0.5, 1.0, float("inf"))
    with pytest.raises(ValueError):
        ml(0.5, 1.0, np.array([0.0, np.nan]))


def test_kernel_at_origin():
    assert ml_kernel(0.5, 2.0, 0.0) is SINGULAR
    assert ml_kernel(1.5, 2.0, 0.0) == 0.0
    with pytest.raises(ValueError):
        ml_kernel(1.0, 2.0, 0.5)
    with pytest.raises(ValueError):
        ml_kernel(0.5, 2.0, -1.0)
    vals = ml_kernel(0.5, 2.0, np.array([0.0, 0.25, 1.0]))
    assert np.ma.is_masked(vals[0])
    assert vals[2] == pytest.approx(ml(0.5, 0.5, -2.0))


@pytest.mark.parametrize("a,b,lam,t", [(0.5, 0.5, 3.0, 0.7), (1.5, 1.5, 10.0, 0.4), (0.8, 1.0, 1.0, 2.0)])
def test_primitive_matches_quadrature(a, b, lam, t):
    ref, _ = quad(lambda s: s ** (b - 1.0) * ml(a, b, -lam * s**a), 0.0, t, limit=200)
    assert ml_primitive(a, b, lam, t) == pytest.approx(ref, rel=1e-9)
    assert ml_primitive(a, b, lam, 0.0) == 0.0
    with pytest.raises(ValueError):
        ml_primitive(a, 0.0, lam, t)


def test_time_derivative_rejects_bad_input():
    with pytest.raises(ValueError):
        ml_time_derivative(0.5, 1.0, 0.5, "bogus")
    with pytest.raises(ValueError):
        ml_time_derivative(0.5, 1.0, 0.0, "E1")


@given(a=st.floats(0.1, 1.9).filter(lambda v: abs(v - 1.0) > 0.05),
       lam=st.floats(0.1, 200.0), t=st.floats(0.01, 3.0))
def test_kernel_derivatives_by_differences(a, lam, t):
    d = 1e-5 * t
    k = lambda s: s ** (a - 1.0) * ml(a, a, -lam * s**a)
    fd1 = (k(t + d) - k(t - d)) / (2 * d)
    assert kernel_derivative(a, lam, t) == pytest.approx(fd1, rel=1e-5, abs=1e-9)
    fd2 = (kernel_derivative(a, lam, t + d) - kernel_derivative(a, lam, t - d)) / (2 * d)
    assert kernel_second_derivative(a, lam, t) == pytest.approx(fd2, rel=1e-5, abs=1e-8)


@given(a=st.floats(0.05, 1.0), x1=st.floats(0.0, 60.0), x2=st.floats(0.0, 60.0))
def test_completely_monotone_on_negative_axis(a, x1, x2):
    lo, hi = sorted((x1, x2))
    e_lo, e_hi = ml(a, 1.0, -lo), ml(a, 1.0, -hi)
    assert 0.0 < e_hi <= e_lo + 1e-14


@given(a=st.floats(0.2, 1.9), b=st.floats(0.2, 2.5), z=st.floats(-30.0, 2.0))
def test_shift_recurrence(a, b, z):
    # E_{a,b}(z) = 1/Gamma(b) + z E_{a,a+b}(z)
    lhs = ml(a, b, z)
    rhs = 1.0 / gamma(b) + z * ml(a, a + b, z)
    assert lhs == pytest.approx(rhs, abs=1e-12 * max(1.0, abs(z) * abs(ml(a, a + b, z))))


@given(a=st.floats(0.05, 0.95), x=st.floats(0.0, 80.0))
def test_two_sided_rational_bounds(a, x):
    # 1/(1 + Gamma(1-a) x) <= E_{a,1}(-x) <= 1/(1 + x/Gamma(1+a)) for 0 < a < 1
    e = ml(a, 1.0, -x)
    assert 1.0 / (1.0 + gamma(1.0 - a) * x) * (1 - 1e-12) <= e
    assert e <= 1.0 / (1.0 + x / gamma(1.0 + a)) * (1 + 1e-12)
