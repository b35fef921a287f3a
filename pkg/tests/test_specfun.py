import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fermicond.errors import DomainError
from fermicond.specfun import (EULER_GAMMA, U_kernel, ci, cosine_integral, si, sine_integral,
                               u_kernel)

GRID = np.concatenate([np.linspace(0.1, 50, 400), [3.999999, 4.0, 4.000001, 1e-6, 1e-3, 120.0, 1e4]])


def _mp_u(x):
    x = mpmath.mpf(x)
    return mpmath.cos(x) / x**3 - mpmath.sin(x) / x**4


def _mp_U(x):
    x = mpmath.mpf(abs(x))
    return (-mpmath.cos(x) / (3 * x**2) - mpmath.ci(x) / 3
            + mpmath.sin(x) / (3 * x**3) + mpmath.sin(x) / (3 * x))


def test_si_matches_mpmath():
    ref = np.array([float(mpmath.si(x)) for x in GRID])
    assert np.max(np.abs(si(GRID) - ref)) < 1e-13


def test_ci_matches_mpmath():
    ref = np.array([float(mpmath.ci(x)) for x in GRID])
    assert np.max(np.abs(ci(GRID) - ref)) < 1e-13


def test_u_and_U_match_mpmath():
    mpmath.mp.dps = 40
    try:
        for x in [1e-4, 0.3, 0.49, 0.51, 1.0, 3.0, 17.0, -2.5]:
            assert abs(u_kernel(x) - float(_mp_u(x))) <= 1e-12 * max(1, abs(float(_mp_u(x))))
            assert abs(U_kernel(x) - float(_mp_U(x))) <= 1e-12 * max(1, abs(float(_mp_U(x))))
    finally:
        mpmath.mp.dps = 15


def test_frozen_values():
    # mpmath at 30 digits
    assert sine_integral(1.0).value == pytest.approx(0.946083070367183014941353313823, abs=1e-15)
    assert cosine_integral(1.0).value == pytest.approx(0.337403922900968134662646203889, abs=1e-15)
    assert sine_integral(1.0).abs_error_estimate < 1e-13


def test_large_argument_limits():
    assert si(1e8) == pytest.approx(math.pi / 2, abs=1e-8)
    assert abs(ci(1e8)) < 1e-8


def test_small_argument_ci_log():
    x = 1e-8
    assert ci(x) == pytest.approx(EULER_GAMMA + math.log(x), abs=1e-14)


def test_domain_errors():
    with pytest.raises(DomainError):
        cosine_integral(0.0)
    with pytest.raises(DomainError):
        cosine_integral(-1.0)
    with pytest.raises(DomainError):
        sine_integral(math.inf)
    with pytest.raises(DomainError):
        u_kernel(0.0)
    with pytest.raises(DomainError):
        U_kernel(np.array([1.0, 0.0]))


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=0.05, max_value=80.0))
def test_parity(x):
    assert si(-x) == -si(x)
    assert u_kernel(-x) == -u_kernel(x)
    assert U_kernel(-x) == U_kernel(x)


@settings(max_examples=100, deadline=None)
@given(st.floats(min_value=0.1, max_value=50.0))
def test_derivative_identities(x):
    h = 1e-5
    d_si = (si(x + h) - si(x - h)) / (2 * h)
    d_ci = (ci(x + h) - ci(x - h)) / (2 * h)
    d_U = (U_kernel(x + h) - U_kernel(x - h)) / (2 * h)
    assert d_si == pytest.approx(math.sin(x) / x, abs=1e-6)
    assert d_ci == pytest.approx(math.cos(x) / x, abs=1e-6)
    assert d_U == pytest.approx(u_kernel(x), abs=1e-6)


def test_vectorized_shapes():
    x = np.linspace(0.5, 5, 12).reshape(3, 4)
    assert si(x).shape == (3, 4)
    assert U_kernel(x).shape == (3, 4)
    assert isinstance(u_kernel(2.0), float)
