import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from fermicond.errors import ConfigurationError, DomainError
from fermicond.kernels import (FermiData, KernelField, SpatialGrid, _sliver_rule,
                               assemble_dressed_kernel, band_limited_sgn_kernel, build_states,
                               free_F, free_f, free_f_field, free_f_product_form,
                               free_f_residue, interacting_f, k_quadrature, kernel_A, kernel_B,
                               kernel_ReB, propagator, propagator_multiplier, reB_multiplier,
                               sgn_multiplier)
from fermicond.scattering import truncated_gaussian

FERMIS = [FermiData.from_k(1.0, 1.0), FermiData.from_k(1.1, 0.9), FermiData.from_k(2.0, 0.5)]
coord = st.floats(-30, 30)
kval = st.floats(0.1, 3.0)


def test_fermi_data_validation_and_ordering():
    with pytest.raises(ConfigurationError, match="fermi.mu_R"):
        FermiData(1.0, 0.0)
    with pytest.raises(ConfigurationError, match="fermi.mu_L"):
        FermiData(float("nan"), 1.0)
    f = FermiData(0.81, 1.21)
    o, sign = f.ordered()
    assert sign == -1.0 and o.mu_L == 1.21
    assert f.voltage == pytest.approx(-0.4)
    assert FermiData.from_k(1.1, 0.9).k_F == pytest.approx(1.0)


@settings(max_examples=100, deadline=None)
@given(coord, coord, kval, kval)
def test_propagator_equals_kernel_B(x, y, kL, kR):
    f = FermiData.from_k(kL, kR)
    assert abs(propagator(x, y, f) - kernel_B(x, y, f)) < 1e-12


@pytest.mark.parametrize("d", [0.0, 1e-9, 0.37, -5.2, 40.0])
def test_propagator_against_k_integral(d):
    f = FermiData.from_k(1.3, 0.6)
    re = quad(lambda k: math.cos(k * d), -f.k_R, f.k_L, limit=200)[0] / (2 * math.pi)
    im = -quad(lambda k: math.sin(k * d), -f.k_R, f.k_L, limit=200)[0] / (2 * math.pi)
    assert abs(propagator(d, 0.0, f) - (re + 1j * im)) < 1e-12


@settings(max_examples=100, deadline=None)
@given(coord, coord)
def test_kernel_A_antisymmetric_imaginary(x, y):
    if x == y:
        with pytest.raises(DomainError):
            kernel_A(x, y)
        return
    a = kernel_A(x, y)
    assert a.real == 0
    assert a == -kernel_A(y, x)


@settings(max_examples=100, deadline=None)
@given(coord, coord, kval, kval)
def test_product_form_equals_closed_form(x, y, kL, kR):
    if abs(x - y) < 1e-6:
        return
    f = FermiData.from_k(kL, kR)
    assert abs(free_f_product_form(x, y, f) - free_f(x, y, f)) <= 1e-10 * max(1.0, abs(free_f(x, y, f)))


@settings(max_examples=60, deadline=None)
@given(st.floats(0.05, 40), kval, kval)
def test_free_f_odd_and_imaginary(d, kL, kR):
    f = FermiData.from_k(kL, kR)
    v = free_f(d, 0.0, f)
    assert v.real == 0
    assert free_f(-d, 0.0, f) == pytest.approx(-v, abs=1e-15)


def test_free_f_pole():
    f = FERMIS[1]
    d = 1e-5
    assert free_f(d, 0.0, f) * d == pytest.approx(free_f_residue(f), rel=1e-8)


@pytest.mark.parametrize("f", FERMIS)
def test_free_F_is_antiderivative_in_y(f):
    h = 1e-5
    for d in (-7.3, -0.4, 0.9, 12.0):
        y = -d
        num = (free_F(0.0, y + h, f) - free_F(0.0, y - h, f)) / (2 * h)
        assert num == pytest.approx(free_f(0.0, y, f), abs=1e-8)
    assert abs(free_F(0.0, 1e6, f)) < 1e-6


def test_free_F_tail_integral():
    # int_D^inf f(0, -d') dd' = F(0, -D) with f(0, -d') as a function of d' = x - y
    f = FERMIS[0]
    D = 3.0
    val = quad(lambda s: (free_f(0.0, -s, f)).imag, D, 4000, limit=4000)[0]
    assert 1j * val == pytest.approx(free_F(0.0, -D, f) - free_F(0.0, -4000.0, f), abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.floats(-20, 20).filter(lambda v: abs(v) > 1e-3), st.floats(0.5, 5))
def test_band_limited_sgn_closed_form(d, K):
    re = quad(lambda k: 0.0, 0, K)[0]
    im = 2 * quad(lambda k: math.sin(k * d), 0, K, limit=200)[0] / (2 * math.pi)
    assert abs(band_limited_sgn_kernel(d, 0.0, K) - (re + 1j * im)) < 1e-12


def test_sliver_rule_exact_for_polynomials():
    kmin = 1e-3
    k, w = _sliver_rule(kmin, 8)
    assert np.all(k >= kmin) and np.all(k <= 3 * kmin)
    for p in range(8):
        assert np.sum(w * k**p) == pytest.approx((3 * kmin) ** (p + 1) / (p + 1), rel=1e-10)


def test_k_quadrature_integrates_phases():
    K, D = 3.0, 60.0
    k, w = k_quadrature(K, breakpoints=(1.0, 1.5), max_phase=D)
    assert np.sum(w) == pytest.approx(2 * K / (2 * math.pi), rel=1e-12)
    for d in (0.0, 7.0, D):
        exact = (2 * math.sin(K * d) / d if d else 2 * K) / (2 * math.pi)
        assert np.sum(w * np.cos(k * d)) == pytest.approx(exact, abs=1e-12)
    with pytest.raises(ConfigurationError):
        k_quadrature(-1.0)


def _small_grid():
    return SpatialGrid.uniform(12.0, 0.25, anchors=(-1.0, 1.0))


def test_free_dressed_kernels_match_closed_forms():
    grid = _small_grid()
    fermi = FERMIS[1]
    K = 3.0
    states = build_states(None, grid, K, breakpoints=(fermi.k_L, fermi.k_R))
    x = grid.points
    KA = assemble_dressed_kernel(states, sgn_multiplier).values
    KB = assemble_dressed_kernel(states, reB_multiplier(fermi)).values
    KP = assemble_dressed_kernel(states, propagator_multiplier(fermi)).values
    X, Y = np.meshgrid(x, x, indexing="ij")
    assert np.max(np.abs(KA - band_limited_sgn_kernel(X, Y, K))) < 1e-10
    assert np.max(np.abs(KB - kernel_ReB(X, Y, fermi))) < 1e-10
    # the occupied-band projector is the conjugate of the displayed propagator
    assert np.max(np.abs(KP - propagator(Y, X, fermi))) < 1e-10


def test_dressed_kernels_hermitian_and_linear():
    grid = _small_grid()
    spec = truncated_gaussian(1.0, 0.0, 0.5, -1.0, 1.0, alpha=0.7)
    fermi = FERMIS[0]
    states = build_states(spec, grid, 3.0, breakpoints=(fermi.k_L,))
    KA = assemble_dressed_kernel(states, sgn_multiplier).values
    assert np.max(np.abs(KA - KA.conj().T)) < 1e-12
    m1, m2 = sgn_multiplier, reB_multiplier(fermi)
    combo = assemble_dressed_kernel(states, lambda k: m1(k) + 2.5 * m2(k)).values
    sep = KA + 2.5 * assemble_dressed_kernel(states, m2).values
    assert np.max(np.abs(combo - sep)) < 1e-12
    f = interacting_f(KernelField(grid, KA), assemble_dressed_kernel(states, m2))
    assert np.all(f.values.real == 0)
    # f(x, y) is odd under exchange: f^T = -f
    assert np.max(np.abs(f.values + f.values.T)) < 1e-12


def test_multiplier_must_be_finite():
    grid = _small_grid()
    states = build_states(None, grid, 3.0)
    with pytest.raises(ConfigurationError):
        assemble_dressed_kernel(states, lambda k: np.full(k.shape, np.nan))


def test_grid_and_field_serialization():
    grid = SpatialGrid.uniform(2.0, 0.3, anchors=(-0.5, 0.7))
    assert np.min(np.abs(grid.points + 0.5)) < 1e-12
    assert np.min(np.abs(grid.points - 0.7)) < 1e-12
    with pytest.raises(ConfigurationError):
        SpatialGrid(np.array([0.0, 1.0, 3.0]))
    field = free_f_field(SpatialGrid(np.linspace(-1, 1, 3)), FERMIS[0])
    assert field.diagonal_convention == "principal-value-zero"
    text = field.to_csv()
    lines = text.strip().split("\n")
    assert lines[0] == "x,y,re,im" and len(lines) == 10
    head = json.loads(field.header_json())
    assert head["grid"]["n_points"] == 3
    buf = io.StringIO()
    field.to_csv(buf)
    assert buf.getvalue() == text
    with pytest.raises(ConfigurationError):
        KernelField(field.grid, field.values, "midpoint")


def test_stated_kernel_examples():
    assert kernel_A(1 / math.pi, 0.0) == pytest.approx(-1j)
    f = FermiData.from_k(1.3, 0.7)
    assert kernel_B(0.4, 0.4, f) == pytest.approx(2.0 / (2 * math.pi))
    g = FermiData(1.0, 1.0)
    assert kernel_B(2.0, 0.5, g) == pytest.approx(math.sin(1.5) / (1.5 * math.pi))
    assert kernel_B(2.0, 0.5, f) == pytest.approx(np.conj(kernel_B(0.5, 2.0, f)))
    assert kernel_ReB(2.0, 0.5, f) == kernel_ReB(0.5, 2.0, f)
    assert kernel_ReB(1.0, -1.0, g) == pytest.approx(kernel_B(1.0, -1.0, g).real)
    assert abs(free_f(math.pi, 0.0, g)) < 1e-17
    assert abs(free_F(0.0, 1e3, g)) <= 1e-2
    h = 1e-5
    fd = (free_F(0.0, 2 + h, f) - free_F(0.0, 2 - h, f)) / (2 * h)
    assert fd == pytest.approx(free_f(0.0, 2.0, f), abs=1e-6)
