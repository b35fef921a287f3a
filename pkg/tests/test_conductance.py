import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad
from scipy.special import sici

from fermicond.conductance import (ConductanceReport, Numerics, SweepAborted,
                                   antiderivative_in_y, conductance, conductance_free,
                                   conductance_interacting, first_order_correction, fit_sweep,
                                   free_current_toeplitz, inner_ci_integral, inner_si_integral,
                                   sweep_alpha, windowed_currents)
from fermicond.errors import BoundStatesPresent, ConfigurationError, ExtentTooSmall
from fermicond.kernels import (FermiData, KernelField, SpatialGrid, free_F, free_f,
                               free_f_field, free_f_residue)
from fermicond.scattering import square, truncated_gaussian

BARRIER = square(1.0, -1.0, 1.0)


def _si_oracle(k, xi):
    """2i int_0^inf sin(a x) sin(k x) Si(a x) / x dx with a = xi / 2."""
    a = 0.5 * abs(xi)
    smooth = quad(lambda x: math.sin(a * x) * math.sin(k * x) * (sici(a * x)[0] - math.pi / 2) / x,
                  0, 4000, limit=20000)[0]
    # int_0^inf sin(ax) sin(kx)/x dx = ln|(a+k)/(a-k)| / 2
    lead = 0.5 * math.log(abs((a + k) / (a - k)))
    return 2j * (smooth + 0.5 * math.pi * lead)


def _ci_oracle(k, xi):
    """2i int_0^inf sin(s x) [Ci(|k-s| x) - Ci((k+s) x)] / x dx with s = xi / 2."""
    s = 0.5 * abs(xi)
    f = lambda x: math.sin(s * x) * (sici(abs(k - s) * x)[1] - sici((k + s) * x)[1]) / x
    return 2j * quad(f, 0, 4000, limit=20000)[0]


@pytest.mark.parametrize("xi", [0.6, 1.5, 2.7, 3.4, 6.0])
def test_inner_integrals_against_direct_quadrature(xi):
    k = 1.0
    assert abs(inner_si_integral(k, np.array([xi]))[0] - _si_oracle(k, xi)) < 2e-3
    assert abs(inner_ci_integral(k, np.array([xi]))[0] - _ci_oracle(k, xi)) < 2e-3


@settings(max_examples=60, deadline=None)
@given(st.floats(0.2, 3.0), st.floats(0.01, 20.0))
def test_inner_integrals_are_tied(k, xi):
    # the Ci kernel is exactly -2 times the Si kernel
    a = np.array([xi, -xi])
    assert np.allclose(inner_ci_integral(k, a), -2 * inner_si_integral(k, a), atol=1e-13)


def test_antiderivative_matches_free_F():
    grid = SpatialGrid(np.linspace(-200, 200, 4001))
    fermi = FermiData(1.0, 1.0)
    field = free_f_field(grid, fermi)
    i = 2000 + 37                      # x = 3.7
    res = antiderivative_in_y(field, i, tail_threshold=0.5)
    y = grid.points
    sel = (np.abs(y - y[i]) > 2) & (np.abs(y) < 100)
    ref = free_F(y[i], y[sel], fermi) - free_F(y[i], 200.0, fermi)
    assert np.max(np.abs(res.F[sel] - ref)) < 5e-3
    assert res.F[-1] == 0
    with pytest.raises(ExtentTooSmall):
        antiderivative_in_y(KernelField(grid, np.ones((len(grid), len(grid)), complex)), 0)


def test_two_dimensional_pipeline_equals_toeplitz():
    fermi = FermiData.from_k(1.1, 0.9)
    X, h = 60.0, math.pi / 4.4
    R = X / 4
    probes = [-0.3 * R, 0.3 * R, 0.6 * R]
    sigma = 1.5
    x = h * np.arange(-math.ceil(X / h), math.ceil(X / h) + 1)
    grid = SpatialGrid(x)
    g2d = windowed_currents(free_f_field(grid, fermi), R, probes, sigma, free_f_residue(fermi))
    # y' beyond the grid: long lattice sum closed by the exact antiderivative
    m = np.arange(1, 20001)
    w = np.exp(-(x / R) ** 2)
    tail = np.array([h * np.sum(free_f(xi, x[-1] + m * h, fermi))
                     - free_F(xi, x[-1] + (m[-1] + 0.5) * h, fermi) for xi in x])
    dJ = -h * np.sum(w * tail)
    for j, y0 in enumerate(probes):
        N = h * np.sum(w * np.exp(-((x - y0) / sigma) ** 2) / (sigma * math.sqrt(math.pi)))
        g2d[j] += (1j * math.pi * dJ).real / N
    gt = free_current_toeplitz(fermi, X, h, R, probes, sigma)
    assert np.max(np.abs(g2d - gt)) < 1e-8
    assert np.max(np.abs(gt - 1)) < 1e-8


def test_free_conductance_voltage_antisymmetry():
    a = conductance_free(FermiData(1.21, 0.81))
    b = conductance_free(FermiData(0.81, 1.21))
    assert a.g == pytest.approx(1.0, abs=1e-9)
    assert b.g == pytest.approx(a.g, abs=1e-12)
    assert b.diagnostics["current"] == pytest.approx(-a.diagnostics["current"], rel=1e-12)


def test_dispatch_zero_strength_is_free():
    r = conductance(BARRIER.with_alpha(0.0), FermiData(1.0, 1.0))
    assert "band_limit" not in r.diagnostics
    assert r.g == pytest.approx(1.0, abs=1e-9)


def test_interacting_self_convergence():
    fermi = FermiData(1.0, 1.0)
    spec = BARRIER.with_alpha(0.1)
    errs = []
    for X in (60.0, 200.0):
        r = conductance_interacting(spec, fermi, Numerics(extent=X))
        errs.append(abs(r.g - r.diagnostics["landauer_transmission"]))
    assert errs[1] < errs[0]
    assert errs[1] < 1e-5


def test_interacting_gaussian_matches_landauer():
    spec = truncated_gaussian(1.5, 0.2, 0.4, -1.0, 1.5, alpha=0.3)
    r = conductance_interacting(spec, FermiData(1.0, 1.0), Numerics(extent=200.0))
    assert r.g == pytest.approx(r.diagnostics["landauer_transmission"], abs=2e-5)
    assert r.g < 1


def test_bound_states_refused_unless_allowed():
    well = square(-1.0, -1.0, 1.0, alpha=0.05)
    with pytest.raises(BoundStatesPresent):
        conductance_interacting(well, FermiData(1.0, 1.0))
    r = conductance_interacting(well, FermiData(1.0, 1.0),
                                Numerics(extent=200.0, allow_bound_states=True))
    assert r.diagnostics["bound_state_count"] == 1
    assert r.g == pytest.approx(r.diagnostics["landauer_transmission"], abs=2e-5)


def test_layout_errors():
    with pytest.raises(ConfigurationError):
        conductance_interacting(BARRIER.with_alpha(0.1), FermiData(1.0, 1.0), Numerics(band_limit=2.0))
    with pytest.raises(ExtentTooSmall):
        conductance_interacting(BARRIER.with_alpha(0.1), FermiData(1.0, 1.0), Numerics(extent=5.0))
    with pytest.raises(ConfigurationError):
        Numerics(window_ratio=2.0)
    with pytest.raises(ConfigurationError):
        Numerics(extent=-1.0)


@pytest.mark.parametrize("spec,fermi", [
    (square(1.0, -1.0, 1.0), FermiData(1.21, 0.81)),
    (truncated_gaussian(1.0, 0.3, 0.5, -1.0, 1.5), FermiData(2.0, 1.0)),
])
def test_first_order_terms_cancel(spec, fermi):
    res = first_order_correction(spec, fermi)
    assert res.converged
    assert res.relative < 1e-10
    assert min(abs(t) for t in res.terms) > 1e-3


@settings(max_examples=60, deadline=None)
@given(st.floats(0.5, 1.5), st.floats(-0.1, 0.1), st.floats(-1, 1), st.floats(-0.5, 0.5))
def test_fit_recovers_polynomial(g0, g1, g2, g3):
    a = np.array([-0.1, -0.06, -0.02, 0.02, 0.06, 0.1])
    g = g0 + g1 * a + g2 * a**2 + g3 * a**3
    f0, f1, f2, f3, resid = fit_sweep(a, g)
    assert f0 == pytest.approx(g0, abs=1e-10)
    assert f1 == pytest.approx(g1, abs=1e-9)
    assert f2 == pytest.approx(g2, abs=1e-7)
    assert resid < 1e-10


def test_fit_non_symmetric_falls_back_to_quadratic():
    a = np.array([0.0, 0.1, 0.2, 0.3])
    g0, g1, g2, _, resid = fit_sweep(a, 1 + 0.5 * a - 2 * a**2)
    assert (g0, g1, g2) == pytest.approx((1, 0.5, -2), abs=1e-12)


def test_sweep_aborts_with_partial_results():
    with pytest.raises(SweepAborted) as info:
        sweep_alpha(BARRIER, FermiData(1.0, 1.0), [0.0, -0.02])
    assert info.value.partial["alphas"] == [0.0]
    assert info.value.partial["failed_alpha"] == -0.02


def test_report_serialization():
    rep = ConductanceReport(1.0, 1e-8, 1e-6, {"x": 1})
    d = rep.to_dict()
    assert d["probe_spread_flagged"] is True
    assert set(d) == {"g", "numeric_error_estimate", "y_probe_spread", "probe_spread_flagged", "diagnostics"}


def test_antiderivative_of_zero_and_difference_relation():
    grid = SpatialGrid(np.linspace(-40, 40, 801))
    zero = KernelField(grid, np.zeros((801, 801), complex))
    assert np.all(antiderivative_in_y(zero, 10).F == 0)
    d = grid.points[None, :] - grid.points[:, None]
    vals = (d * np.exp(-(d / 6) ** 2)).astype(complex)
    res = antiderivative_in_y(KernelField(grid, vals), 400)
    h = grid.spacing
    fd = (res.F[2:] - res.F[:-2]) / (2 * h)
    # trapezoid antiderivative: the centered difference is f + h^2 f''/4 + O(h^4)
    curv = np.max(np.abs(np.diff(vals[400], 2))) / h**2
    assert np.max(np.abs(fd - vals[400, 1:-1])) <= 0.26 * h**2 * curv + 1e-12


def test_free_antiderivative_decays_at_grid_end():
    grid = SpatialGrid(np.linspace(-400, 400, 3201))
    res = antiderivative_in_y(free_f_field(grid, FermiData(1.0, 1.0)), 1600, tail_threshold=0.5)
    assert res.decay_mismatch <= 1e-3 * np.max(np.abs(res.F))


def test_free_refinement_within_error_estimate():
    f = FermiData(1.21, 0.81)
    a = conductance_free(f)
    b = conductance_free(f, Numerics(extent=2 * 40 / f.k_R, spacing=0.5 * math.pi / (4 * f.k_L)))
    assert abs(a.g - b.g) <= a.numeric_error_estimate


def test_interacting_at_zero_strength_is_one():
    r = conductance_interacting(BARRIER.with_alpha(0.0), FermiData(1.0, 1.0), Numerics(extent=120.0))
    assert r.g == pytest.approx(1.0, abs=1e-4)


def test_first_order_of_zero_potential_is_exactly_zero():
    res = first_order_correction(square(0.0, -1.0, 1.0), FermiData(1.21, 0.81))
    assert res.total == 0.0 and res.terms == (0.0, 0.0, 0.0)


def test_single_point_sweep_is_degenerate():
    res = sweep_alpha(BARRIER, FermiData(1.0, 1.0), [0.0])
    assert res.g0 == pytest.approx(1.0, abs=1e-4)
    assert res.g1 == 0.0 and res.g2 == 0.0
