"""Conductance from the current-density commutator kernel f(x, y).

With F(x, y) = -int_y^inf f(x, y') dy' the current through a probe point
y0 is proportional to J = int dx F(x, y0), and the dimensionless conductance
is g = Re(i pi J).  The constant i pi is the analytic value that makes the
free kernel give g = 1 exactly; it is fixed here once and never refitted.

J converges only conditionally, so the x-integral carries a Gaussian window
w(x) = exp(-(x/R)^2) and the probe is smeared over a width sigma.  For the
free kernel this multiplies J by exactly N(y0) = int w(x) theta_s'(x - y0) dx,
the window weight seen by the probe, and every estimate below is divided by
it.  Away from the free case the remaining window error shrinks as R grows;
it is measured by repeating the x-sum with a narrower window.
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import erf

from .errors import BoundStatesPresent, ConfigurationError, ExtentTooSmall, FermiCondError
from .kernels import (FermiData, KernelField, SpatialGrid, assemble_dressed_kernel,
                      build_states, free_f, free_F, free_f_residue, interacting_f,
                      reB_multiplier, sgn_multiplier)
from .quadrature import QuadratureOptions, integrate_adaptive
from .scattering import (PotentialSpec, bound_state_wavefunction, detect_bound_states,
                         fourier_transform_potential, solve_scattering_states)

CONDUCTANCE_SCALE = 1j * math.pi
PROBE_SPREAD_FLAG = 10.0


@dataclass(frozen=True)
class Numerics:
    """Discretization controls.  None means "derive from the physics"."""
    extent: Optional[float] = None        # X; default support radius + extent_scale / k_R
    extent_scale: float = 500.0
    spacing: Optional[float] = None       # default pi / (2 K) (interacting), pi / (4 k_L) (free)
    band_limit: Optional[float] = None    # K; default band_factor * k_L
    band_factor: float = 3.0
    window_ratio: float = 4.0             # R = X / window_ratio
    probe_width: float = 1.5              # sigma of the smeared probe
    probe_fractions: tuple = (-0.6, -0.3, 0.3, 0.6, 0.9)   # probes at fraction * R
    k_nodes: int = 16
    allow_bound_states: bool = False
    workers: int = 1

    def __post_init__(self):
        for name in ("extent", "spacing", "band_limit"):
            v = getattr(self, name)
            if v is not None and not (math.isfinite(v) and v > 0):
                raise ConfigurationError(f"numerics.{name} must be positive")
        for name in ("extent_scale", "band_factor", "window_ratio", "probe_width"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"numerics.{name} must be positive")
        if self.band_factor < 3.0:
            raise ConfigurationError("numerics.band_factor must be at least 3")
        if self.window_ratio < 3.5:
            raise ConfigurationError("numerics.window_ratio below 3.5 truncates the window")
        if len(self.probe_fractions) < 2 or any(abs(p) >= 1.5 for p in self.probe_fractions):
            raise ConfigurationError("numerics.probe_fractions needs >= 2 values inside (-1.5, 1.5)")
        if self.k_nodes < 4 or self.workers < 1:
            raise ConfigurationError("numerics.k_nodes >= 4 and numerics.workers >= 1 required")
        object.__setattr__(self, "probe_fractions", tuple(float(p) for p in self.probe_fractions))


@dataclass
class ConductanceReport:
    g: float
    numeric_error_estimate: float
    y_probe_spread: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def probe_spread_flagged(self) -> bool:
        return self.y_probe_spread > PROBE_SPREAD_FLAG * self.numeric_error_estimate

    def to_dict(self) -> dict:
        return {"g": self.g, "numeric_error_estimate": self.numeric_error_estimate,
                "y_probe_spread": self.y_probe_spread,
                "probe_spread_flagged": self.probe_spread_flagged,
                "diagnostics": self.diagnostics}


@dataclass
class SweepResult:
    alphas: list
    g_values: list
    errors: list
    g0: float
    g1: float
    g2: float
    fit_residual: float
    g3: float = 0.0
    reports: list = field(default_factory=list)

    @property
    def g2_negative(self) -> bool:
        return self.g2 < 0

    def to_dict(self) -> dict:
        return {"alphas": list(self.alphas), "g_values": list(self.g_values),
                "errors": list(self.errors), "g0": self.g0, "g1": self.g1, "g2": self.g2,
                "g3": self.g3, "fit_residual": self.fit_residual,
                "g2_negative": self.g2_negative}


class SweepAborted(FermiCondError):
    kind = "sweep-aborted"

    def __init__(self, message, partial: dict):
        super().__init__(message)
        self.partial = partial


# ---------------------------------------------------------------- primitives

@dataclass
class Antiderivative:
    y: np.ndarray
    F: np.ndarray
    decay_mismatch: float   # |F(x, y_min)|, ideally 0 since f integrates to 0 in y


def antiderivative_in_y(f: KernelField, x_index: int, tail_threshold: float = 1e-3) -> Antiderivative:
    """F(x, y) = -int_y^{X} f(x, y') dy' by the composite trapezoid rule.

    F(x, X) = 0 by construction.  Raises ExtentTooSmall when f has not
    decayed at the grid ends (relative to its largest value on the row).
    """
    row = np.asarray(f.values[x_index])
    y = f.grid.points
    h = f.grid.spacing
    peak = float(np.max(np.abs(row)))
    if peak > 0 and max(abs(row[0]), abs(row[-1])) > tail_threshold * peak:
        raise ExtentTooSmall(f"f(x, y) has not decayed at the grid ends (row {x_index})")
    seg = 0.5 * h * (row[1:] + row[:-1])
    F = np.zeros(row.shape, dtype=row.dtype)
    F[:-1] = -np.cumsum(seg[::-1])[::-1]
    return Antiderivative(y, F, float(abs(F[0])))


def probe_profile(y, y0, sigma):
    """Smeared step theta_s(y - y0) and its derivative."""
    u = (np.asarray(y) - y0) / sigma
    return 0.5 * (1 + erf(u)), np.exp(-u * u) / (sigma * math.sqrt(math.pi))


def window(x, R):
    return np.exp(-(np.asarray(x) / R) ** 2)


def windowed_currents(f: KernelField, R: float, probes, sigma: float,
                      residue: Optional[complex] = None):
    """g at each probe from a kernel sampled on a square grid.

    With the principal-value-zero diagonal, `residue` is the coefficient of
    the 1/(x-y) pole and the missing diagonal contribution is added back.
    """
    x = f.grid.points
    h = f.grid.spacing
    w = window(x, R)
    out = []
    for y0 in probes:
        th, dth = probe_profile(x, y0, sigma)
        J = -h * h * (w @ f.values @ th)
        if f.diagonal_convention == "principal-value-zero":
            if residue is None:
                raise ConfigurationError("singular kernel needs its pole residue")
            J += h * h * residue * np.sum(w * dth)
        N = h * np.sum(w * dth)
        out.append((CONDUCTANCE_SCALE * J).real / N)
    return np.array(out)


def _default_probes(R, fractions, support=None, sigma=1.5):
    probes = [p * R for p in fractions]
    if support is not None:
        a, b = support
        gap = 3 * sigma
        moved = []
        for y in probes:
            if a - gap < y < b + gap:
                y = b + gap if y >= 0.5 * (a + b) else a - gap
            moved.append(y)
        probes = moved
    return probes


# ---------------------------------------------------------------- free case

def _free_layout(fermi: FermiData, numerics: Numerics):
    X = numerics.extent if numerics.extent is not None else 40.0 / fermi.k_R
    h = numerics.spacing if numerics.spacing is not None else math.pi / (4 * fermi.k_L)
    R = X / numerics.window_ratio
    return X, h, R


def free_current_toeplitz(fermi: FermiData, X: float, h: float, R: float, probes, sigma: float):
    """Free pipeline with the double sum folded onto the distance d = x - y.

    The double trapezoid sum over (x, y') depends on d = jh only through
    C_j = h sum_x w(x) theta_s(x - jh - y0), so it costs O(n) instead of
    O(n^2).  The diagonal j = 0 is the principal value of the 1/d pole,
    restored by the residue term.  Beyond |d| = 2X the sum is closed with
    a long direct sum and then the exact antiderivative free_F.
    """
    x = h * np.arange(-math.ceil(X / h), math.ceil(X / h) + 1)
    w = window(x, R)
    M = int(math.ceil(2 * X / h))
    j = np.arange(-M, M + 1)
    d = j * h
    nz = j != 0
    phi = np.zeros(d.shape, dtype=complex)
    phi[nz] = free_f(d[nz], 0.0, fermi)
    c1 = free_f_residue(fermi)
    # for d < -2X every probe sees the whole window, so those terms reduce
    # to a plain sum of phi; it is summed directly far out, then closed with
    # the exact antiderivative where the sum and the integral agree
    far = h * (M + 1 + np.arange(200000))
    D = far[-1] + 0.5 * h
    tail_integral = -(h * np.sum(free_f(far, 0.0, fermi)) + free_F(D, 0.0, fermi))
    total_w = h * np.sum(w)
    out = []
    for y0 in probes:
        th, dth = probe_profile(x[None, :] - d[:, None], y0, sigma)
        C = th @ w * h
        dC0 = -h * np.sum(w * dth[M])
        S = h * np.sum(phi * C) + h * c1 * dC0
        S += total_w * tail_integral
        J = -S
        N = h * np.sum(w * dth[M])
        out.append((CONDUCTANCE_SCALE * J).real / N)
    return np.array(out)


def conductance_free(fermi: FermiData, numerics: Numerics = Numerics()) -> ConductanceReport:
    """Dimensionless conductance of the free wire; analytically 1."""
    ordered, sign = fermi.ordered()
    X, h, R = _free_layout(ordered, numerics)
    sigma = numerics.probe_width
    probes = _default_probes(R, numerics.probe_fractions)
    g_probe = free_current_toeplitz(ordered, X, h, R, probes, sigma)
    g_narrow = free_current_toeplitz(ordered, X, h, 0.8 * R, [0.8 * p for p in probes], sigma)
    g = float(np.mean(g_probe))
    # the floor covers roundoff in the long tail sums
    err = abs(g - float(np.mean(g_narrow))) + 5e-11
    spread = float(np.ptp(g_probe))
    diag = {"extent": X, "spacing": h, "window_radius": R, "probes": list(map(float, probes)),
            "g_per_probe": list(map(float, g_probe)), "probe_width": sigma,
            "voltage": fermi.voltage, "current": g * fermi.voltage,
            "decay_mismatch": float(abs(free_F(2 * X, 0.0, ordered)))}
    return ConductanceReport(g, err, spread, diag)


# ---------------------------------------------------------------- interacting case

def _interacting_layout(spec: PotentialSpec, fermi: FermiData, numerics: Numerics):
    a, b = spec.support
    K = numerics.band_limit if numerics.band_limit is not None else numerics.band_factor * fermi.k_L
    if K < 3 * max(fermi.k_L, fermi.k_R) * (1 - 1e-12):
        raise ConfigurationError(
            f"numerics.band_limit = {K} is below 3 * max(k_L, k_R) = {3 * fermi.k_L}")
    X = numerics.extent
    if X is None:
        X = max(abs(a), abs(b)) + numerics.extent_scale / fermi.k_R
    if X <= max(abs(a), abs(b)) + 10.0 / fermi.k_R:
        raise ExtentTooSmall("numerics.extent barely exceeds the potential support")
    h = numerics.spacing if numerics.spacing is not None else math.pi / (2 * K)
    R = X / numerics.window_ratio
    return K, X, h, R


def interacting_kernel(spec: PotentialSpec, fermi: FermiData, grid: SpatialGrid, K: float,
                       k_nodes: int = 16, include_bound_states: bool = True):
    """Dressed f on `grid` plus the state set and bound-state report."""
    states = build_states(spec, grid, K, breakpoints=(fermi.k_L, fermi.k_R), nodes=k_nodes)
    KA = assemble_dressed_kernel(states, sgn_multiplier)
    KB = assemble_dressed_kernel(states, reB_multiplier(fermi))
    report = detect_bound_states(spec)
    if include_bound_states and report.count:
        # occupied bound states belong to the Fermi sea; the sgn multiplier
        # annihilates them, so they change only how fast the window converges
        vals = KB.values.copy()
        for E in report.energies:
            psi = bound_state_wavefunction(spec, E, grid.points)
            vals += np.outer(psi, psi)
        KB = KernelField(grid, vals, KB.diagonal_convention)
    return interacting_f(KA, KB), states, report


def conductance_interacting(spec: PotentialSpec, fermi: FermiData,
                            numerics: Numerics = Numerics()) -> ConductanceReport:
    """Conductance of the wire with the external potential alpha V."""
    ordered, _ = fermi.ordered()
    bound = detect_bound_states(spec)
    if bound.count and not numerics.allow_bound_states:
        raise BoundStatesPresent(
            f"potential binds {bound.count} state(s) at alpha = {spec.alpha}; "
            "pass allow_bound_states to compute from the scattering states")
    K, X, h, R = _interacting_layout(spec, ordered, numerics)
    grid = SpatialGrid.uniform(X, h, anchors=spec.support)
    f, states, _ = interacting_kernel(spec, ordered, grid, K, numerics.k_nodes)
    sigma = numerics.probe_width
    probes = _default_probes(R, numerics.probe_fractions, spec.support, sigma)
    g_probe = windowed_currents(f, R, probes, sigma)
    g_narrow = windowed_currents(f, 0.8 * R, [0.8 * p for p in probes], sigma)
    g = float(np.mean(g_probe))
    err = abs(g - float(np.mean(g_narrow))) + 1e-12
    t_F = solve_scattering_states(spec, [ordered.k_F])[0][0]
    diag = {"extent": X, "spacing": grid.spacing, "band_limit": K, "window_radius": R,
            "n_grid": len(grid), "n_k": int(states.k.size),
            "probes": list(map(float, probes)), "g_per_probe": list(map(float, g_probe)),
            "probe_width": sigma, "bound_state_count": bound.count,
            "bound_state_energies": list(bound.energies),
            "bound_states_allowed": bool(numerics.allow_bound_states),
            "landauer_transmission": float(abs(t_F) ** 2),
            "alpha": spec.alpha, "voltage": fermi.voltage, "current": g * fermi.voltage}
    return ConductanceReport(g, err, float(np.ptp(g_probe)), diag)


def conductance(spec: Optional[PotentialSpec], fermi: FermiData,
                numerics: Numerics = Numerics()) -> ConductanceReport:
    """Free pipeline for a missing or zero-strength potential, dressed pipeline otherwise."""
    if spec is None or spec.alpha == 0.0:
        return conductance_free(fermi, numerics)
    return conductance_interacting(spec, fermi, numerics)


# ---------------------------------------------------------------- first order

def inner_si_integral(k: float, xi):
    """int dx e^{i xi x/2} sin(kx) Si(xi x/2) / x, in closed form.

    Equals i (pi/2) ln(|xi| / |2k - |xi||) for |xi| > k and 0 otherwise.
    """
    a = np.abs(np.asarray(xi, dtype=float))
    out = np.zeros(a.shape, dtype=complex)
    m = (a > k) & (a != 2 * k)
    out[m] = 0.5j * math.pi * np.log(a[m] / np.abs(2 * k - a[m]))
    return out


def inner_ci_integral(k: float, xi):
    """int dx e^{i xi x/2} [Ci(|k - xi/2| |x|) - Ci(|k + xi/2| |x|)] / x, in closed form.

    With s = |xi|/2 this is -i pi ln(s / |k - s|) where |k - s| < s, else 0.
    """
    s = 0.5 * np.abs(np.asarray(xi, dtype=float))
    out = np.zeros(s.shape, dtype=complex)
    m = (np.abs(k - s) < s) & (s != k)
    out[m] = -1j * math.pi * np.log(s[m] / np.abs(k - s[m]))
    return out


@dataclass
class FirstOrderResult:
    terms: tuple           # imaginary parts of (Si term, Ci term at k_L, Ci term at k_R)
    total: float
    scale: float           # largest |term|
    converged: bool

    @property
    def relative(self) -> float:
        return abs(self.total) / self.scale if self.scale else 0.0

    def to_dict(self) -> dict:
        return {"terms": list(self.terms), "total": self.total, "scale": self.scale,
                "relative": self.relative, "converged": self.converged}


def _xi_integral(spec, k, inner, tol):
    """int_{|xi|>k} dxi V~(xi)/(i xi^2) inner(k, xi), folded onto xi > k."""
    def g(xi):
        xi = np.asarray(xi, dtype=float)
        v = fourier_transform_potential(spec, xi) + fourier_transform_potential(spec, -xi)
        return v / (1j * xi * xi) * inner(k, xi)

    a, b = spec.support
    omega = max(abs(a), abs(b), 1.0)
    T = max(400.0, 40 * k)
    opts = QuadratureOptions(abs_tol=tol, rel_tol=tol, max_subdivisions=50000)
    bps = list(np.arange(2 * k, T, math.pi / omega)) + [2 * k]
    core = integrate_adaptive(g, k, T, opts, breakpoints=bps)
    # beyond T the integrand is O(xi^-4): map xi = T/u
    tail = integrate_adaptive(lambda u: g(T / u) * T / u ** 2, 1e-9, 1.0, opts)
    return core.value + tail.value, core.converged


def first_order_correction(spec: PotentialSpec, fermi: FermiData, tol: float = 1e-12) -> FirstOrderResult:
    """The three first-order-in-alpha contributions to the current, and their sum.

    The Si term comes from the commutator with Re W1; the two Ci terms from
    the dressed propagator at k_L and k_R.  Each x-integral is taken in
    closed form, each xi-integral by adaptive quadrature.  Unit strength.
    """
    kL, kR = fermi.k_L, fermi.k_R
    c = (2 * math.pi) ** 1.5
    si_L, ok1 = _xi_integral(spec, kL, inner_si_integral, tol)
    si_R, ok2 = _xi_integral(spec, kR, inner_si_integral, tol)
    ci_L, ok3 = _xi_integral(spec, kL, inner_ci_integral, tol)
    ci_R, ok4 = _xi_integral(spec, kR, inner_ci_integral, tol)
    t1 = 2 / (1j * c) * (si_L + si_R) / (2 * math.pi)
    t2 = 1 / (2 * c) * ci_L / (1j * math.pi)
    t3 = 1 / (2 * c) * ci_R / (1j * math.pi)
    # V~(xi) + V~(-xi) is real, so every term is purely imaginary
    terms = tuple(float(np.imag(t)) for t in (t1, t2, t3))
    total = float(np.imag(t1 + t2 + t3))
    scale = max(abs(t) for t in terms)
    return FirstOrderResult(terms, total, scale, ok1 and ok2 and ok3 and ok4)


# ---------------------------------------------------------------- sweep

def fit_sweep(alphas, g_values):
    """(g0, g1, g2, g3, residual).

    Symmetric alpha sets get an even fit g0 + g2 a^2 (+ g4 a^4 with enough
    points) and a separate odd fit g1 a + g3 a^3 of (g(a) - g(-a))/2.
    Otherwise a plain quadratic least-squares fit is used.
    """
    a = np.asarray(alphas, dtype=float)
    g = np.asarray(g_values, dtype=float)
    if a.size == 1:
        return float(g[0]), 0.0, 0.0, 0.0, 0.0
    pos = np.sort(a[a > 0])
    symmetric = pos.size > 0 and all(np.any(np.isclose(a, -p, rtol=0, atol=1e-15)) for p in pos) \
        and np.sum(a < 0) == pos.size
    if symmetric:
        npos = pos.size
        even_cols = [np.ones_like(a), a ** 2] + ([a ** 4] if npos + (0 in a) >= 3 else [])
        Ae = np.column_stack(even_cols)
        ce, *_ = np.linalg.lstsq(Ae, g, rcond=None)
        g0, g2 = ce[0], ce[1]
        gp = np.array([g[np.isclose(a, p, rtol=0, atol=1e-15)][0] for p in pos])
        gm = np.array([g[np.isclose(a, -p, rtol=0, atol=1e-15)][0] for p in pos])
        odd = 0.5 * (gp - gm)
        Ao = np.column_stack([pos, pos ** 3] if npos >= 2 else [pos])
        co, *_ = np.linalg.lstsq(Ao, odd, rcond=None)
        g1 = co[0]
        g3 = co[1] if npos >= 2 else 0.0
        model = Ae @ ce + g1 * a + g3 * a ** 3
    else:
        A = np.column_stack([np.ones_like(a), a, a ** 2])
        c, *_ = np.linalg.lstsq(A, g, rcond=None)
        g0, g1, g2, g3 = c[0], c[1], c[2], 0.0
        model = A @ c
    resid = float(np.sqrt(np.mean((g - model) ** 2)))
    return float(g0), float(g1), float(g2), float(g3), resid


def sweep_alpha(spec: PotentialSpec, fermi: FermiData, alphas: Sequence[float],
                numerics: Numerics = Numerics()) -> SweepResult:
    """Conductance over a list of strengths, with the small-alpha fit."""
    alphas = [float(a) for a in alphas]
    if not alphas:
        raise ConfigurationError("alphas must not be empty")

    def one(alpha):
        return conductance(spec.with_alpha(alpha), fermi, numerics)

    reports = [None] * len(alphas)
    with ThreadPoolExecutor(max_workers=numerics.workers) as pool:
        futures = [pool.submit(one, a) for a in alphas]
        for i, fut in enumerate(futures):
            try:
                reports[i] = fut.result()
            except FermiCondError as exc:
                done = [(alphas[j], reports[j].g) for j in range(i) if reports[j] is not None]
                for other in futures[i + 1:]:
                    other.cancel()
                raise SweepAborted(f"alpha = {alphas[i]}: {exc}",
                                   {"alphas": [p[0] for p in done], "g_values": [p[1] for p in done],
                                    "failed_alpha": alphas[i], "reason": str(exc)}) from exc
    gs = [r.g for r in reports]
    errs = [r.numeric_error_estimate for r in reports]
    g0, g1, g2, g3, resid = fit_sweep(alphas, gs)
    return SweepResult(alphas, gs, errs, g0, g1, g2, resid, g3, reports)
