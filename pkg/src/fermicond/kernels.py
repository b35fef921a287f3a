"""Free kernels in closed form and dressed kernels assembled from scattering states.

Distances are d = x - y throughout.  The dressed kernel of a spectral
multiplier m is

    K_m(x, y) = int dk/(2 pi) m(k) e_k(x) conj(e_k(y)),

so with no potential m = sgn gives i/(pi d) (the displayed A(x, y) with the
opposite sign) and m = 1/2 (chi_{|k|<k_L} + chi_{|k|<k_R}) gives Re B.
"""
import io
import json
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ConfigurationError, DomainError
from .scattering import PotentialSpec, solve_scattering_states
from .specfun import ci

DIAGONAL_CONVENTIONS = ("analytic-limit", "principal-value-zero")
# Smallest |k| sampled by dressed-kernel quadratures.  A potential of weak
# strength alpha changes the states on the scale k ~ alpha * int V, which
# falls below the single-state threshold for alpha ~ 1e-3.
K_FLOOR = 1e-6


@dataclass(frozen=True)
class FermiData:
    """Chemical potentials of left and right movers, E = k^2 units."""
    mu_L: float
    mu_R: float

    def __post_init__(self):
        for name in ("mu_L", "mu_R"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ConfigurationError(f"fermi.{name} must be a positive finite energy, got {v!r}")

    @property
    def k_L(self) -> float:
        return math.sqrt(self.mu_L)

    @property
    def k_R(self) -> float:
        return math.sqrt(self.mu_R)

    @property
    def k_F(self) -> float:
        return 0.5 * (self.k_L + self.k_R)

    @property
    def voltage(self) -> float:
        """eV = mu_L - mu_R."""
        return self.mu_L - self.mu_R

    def ordered(self):
        """(FermiData with k_L >= k_R, sign of the voltage after the swap)."""
        if self.mu_L >= self.mu_R:
            return self, 1.0
        return FermiData(self.mu_R, self.mu_L), -1.0

    @classmethod
    def from_k(cls, k_L: float, k_R: float) -> "FermiData":
        return cls(k_L * k_L, k_R * k_R)


@dataclass(frozen=True)
class SpatialGrid:
    points: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float)
        if p.ndim != 1 or p.size < 2:
            raise ConfigurationError("grid needs at least two points")
        dp = np.diff(p)
        if np.any(dp <= 0) or np.ptp(dp) > 1e-9 * dp[0]:
            raise ConfigurationError("grid points must be uniform and strictly increasing")
        p.setflags(write=False)
        object.__setattr__(self, "points", p)

    @property
    def spacing(self) -> float:
        return float(self.points[1] - self.points[0])

    @property
    def extent(self):
        return float(self.points[0]), float(self.points[-1])

    def __len__(self):
        return self.points.size

    @classmethod
    def uniform(cls, X: float, max_spacing: float, anchors=()) -> "SpatialGrid":
        """Uniform grid covering [-X, X] with spacing <= max_spacing.

        When two anchors a < b are given (a potential support) the spacing
        divides b - a and both land on grid points, so jumps of V fall on
        nodes rather than between them.
        """
        if not (X > 0 and max_spacing > 0):
            raise ConfigurationError("grid extent and spacing must be positive")
        if len(anchors) >= 2:
            a, b = anchors[0], anchors[-1]
            n = max(1, math.ceil((b - a) / max_spacing))
            h = (b - a) / n
            origin = a
        else:
            h = max_spacing
            origin = 0.0
        j0 = math.floor((-X - origin) / h)
        j1 = math.ceil((X - origin) / h)
        return cls(origin + h * np.arange(j0, j1 + 1))

    def to_dict(self) -> dict:
        lo, hi = self.extent
        return {"x_min": lo, "x_max": hi, "spacing": self.spacing, "n_points": len(self)}


@dataclass(frozen=True)
class KernelField:
    grid: SpatialGrid
    values: np.ndarray
    diagonal_convention: str = "analytic-limit"

    def __post_init__(self):
        n = len(self.grid)
        if self.values.shape != (n, n):
            raise ConfigurationError(f"kernel values must be {n}x{n}, got {self.values.shape}")
        if self.diagonal_convention not in DIAGONAL_CONVENTIONS:
            raise ConfigurationError(f"unknown diagonal convention {self.diagonal_convention!r}")

    def header(self) -> dict:
        return {"grid": self.grid.to_dict(), "diagonal_convention": self.diagonal_convention,
                "shape": list(self.values.shape)}

    def header_json(self) -> str:
        return json.dumps(self.header(), sort_keys=True)

    def to_csv(self, stream: Optional[io.TextIOBase] = None) -> str:
        out = stream if stream is not None else io.StringIO()
        out.write("x,y,re,im\n")
        x = self.grid.points
        for i in range(len(x)):
            for j in range(len(x)):
                v = self.values[i, j]
                out.write(f"{x[i]:.17e},{x[j]:.17e},{v.real:.17e},{v.imag:.17e}\n")
        return out.getvalue() if stream is None else ""


# ---------------------------------------------------------------- closed forms

def _diff(x, y):
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    return d


def _ret(v):
    v = np.asarray(v)
    return v if v.ndim else v.item()


def kernel_A(x, y):
    """A(x, y) = 1/(i pi (x - y)); antisymmetric, purely imaginary."""
    d = _diff(x, y)
    if np.any(d == 0):
        raise DomainError("kernel_A is singular on the diagonal")
    return _ret(1.0 / (1j * np.pi * d))


def _sinc_over_pi(k, d):
    """sin(k d)/(pi d), with the limit k/pi at d = 0."""
    d = np.asarray(d, dtype=float)
    out = np.full(d.shape, k / np.pi)
    nz = d != 0
    out[nz] = np.sin(k * d[nz]) / (np.pi * d[nz])
    return out


def kernel_B(x, y, fermi: FermiData):
    """sin(k_F d)/(pi d) e^{-i (k_L - k_R) d / 2}; Hermitian, diagonal (k_L + k_R)/(2 pi)."""
    d = _diff(x, y)
    v = _sinc_over_pi(fermi.k_F, d) * np.exp(-0.5j * (fermi.k_L - fermi.k_R) * d)
    return _ret(v)


def propagator(x, y, fermi: FermiData):
    """int_{-k_R}^{k_L} dk/(2 pi) e^{-ik(x-y)}; coincides with kernel_B."""
    d = _diff(x, y)
    # (e^{i k_R d} - e^{-i k_L d}) / (2 i pi d), factored to avoid cancellation at small d
    out = np.exp(0.5j * (fermi.k_R - fermi.k_L) * d) * _sinc_over_pi(fermi.k_F, d)
    return _ret(out)


def kernel_ReB(x, y, fermi: FermiData):
    """[sin k_L d + sin k_R d] / (2 pi d); real and even in d."""
    d = _diff(x, y)
    return _ret(0.5 * (_sinc_over_pi(fermi.k_L, d) + _sinc_over_pi(fermi.k_R, d)))


def band_limited_sgn_kernel(x, y, K: float):
    """int_{-K}^{K} dk/(2 pi) sgn(k) e^{ik(x-y)} = i (1 - cos K d)/(pi d); zero at d = 0."""
    d = _diff(x, y)
    out = np.zeros(d.shape, dtype=complex)
    nz = d != 0
    dn = d[nz]
    # 1 - cos(Kd) = 2 sin^2(Kd/2) avoids cancellation at small d
    out[nz] = 2j * np.sin(0.5 * K * dn) ** 2 / (np.pi * dn)
    return _ret(out)


def free_f(x, y, fermi: FermiData):
    """f(x, y) = (-i/2pi^2) [sin k_L d + sin k_R d] / d^2; odd in d, purely imaginary."""
    d = _diff(x, y)
    if np.any(d == 0):
        raise DomainError("free_f is singular on the diagonal")
    v = (-0.5j / np.pi ** 2) * (np.sin(fermi.k_L * d) + np.sin(fermi.k_R * d)) / d ** 2
    return _ret(v)


def free_f_residue(fermi: FermiData) -> complex:
    """Coefficient c of the simple pole f ~ c/d at d = 0."""
    return -0.5j * (fermi.k_L + fermi.k_R) / np.pi ** 2


def free_F(x, y, fermi: FermiData):
    """Antiderivative of free_f in y that vanishes as |y| -> inf.

    F = (i/2pi^2) sum_{k in (k_L, k_R)} [k Ci(k|d|) - sin(kd)/d]; dF/dy = free_f.
    """
    d = _diff(x, y)
    if np.any(d == 0):
        raise DomainError("free_F is singular on the diagonal")
    ad = np.abs(d)
    v = sum(k * ci(k * ad) - np.sin(k * d) / d for k in (fermi.k_L, fermi.k_R))
    return _ret((0.5j / np.pi ** 2) * v)


def free_f_product_form(x, y, fermi: FermiData):
    """i Im[(Pi_L - Pi_R)(y, x) * propagator(x, y)], with Pi_L - Pi_R = -kernel_A."""
    return _ret(1j * np.imag(-np.asarray(kernel_A(y, x)) * np.asarray(propagator(x, y, fermi))))


# ---------------------------------------------------------------- dressed kernels

def sgn_multiplier(k):
    """m_A(k) = sgn(k): Pi_L - Pi_R."""
    return np.sign(k)


def reB_multiplier(fermi: FermiData) -> Callable:
    """m_B(k) = (chi_{|k|<k_L} + chi_{|k|<k_R}) / 2."""
    def m(k):
        ak = np.abs(np.asarray(k, dtype=float))
        return 0.5 * ((ak < fermi.k_L).astype(float) + (ak < fermi.k_R).astype(float))
    return m


def propagator_multiplier(fermi: FermiData) -> Callable:
    """chi_{[0, k_L]} + chi_{[-k_R, 0]}, the occupied band."""
    def m(k):
        k = np.asarray(k, dtype=float)
        return (((k >= 0) & (k < fermi.k_L)) | ((k < 0) & (k > -fermi.k_R))).astype(float)
    return m


def _sliver_rule(k_min: float, n: int = 8):
    """Nodes on [k_min, 3 k_min] whose weights also integrate [0, k_min].

    The weights integrate the degree n-1 interpolant of the panel nodes over
    [0, 3 k_min]; the sliver below k_min is reached by extrapolation, so no
    state closer to threshold than k_min is ever solved.
    """
    t, w = np.polynomial.legendre.leggauss(n)
    P = np.polynomial.legendre.legvander(t, n - 1)          # P_m(t_j)
    moments = np.empty(n)
    for m in range(n):
        c = np.zeros(m + 1)
        c[m] = 1.0
        anti = np.polynomial.legendre.legint(c)
        moments[m] = np.polynomial.legendre.legval(1.0, anti) - np.polynomial.legendre.legval(-2.0, anti)
    coef = (2 * np.arange(n) + 1) / 2.0
    weights = w * ((P * coef) @ moments)
    half = k_min
    return 2 * k_min + half * t, half * weights


def k_quadrature(K: float, breakpoints=(), max_phase: float = 1.0, nodes: int = 16,
                 k_min: float = K_FLOOR):
    """Composite Gauss-Legendre rule on [-K, K], weights including 1/(2 pi).

    Panels split at 0, +-K and every breakpoint (multiplier jumps), and are
    narrow enough that e^{i k D} with D = max_phase is resolved.  Next to
    k = 0 a short panel with extrapolated weights covers [0, 3 k_min].
    """
    if not K > 0:
        raise ConfigurationError("band limit K must be positive")
    gx, gw = np.polynomial.legendre.leggauss(nodes)
    z0 = 3 * k_min
    width = min(0.75 * nodes / max(max_phase, 1e-12), K)
    cuts = {z0, K}
    cuts.update(abs(float(b)) for b in breakpoints if 0 < abs(b) < K)
    cuts = sorted(cuts)
    if cuts[0] != z0:
        raise ConfigurationError("multiplier breakpoint too close to k = 0")
    sk, sw = _sliver_rule(k_min)
    ks, ws = [sk], [sw]
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        n = max(1, math.ceil((hi - lo) / width))
        edges = np.linspace(lo, hi, n + 1)
        for p0, p1 in zip(edges[:-1], edges[1:]):
            ks.append(0.5 * (p0 + p1) + 0.5 * (p1 - p0) * gx)
            ws.append(0.5 * (p1 - p0) * gw)
    kp = np.concatenate(ks)
    wp = np.concatenate(ws)
    k = np.concatenate([-kp[::-1], kp])
    w = np.concatenate([wp[::-1], wp]) / (2 * np.pi)
    return k, w


@dataclass
class StateSet:
    """Scattering states sampled on a grid at the nodes of a k-quadrature."""
    grid: SpatialGrid
    k: np.ndarray
    weights: np.ndarray
    samples: np.ndarray   # (n_grid, n_k)
    transmission: np.ndarray
    reflection: np.ndarray

    @property
    def K(self) -> float:
        return float(np.max(np.abs(self.k)))


def build_states(spec: Optional[PotentialSpec], grid: SpatialGrid, K: float,
                 breakpoints=(), nodes: int = 16) -> StateSet:
    """Solve every scattering state needed for band-limited dressed kernels."""
    x = grid.points
    span = float(max(np.ptp(x), 2 * np.max(np.abs(x))))
    k, w = k_quadrature(K, breakpoints, max_phase=span, nodes=nodes)
    if spec is None or spec.alpha == 0.0:
        samples = np.exp(1j * np.outer(x, k))
        return StateSet(grid, k, w, samples, np.ones(k.shape, complex), np.zeros(k.shape, complex))
    t, r, samples = solve_scattering_states(spec, k, x, k_floor=K_FLOOR)
    return StateSet(grid, k, w, samples, t, r)


def assemble_dressed_kernel(states: StateSet, multiplier: Callable,
                            grid: Optional[SpatialGrid] = None) -> KernelField:
    """K_m(x_i, x_j) = sum_k w_k m(k) e_k(x_i) conj(e_k(x_j))."""
    if grid is not None and (len(grid) != len(states.grid)
                             or not np.array_equal(grid.points, states.grid.points)):
        raise ConfigurationError("states were sampled on a different grid")
    m = np.asarray(multiplier(states.k), dtype=float)
    if m.shape != states.k.shape or not np.all(np.isfinite(m)):
        raise ConfigurationError("multiplier must return finite values for every k node")
    E = states.samples
    vals = (E * (states.weights * m)) @ E.conj().T
    return KernelField(states.grid, vals, "analytic-limit")


def interacting_f(KA: KernelField, KB: KernelField) -> KernelField:
    """f(x, y) = i Im[KA(y, x) KB(x, y)]."""
    if len(KA.grid) != len(KB.grid) or not np.array_equal(KA.grid.points, KB.grid.points):
        raise ConfigurationError("interacting_f: kernels live on different grids")
    vals = 1j * np.imag(KA.values.T * KB.values)
    return KernelField(KA.grid, vals, "analytic-limit")


def free_f_field(grid: SpatialGrid, fermi: FermiData) -> KernelField:
    """Closed-form free f on a grid, zero on the diagonal."""
    x = grid.points
    d = x[:, None] - x[None, :]
    np.fill_diagonal(d, 1.0)
    v = np.asarray(free_f(d, 0.0, fermi))
    np.fill_diagonal(v, 0.0)
    return KernelField(grid, v, "principal-value-zero")
