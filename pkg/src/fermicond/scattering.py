"""One-particle scattering for H = -d^2/dx^2 + alpha V(x), supp V in [a, b].

Units: hbar = 1, 2m = 1, so E = k^2.  States use the standard convention:
for k > 0 the wave comes in from the left,

    e_k(x) = e^{ikx} + r e^{-ikx}   (x < a),    t e^{ikx}   (x > b),

and for k < 0 it comes in from the right (e^{ikx} moves left),

    e_k(x) = t e^{ikx}   (x < a),    e^{ikx} + r e^{-ikx}   (x > b).

With measure dk/(2 pi) these states resolve the identity on the
scattering subspace.
"""
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import wofz

from .errors import (ConfigurationError, DomainError, NearThresholdError,
                     NonConvergenceError, PotentialDataError)
from .specfun import ci, si
from .quadrature import QuadratureOptions, integrate_adaptive

SHAPES = ("square", "truncated-gaussian", "piecewise-linear", "sampled")
K_MIN = 1e-3
_C = (2 * math.pi) ** -0.5
_PARAM_KEYS = {
    "square": {"V0"},
    "truncated-gaussian": {"V0", "center", "width"},
    "piecewise-linear": {"nodes"},
    "sampled": {"x", "v"},
}


@dataclass(frozen=True)
class PotentialSpec:
    shape: str
    support: tuple
    params: dict = field(default_factory=dict, hash=False)
    alpha: float = 1.0

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ConfigurationError(f"unknown potential shape {self.shape!r}")
        a, b = (float(v) for v in self.support)
        if not a < b:
            raise ConfigurationError("potential support needs a < b")
        object.__setattr__(self, "support", (a, b))
        object.__setattr__(self, "alpha", float(self.alpha))
        keys = set(self.params)
        if keys != _PARAM_KEYS[self.shape]:
            raise ConfigurationError(
                f"{self.shape} potential needs params {sorted(_PARAM_KEYS[self.shape])}, got {sorted(keys)}")
        if self.shape == "truncated-gaussian" and not self.params["width"] > 0:
            raise ConfigurationError("truncated-gaussian width must be positive")
        if self.shape in ("piecewise-linear", "sampled"):
            xs, _ = self._nodes()
            if np.any(np.diff(xs) <= 0):
                raise ConfigurationError("potential abscissae must be strictly increasing")
            if xs[0] < a or xs[-1] > b:
                raise ConfigurationError("potential abscissae must lie inside the support")

    def _nodes(self):
        if self.shape == "piecewise-linear":
            nodes = np.asarray(self.params["nodes"], dtype=float)
            return nodes[:, 0], nodes[:, 1]
        return (np.asarray(self.params["x"], dtype=float),
                np.asarray(self.params["v"], dtype=float))

    def with_alpha(self, alpha: float) -> "PotentialSpec":
        return PotentialSpec(self.shape, self.support, self.params, alpha)

    @property
    def breakpoints(self):
        """Points where V or V' may jump (support ends and nodes)."""
        a, b = self.support
        pts = {a, b}
        if self.shape in ("piecewise-linear", "sampled"):
            pts.update(float(x) for x in self._nodes()[0])
        return sorted(pts)

    def to_dict(self) -> dict:
        return {"shape": self.shape, "support": list(self.support),
                "params": _plain(self.params), "alpha": self.alpha}

    @classmethod
    def from_dict(cls, d: dict) -> "PotentialSpec":
        allowed = {"shape", "support", "params", "alpha"}
        extra = set(d) - allowed
        if extra:
            raise ConfigurationError(f"unknown potential field(s): {sorted(extra)}")
        missing = {"shape", "support", "params"} - set(d)
        if missing:
            raise ConfigurationError(f"missing potential field(s): {sorted(missing)}")
        if len(d["support"]) != 2:
            raise ConfigurationError("support must be [a, b]")
        return cls(d["shape"], tuple(d["support"]), dict(d["params"]), d.get("alpha", 1.0))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "PotentialSpec":
        return cls.from_dict(json.loads(text))


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def square(V0: float, a: float, b: float, alpha: float = 1.0) -> PotentialSpec:
    return PotentialSpec("square", (a, b), {"V0": V0}, alpha)


def truncated_gaussian(V0: float, center: float, width: float, a: float, b: float,
                       alpha: float = 1.0) -> PotentialSpec:
    return PotentialSpec("truncated-gaussian", (a, b),
                         {"V0": V0, "center": center, "width": width}, alpha)


def _unit_potential(spec: PotentialSpec, x):
    x = np.asarray(x, dtype=float)
    a, b = spec.support
    inside = (x >= a) & (x <= b)
    out = np.zeros_like(x)
    p = spec.params
    if spec.shape == "square":
        out[inside] = p["V0"]
    elif spec.shape == "truncated-gaussian":
        xi = x[inside]
        out[inside] = p["V0"] * np.exp(-0.5 * ((xi - p["center"]) / p["width"]) ** 2)
    else:
        xs, vs = spec._nodes()
        out[inside] = np.interp(x[inside], xs, vs, left=0.0, right=0.0)
    return out


def evaluate_potential(spec: PotentialSpec, x):
    """alpha * V(x); exactly zero outside the support."""
    v = spec.alpha * _unit_potential(spec, x)
    return v if np.ndim(v) else float(v)


def _jumps(spec):
    """(x_j, jump of V, jump of V') at every breakpoint of the unit-strength V."""
    a, b = spec.support
    p = spec.params
    if spec.shape == "square":
        return [(a, p["V0"], 0.0), (b, -p["V0"], 0.0)]
    if spec.shape == "truncated-gaussian":
        c, w = p["center"], p["width"]
        v = lambda z: p["V0"] * math.exp(-0.5 * ((z - c) / w) ** 2)
        dv = lambda z: -(z - c) / w ** 2 * v(z)
        return [(a, v(a), dv(a)), (b, -v(b), -dv(b))]
    xs, vs = spec._nodes()
    if len(xs) == 1:
        return []
    slopes = np.diff(vs) / np.diff(xs)
    out = [(xs[0], vs[0], slopes[0])]
    for i in range(1, len(xs) - 1):
        out.append((xs[i], 0.0, slopes[i] - slopes[i - 1]))
    out.append((xs[-1], -vs[-1], -slopes[-1]))
    return [(float(x), float(dv), float(ds)) for x, dv, ds in out]


def fourier_transform_potential(spec: PotentialSpec, xi):
    """V~(xi) = (2 pi)^(-1/2) int e^{-i xi z} V(z) dz for the unit-strength V.

    Closed forms throughout: piecewise-linear shapes (square, nodes, samples)
    integrate by parts twice onto their breakpoints; the truncated Gaussian
    goes through the Faddeeva function.
    """
    xi = np.asarray(xi, dtype=float)
    scalar = xi.ndim == 0
    xi = np.atleast_1d(xi)
    if spec.shape == "truncated-gaussian":
        out = _gaussian_ft(spec, xi)
    else:
        out = np.zeros(xi.shape, dtype=complex)
        a, b = spec.support
        small = np.abs(xi) * (b - a) < 0.5
        if np.any(small):
            out[small] = _quad_ft(spec, xi[small])
        xb = xi[~small]
        if xb.size:
            acc = np.zeros(xb.shape, dtype=complex)
            for x, dv, ds in _jumps(spec):
                acc += np.exp(-1j * xb * x) * (dv + ds / (1j * xb))
            out[~small] = _C * acc / (1j * xb)
    return out[0] if scalar else out


def _quad_ft(spec, xi):
    bps = spec.breakpoints
    gx, gw = np.polynomial.legendre.leggauss(32)
    out = np.zeros(xi.shape, dtype=complex)
    for lo, hi in zip(bps[:-1], bps[1:]):
        z = 0.5 * (lo + hi) + 0.5 * (hi - lo) * gx
        w = 0.5 * (hi - lo) * gw * _unit_potential(spec, z)
        out += np.exp(-1j * np.outer(xi, z)) @ w
    return _C * out


def _gaussian_ft(spec, xi):
    p = spec.params
    a, b = spec.support
    c, w = p["center"], p["width"]
    eta = xi * w / math.sqrt(2)

    def scaled_erf(x):
        # e^{-eta^2} erf(beta + i eta), evaluated without overflow
        beta = (x - c) / (math.sqrt(2) * w)
        s = 1.0 if beta >= 0 else -1.0
        z = beta + 1j * eta
        return s * (np.exp(-eta ** 2)
                    - np.exp(-beta ** 2 - 2j * beta * eta) * wofz(1j * s * z))

    diff = scaled_erf(b) - scaled_erf(a)
    return _C * p["V0"] * w * math.sqrt(math.pi / 2) * np.exp(-1j * xi * c) * diff


# ---------------------------------------------------------------- scattering

@dataclass
class ScatteringState:
    k: float
    transmission: complex
    reflection: complex
    samples: Optional[np.ndarray] = None

    @property
    def flux_defect(self) -> float:
        return abs(abs(self.transmission) ** 2 + abs(self.reflection) ** 2 - 1.0)


def step_size(spec: PotentialSpec, k_abs_max: float) -> float:
    a, b = spec.support
    return min(0.01, (b - a) / 2000.0, 0.01 / max(k_abs_max, 1e-300))


def _stations(spec, grid_points, h):
    a, b = spec.support
    pts = set(spec.breakpoints)
    if grid_points is not None:
        gp = np.asarray(grid_points)
        pts.update(float(x) for x in gp[(gp > a) & (gp < b)])
    st = np.array(sorted(pts))
    return st


def _rk4_sweep(spec, ks, stations, h, reverse):
    """Integrate psi'' = (alpha V - k^2) psi across the stations.

    Starts at the transmitted side with psi = e^{ikx} (unit transmitted
    amplitude) and returns psi, psi' at every station (rows) for every k.
    """
    ks = np.asarray(ks, dtype=float)
    order = stations[::-1] if reverse else stations
    x0 = order[0]
    psi = np.exp(1j * ks * x0)
    dpsi = 1j * ks * psi
    k2 = ks * ks
    out_psi = np.empty((len(order), len(ks)), dtype=complex)
    out_dpsi = np.empty_like(out_psi)
    out_psi[0], out_dpsi[0] = psi, dpsi
    a, b = spec.support
    for i in range(1, len(order)):
        xa, xb = order[i - 1], order[i]
        n = max(1, int(math.ceil(abs(xb - xa) / h)))
        dx = (xb - xa) / n
        # sample V strictly inside the segment so jumps at the ends use the
        # interior value
        xs = xa + dx * np.arange(n + 1)
        mid = xa + dx * (np.arange(n) + 0.5)
        eps = 1e-12 * max(1.0, abs(b - a))
        xs_in = xs.copy()
        xs_in[0] += np.sign(dx) * eps
        xs_in[-1] -= np.sign(dx) * eps
        V_end = spec.alpha * _unit_potential(spec, xs_in)
        V_mid = spec.alpha * _unit_potential(spec, mid)
        for j in range(n):
            q0 = V_end[j] - k2
            qm = V_mid[j] - k2
            q1 = V_end[j + 1] - k2
            k1p, k1d = dpsi, q0 * psi
            k2p = dpsi + 0.5 * dx * k1d
            k2d = qm * (psi + 0.5 * dx * k1p)
            k3p = dpsi + 0.5 * dx * k2d
            k3d = qm * (psi + 0.5 * dx * k2p)
            k4p = dpsi + dx * k3d
            k4d = q1 * (psi + dx * k3p)
            psi = psi + dx / 6 * (k1p + 2 * k2p + 2 * k3p + k4p)
            dpsi = dpsi + dx / 6 * (k1d + 2 * k2d + 2 * k3d + k4d)
        out_psi[i], out_dpsi[i] = psi, dpsi
    if reverse:
        out_psi, out_dpsi = out_psi[::-1], out_dpsi[::-1]
    return out_psi, out_dpsi


def _check_potential(spec):
    xs = np.linspace(*spec.support, 257)
    if not np.all(np.isfinite(_unit_potential(spec, xs))) or not math.isfinite(spec.alpha):
        raise PotentialDataError("non-finite potential sample")


def solve_scattering_states(spec: PotentialSpec, ks, grid_points=None, h=None,
                            k_floor: float = K_MIN):
    """Vectorized solver.  Returns (t, r, samples) with samples[i, j] = e_{k_j}(x_i).

    `samples` is None when no grid is given.  `k_floor` guards the k -> 0
    threshold; only quadratures that must resolve the low-energy structure
    of weak potentials lower it.
    """
    ks = np.atleast_1d(np.asarray(ks, dtype=float))
    if np.any(np.abs(ks) < k_floor):
        raise NearThresholdError(f"|k| below threshold {k_floor}")
    _check_potential(spec)
    gp = None if grid_points is None else np.asarray(grid_points, dtype=float)
    t = np.ones(ks.shape, dtype=complex)
    r = np.zeros(ks.shape, dtype=complex)
    samples = None
    if gp is not None:
        samples = np.exp(1j * np.outer(gp, ks))
    if spec.alpha == 0.0:
        return t, r, samples
    a, b = spec.support
    if h is None:
        h = step_size(spec, np.max(np.abs(ks)))
    stations = _stations(spec, gp, h)
    for sign in (1, -1):
        sel = np.nonzero(np.sign(ks) == sign)[0]
        if sel.size == 0:
            continue
        kk = ks[sel]
        psi, dpsi = _rk4_sweep(spec, kk, stations, h, reverse=(sign > 0))
        # decompose at the incident side
        i_inc = 0 if sign > 0 else len(stations) - 1
        xi = stations[i_inc]
        p, dp = psi[i_inc], dpsi[i_inc]
        A = 0.5 * (p + dp / (1j * kk)) * np.exp(-1j * kk * xi)   # incident
        B = 0.5 * (p - dp / (1j * kk)) * np.exp(1j * kk * xi)    # reflected
        t[sel] = 1.0 / A
        r[sel] = B / A
        if gp is not None:
            left = gp < a
            right = gp > b
            inside = ~(left | right)
            if sign > 0:
                samples[np.ix_(left, sel)] = (np.exp(1j * np.outer(gp[left], kk))
                                              + r[sel] * np.exp(-1j * np.outer(gp[left], kk)))
                samples[np.ix_(right, sel)] = t[sel] * np.exp(1j * np.outer(gp[right], kk))
            else:
                samples[np.ix_(right, sel)] = (np.exp(1j * np.outer(gp[right], kk))
                                               + r[sel] * np.exp(-1j * np.outer(gp[right], kk)))
                samples[np.ix_(left, sel)] = t[sel] * np.exp(1j * np.outer(gp[left], kk))
            if np.any(inside):
                idx = np.searchsorted(stations, gp[inside])
                samples[np.ix_(inside, sel)] = psi[idx] * t[sel]
    return t, r, samples


def solve_scattering_state(spec: PotentialSpec, k: float, grid=None) -> ScatteringState:
    pts = None if grid is None else getattr(grid, "points", grid)
    t, r, s = solve_scattering_states(spec, [k], pts)
    return ScatteringState(float(k), complex(t[0]), complex(r[0]),
                           None if s is None else s[:, 0])


def square_barrier_transmission(V0: float, half_width: float, E: float) -> float:
    """Closed-form |t|^2 for a rectangular barrier of height V0, width 2w, E > V0."""
    kp = math.sqrt(E - V0)
    return 1.0 / (1.0 + V0 ** 2 * math.sin(2 * half_width * kp) ** 2 / (4 * E * (E - V0)))


def born_reflection(spec: PotentialSpec, k):
    """First Born reflection amplitude for left incidence (k > 0)."""
    k = np.asarray(k, dtype=float)
    return spec.alpha * fourier_transform_potential(spec, -2 * k) / (_C * 2j * k)


# ---------------------------------------------------------------- bound states

@dataclass(frozen=True)
class BoundStateReport:
    count: int
    energies: tuple


def _real_sweep(spec, E, h):
    """Zero count and end values of the solution decaying at -inf, energy E <= 0."""
    a, b = spec.support
    kappa = math.sqrt(max(-E, 0.0))
    st = np.array(spec.breakpoints)
    psi, dpsi = 1.0, kappa
    nodes = 0
    for xa, xb in zip(st[:-1], st[1:]):
        n = max(1, int(math.ceil((xb - xa) / h)))
        dx = (xb - xa) / n
        eps = 1e-12 * (b - a)
        xs = xa + dx * np.arange(n + 1)
        xs[0] += eps
        xs[-1] -= eps
        Ve = spec.alpha * _unit_potential(spec, xs) - E
        Vm = spec.alpha * _unit_potential(spec, xa + dx * (np.arange(n) + 0.5)) - E
        for j in range(n):
            k1p, k1d = dpsi, Ve[j] * psi
            k2p, k2d = dpsi + 0.5 * dx * k1d, Vm[j] * (psi + 0.5 * dx * k1p)
            k3p, k3d = dpsi + 0.5 * dx * k2d, Vm[j] * (psi + 0.5 * dx * k2p)
            k4p, k4d = dpsi + dx * k3d, Ve[j + 1] * (psi + dx * k3p)
            new = psi + dx / 6 * (k1p + 2 * k2p + 2 * k3p + k4p)
            dpsi = dpsi + dx / 6 * (k1d + 2 * k2d + 2 * k3d + k4d)
            if new == 0.0 or (new > 0) != (psi > 0):
                nodes += 1
            psi = new
    return nodes, psi, dpsi, kappa


def _count_below(spec, E, h):
    """Number of bound states with energy < E (E <= 0), by Sturm node counting."""
    nodes, psi, dpsi, kappa = _real_sweep(spec, E, h)
    # continuation beyond b: psi cosh(kappa s) + dpsi/kappa sinh(kappa s)
    if kappa == 0.0:
        extra = 1 if psi * dpsi < 0 else 0
    else:
        extra = 1 if (psi * dpsi < 0 and abs(dpsi) > kappa * abs(psi)) else 0
    return nodes + extra


def detect_bound_states(spec: PotentialSpec, tol: float = 1e-12) -> BoundStateReport:
    if spec.alpha == 0.0:
        return BoundStateReport(0, ())
    a, b = spec.support
    h = min(0.01, (b - a) / 2000.0)
    n = _count_below(spec, 0.0, h)
    if n == 0:
        return BoundStateReport(0, ())
    xs = np.linspace(a, b, 4001)
    vmin = float(np.min(evaluate_potential(spec, xs)))
    energies = []
    for level in range(n):
        lo, hi = vmin - 1e-9 - 1e-9 * abs(vmin), 0.0
        # smallest E with count_below(E) > level
        while hi - lo > tol * max(1.0, abs(lo)):
            mid = 0.5 * (lo + hi)
            if _count_below(spec, mid, h) > level:
                hi = mid
            else:
                lo = mid
        energies.append(0.5 * (lo + hi))
    return BoundStateReport(n, tuple(energies))


# ---------------------------------------------------------------- Born terms

_XI_CUT = 400.0


def _power_tail(omega, T, n):
    """int_T^inf e^{i omega xi} xi^{-n} d xi for n = 1, 2, 3 (n = 1 needs omega != 0)."""
    if omega == 0.0:
        return T ** (1 - n) / (n - 1)
    w = abs(omega)
    e1 = -float(ci(w * T)) + 1j * math.copysign(1.0, omega) * (0.5 * math.pi - float(si(w * T)))
    if n == 1:
        return e1
    e2 = np.exp(1j * omega * T) / T + 1j * omega * e1
    if n == 2:
        return e2
    return np.exp(1j * omega * T) / (2 * T * T) + 0.5j * omega * e2


def _ft_tail_terms(spec, q):
    """Large-xi expansion of V~(q xi), xi > 0, as (coef, omega, power) triples.

    Exact for piecewise-linear shapes; for the truncated Gaussian the
    remainder is O(xi^-3) times V'' at the cut, which is tiny.
    """
    terms = []
    for x, dv, ds in _jumps(spec):
        if dv:
            terms.append((_C * dv / (1j * q), -q * x, 1))
        if ds:
            terms.append((_C * ds / (1j * q) ** 2, -q * x, 2))
    return terms


def _far_integral(g, terms, lo, omega_max, tol):
    """int_lo^inf g, with g ~ sum coef e^{i omega xi} xi^-n beyond the cut."""
    T = max(_XI_CUT, 4 * lo)
    opts = QuadratureOptions(abs_tol=tol, rel_tol=tol, max_subdivisions=100000)
    npan = int(max(1, math.ceil((T - lo) * max(omega_max, 1.0) / math.pi)))
    bps = list(np.linspace(lo, T, npan + 1)[1:-1])
    core = integrate_adaptive(g, lo, T, opts, breakpoints=bps)
    tail = sum(c * _power_tail(om, T, n) for c, om, n in terms)
    return core.value + tail, core.converged


def _is_zero(spec):
    if spec.shape in ("square", "truncated-gaussian"):
        return spec.params["V0"] == 0
    return not np.any(spec._nodes()[1])


def born_Q(spec: PotentialSpec, s: float, tol: float = 1e-11) -> complex:
    """Q(s) = (2pi)^(-1/2)/2 PV int dxi e^{i xi s/2} V~(xi) / (2 i xi), unit strength.

    The principal value is taken by pairing xi with -xi on the half line.
    """
    if _is_zero(spec):
        return 0j
    h = 0.5 * s

    def paired(xi):
        xi = np.asarray(xi, dtype=float)
        vp = fourier_transform_potential(spec, xi)
        vm = fourier_transform_potential(spec, -xi)
        return (np.exp(1j * h * xi) * vp - np.exp(-1j * h * xi) * vm) / (2j * xi)

    terms = [(c / 2j, om + h, n + 1) for c, om, n in _ft_tail_terms(spec, 1)]
    terms += [(-c / 2j, om - h, n + 1) for c, om, n in _ft_tail_terms(spec, -1)]
    wmax = max(abs(om) for _, om, _ in terms) if terms else 1.0
    total, ok = _far_integral(paired, terms, 0.0, wmax, tol)
    if not ok:
        raise NonConvergenceError("born_Q: xi-quadrature did not converge")
    return 0.5 * _C * total


def born_Q_direct(spec: PotentialSpec, s: float) -> float:
    """Q(s) from the position-space form (1/8) int V(z) sgn(s/2 - z) dz."""
    a, b = spec.support
    m = min(max(0.5 * s, a), b)
    bps = spec.breakpoints
    opts = QuadratureOptions(abs_tol=1e-14, rel_tol=1e-14)
    f = lambda z: _unit_potential(spec, z)
    left = integrate_adaptive(f, a, m, opts, breakpoints=bps).value if m > a else 0.0
    right = integrate_adaptive(f, m, b, opts, breakpoints=bps).value if m < b else 0.0
    return 0.125 * (left - right)


def w1_kernel(spec: PotentialSpec, x: float, y: float, ir_cutoff: float = 1e-10,
              tol: float = 1e-11) -> complex:
    """First Born term W1(x, y) of the wave operator, unit strength.

    W1 = -(i (2pi)^(-1/2) / 2) int dxi [chi>(x-y) chi>(xi) - chi<(x-y) chi<(xi)]
         e^{i xi (x+y)/2} V~(xi) / xi.

    The imaginary part diverges like ln(ir_cutoff) whenever V~(0) != 0, so
    |xi| < ir_cutoff is excluded.  The real part converges as the cutoff
    goes to 0, with error O(ir_cutoff).
    """
    if x == y:
        raise DomainError("w1_kernel needs x != y")
    if _is_zero(spec):
        return 0j
    sgn = 1.0 if x > y else -1.0
    h = 0.5 * (x + y)

    def g(xi):
        q = sgn * np.asarray(xi, dtype=float)
        return np.exp(1j * h * q) * fourier_transform_potential(spec, q) / q

    opts = QuadratureOptions(abs_tol=tol, rel_tol=tol, max_subdivisions=20000)
    near = integrate_adaptive(lambda u: g(np.exp(u)) * np.exp(u), math.log(ir_cutoff), 0.0, opts)
    terms = [(c / sgn, om + sgn * h, n + 1) for c, om, n in _ft_tail_terms(spec, sgn)]
    wmax = max(abs(om) for _, om, _ in terms) if terms else 1.0
    far, ok = _far_integral(g, terms, 1.0, wmax, tol)
    if not (ok and near.converged):
        raise NonConvergenceError("w1_kernel: xi-quadrature did not converge")
    return -0.5j * _C * sgn * (near.value + far)


def re_w1(spec: PotentialSpec, x: float, y: float) -> float:
    """Re W1(x, y) = [chi>(x-y) - chi<(x-y)] Q(x+y)."""
    sgn = 1.0 if x > y else -1.0
    return sgn * born_Q(spec, x + y).real


def bound_state_wavefunction(spec: PotentialSpec, energy: float, points) -> np.ndarray:
    """Real bound state at `energy` < 0 sampled at `points`, unit L2 norm on the line.

    Integrated from the left with the decaying solution e^{kappa x} and
    continued as a pure decaying exponential beyond b.
    """
    if not energy < 0:
        raise DomainError("bound states have negative energy")
    a, b = spec.support
    kappa = math.sqrt(-energy)
    x = np.asarray(points, dtype=float)
    h = min(0.01, (b - a) / 2000.0)
    inner = x[(x > a) & (x < b)]
    st = np.array(sorted(set(spec.breakpoints) | set(inner.tolist())))
    # kappa = i k turns the scattering sweep into the real decaying solution
    psi = np.empty(st.size)
    dpsi = np.empty(st.size)
    psi[0], dpsi[0] = 1.0, kappa
    for i in range(1, st.size):
        xa, xb = st[i - 1], st[i]
        n = max(1, int(math.ceil((xb - xa) / h)))
        dx = (xb - xa) / n
        eps = 1e-12 * (b - a)
        xs = xa + dx * np.arange(n + 1)
        xs[0] += eps
        xs[-1] -= eps
        Ve = spec.alpha * _unit_potential(spec, xs) - energy
        Vm = spec.alpha * _unit_potential(spec, xa + dx * (np.arange(n) + 0.5)) - energy
        p, dp = psi[i - 1], dpsi[i - 1]
        for j in range(n):
            k1p, k1d = dp, Ve[j] * p
            k2p, k2d = dp + 0.5 * dx * k1d, Vm[j] * (p + 0.5 * dx * k1p)
            k3p, k3d = dp + 0.5 * dx * k2d, Vm[j] * (p + 0.5 * dx * k2p)
            k4p, k4d = dp + dx * k3d, Ve[j + 1] * (p + dx * k3p)
            p, dp = (p + dx / 6 * (k1p + 2 * k2p + 2 * k3p + k4p),
                     dp + dx / 6 * (k1d + 2 * k2d + 2 * k3d + k4d))
        psi[i], dpsi[i] = p, dp
    pb = psi[-1]
    out = np.empty_like(x)
    left = x <= a
    right = x >= b
    mid = ~(left | right)
    out[left] = np.exp(kappa * (x[left] - a))
    out[right] = pb * np.exp(-kappa * (x[right] - b))
    out[mid] = psi[np.searchsorted(st, x[mid])]
    # norm: analytic outer tails plus the interior by trapezoid on the stations
    norm2 = 1.0 / (2 * kappa) + pb ** 2 / (2 * kappa)
    norm2 += float(np.sum(0.5 * (psi[1:] ** 2 + psi[:-1] ** 2) * np.diff(st)))
    return out / math.sqrt(norm2)
