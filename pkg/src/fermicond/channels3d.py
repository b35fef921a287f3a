"""Free conductor with a transverse cross-section: longitudinal kernels and channel counts.

The transverse delta function in the 3D commutator kernel is integrated out
analytically, which leaves the longitudinal factors below.
"""
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DomainError, NonConvergenceError
from .kernels import FermiData
from .quadrature import QuadratureOptions, integrate_adaptive, integrate_half_line
from .specfun import U_kernel, u_kernel


@dataclass(frozen=True)
class TransverseGeometry:
    L2: float
    L3: float

    def __post_init__(self):
        if not (self.L2 > 0 and self.L3 > 0 and math.isfinite(self.L2) and math.isfinite(self.L3)):
            raise ConfigurationError("transverse periods L2, L3 must be positive")

    @property
    def cross_section(self) -> float:
        return self.L2 * self.L3


def _nonzero(d):
    d = np.asarray(d, dtype=float)
    if np.any(d == 0):
        raise DomainError("longitudinal kernels are singular at d = 0")
    return d


def f3d_longitudinal(d, fermi: FermiData):
    """(i/pi) [k_L^4 u(k_L d) + k_R^4 u(k_R d)]; odd in d."""
    d = _nonzero(d)
    v = sum(k ** 4 * np.asarray(u_kernel(k * d)) for k in (fermi.k_L, fermi.k_R))
    out = np.asarray((1j / math.pi) * v)
    return out if out.ndim else complex(out)


def f3d_bracket_form(d, fermi: FermiData):
    """The same kernel written as (i/(pi d^2)) sum_k [k cos(kd)/d - sin(kd)/d^2]."""
    d = _nonzero(d)
    v = sum(k * np.cos(k * d) / d - np.sin(k * d) / d ** 2 for k in (fermi.k_L, fermi.k_R))
    out = np.asarray(1j * v / (math.pi * d ** 2))
    return out if out.ndim else complex(out)


def F1_3d(d, fermi: FermiData):
    """(i/pi) [k_L^3 U(k_L d) + k_R^3 U(k_R d)]; even in d, d/dd F1_3d = f3d_longitudinal."""
    d = _nonzero(d)
    v = sum(k ** 3 * np.asarray(U_kernel(k * d)) for k in (fermi.k_L, fermi.k_R))
    out = np.asarray((1j / math.pi) * v)
    return out if out.ndim else complex(out)


_U_OPTS = QuadratureOptions(abs_tol=1e-11, rel_tol=1e-11, max_subdivisions=20000,
                            oscillation_wavenumber_hint=1.0)


def U_half_line_integral() -> float:
    """int_0^inf U(x) dx.  The log singularity at 0 sits on an interval end,
    where the adaptive bisection refines toward it."""
    res = integrate_half_line(lambda x: U_kernel(np.where(x == 0, 1e-300, x)), 0.0, _U_OPTS)
    if not res.converged:
        raise NonConvergenceError("int U did not converge")
    return float(np.real(res.value))


def verify_U_integral() -> float:
    """int_{-inf}^{inf} U(x) dx by evenness; analytically pi/2."""
    return 2.0 * U_half_line_integral()


def U_integral_truncated(T: float) -> float:
    """int_{-T}^{T} U(x) dx."""
    opts = QuadratureOptions(abs_tol=1e-12, rel_tol=1e-12, max_subdivisions=20000)
    bps = list(np.arange(math.pi, T, math.pi))
    res = integrate_adaptive(lambda x: U_kernel(x), 0.0, T, opts, breakpoints=bps)
    return 2.0 * float(np.real(res.value))


def channel_count_discrete(k_F: float, geom: TransverseGeometry) -> int:
    """Number of transverse modes 2 pi (n2/L2, n3/L3) with |k_perp|^2 < k_F^2."""
    if not k_F > 0:
        raise DomainError("k_F must be positive")
    n2max = int(math.floor(k_F * geom.L2 / (2 * math.pi)))
    n2 = np.arange(-n2max, n2max + 1)
    q2 = (2 * math.pi * n2 / geom.L2) ** 2
    rest = k_F ** 2 - q2
    # for each n2, count n3 with (2 pi n3 / L3)^2 < rest (strict)
    total = 0
    for r in rest:
        if r <= 0:
            continue
        m = math.sqrt(r) * geom.L3 / (2 * math.pi)
        top = math.floor(m)
        if top == m:
            top -= 1
        # guard against rounding at the boundary
        while top >= 0 and (2 * math.pi * top / geom.L3) ** 2 >= r:
            top -= 1
        while (2 * math.pi * (top + 1) / geom.L3) ** 2 < r:
            top += 1
        total += 2 * top + 1
    return int(total)


def conductance_3d_prefactor(k_F: float, geom: TransverseGeometry) -> float:
    """pi k_F^2 Delta S, the current per unit voltage in units of e^2/h from the kernel integral."""
    if not k_F > 0:
        raise DomainError("k_F must be positive")
    return math.pi * k_F ** 2 * geom.cross_section


def asymptotic_channel_count(k_F: float, geom: TransverseGeometry) -> float:
    """Disc area over reciprocal cell area: k_F^2 Delta S / (4 pi)."""
    return k_F ** 2 * geom.cross_section / (4 * math.pi)


def channel_report(k_F: float, geom: TransverseGeometry) -> dict:
    count = channel_count_discrete(k_F, geom)
    pref = conductance_3d_prefactor(k_F, geom)
    return {"k_F": k_F, "L2": geom.L2, "L3": geom.L3, "discrete_count": count,
            "paper_prefactor": pref, "ratio": pref / count,
            "asymptotic_count": asymptotic_channel_count(k_F, geom)}
