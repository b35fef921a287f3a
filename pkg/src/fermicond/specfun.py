"""Sine/cosine integrals and the 3D longitudinal kernels u, U.

Si and Ci use the power series for |x| <= 4 and a Lentz continued fraction
for E1(ix) beyond.  All array functions are vectorized over numpy inputs.
"""
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

EULER_GAMMA = 0.57721566490153286061
_EPS = np.finfo(float).eps
_SERIES_CUT = 4.0
_SMALL_U = 0.5


@dataclass(frozen=True)
class EvalResult:
    value: float
    abs_error_estimate: float


def _series(x):
    """Power series for Si(x) and Ci(x) - gamma - ln|x|, with error bounds."""
    x = np.asarray(x, dtype=float)
    x2 = x * x
    si = np.zeros_like(x)
    cin = np.zeros_like(x)
    asum = np.zeros_like(x)
    term = x.copy()  # (-1)^n x^(2n+1) / (2n+1)!
    si += term
    asum += np.abs(term)
    last = np.abs(term)
    c_term = np.ones_like(x)  # (-1)^n x^(2n) / (2n)!
    for n in range(1, 40):
        c_term = -c_term * x2 / ((2 * n - 1) * (2 * n))
        cin += c_term / (2 * n)
        term = -term * x2 / ((2 * n) * (2 * n + 1))
        si += term / (2 * n + 1)
        asum += np.abs(term)
        last = np.abs(term) + np.abs(c_term)
        if np.all(last < 1e-18 * np.maximum(np.abs(si), 1e-300)):
            break
    err = last + 4 * _EPS * (asum + np.abs(si))
    return si, cin, err


def _cfrac(t):
    """Continued fraction for E1(it), t > 2.  Returns (si, ci, err)."""
    t = np.asarray(t, dtype=float)
    b = 1.0 + 1j * t
    c = np.full(t.shape, 1e300, dtype=complex)
    d = 1.0 / b
    h = d.copy()
    delta = np.ones_like(h)
    for i in range(1, 400):
        a = -float(i * i)
        b = b + 2.0
        d = 1.0 / (a * d + b)
        c = b + a / c
        delta = c * d
        h = h * delta
        if np.all(np.abs(delta - 1.0) < 1e-16):
            break
    h = (np.cos(t) - 1j * np.sin(t)) * h
    ci = -h.real
    si = 0.5 * np.pi + h.imag
    err = np.abs(h) * (np.abs(delta - 1.0) + 8 * _EPS) + 4 * _EPS * np.abs(si)
    return si, ci, err


def _sici(x):
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    si = np.empty_like(ax)
    ci = np.empty_like(ax)
    err = np.empty_like(ax)
    small = ax <= _SERIES_CUT
    if np.any(small):
        s, cin, e = _series(ax[small])
        with np.errstate(divide="ignore"):
            si[small] = s
            ci[small] = EULER_GAMMA + np.log(ax[small]) + cin
        err[small] = e
    big = ~small
    if np.any(big):
        s, c, e = _cfrac(ax[big])
        si[big], ci[big], err[big] = s, c, e
    return np.sign(x) * si, ci, err


def si(x):
    """Sine integral, vectorized; odd in x."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise DomainError("sine integral needs finite arguments")
    return _sici(x)[0]


def ci(x):
    """Cosine integral of |x| (the real part of Ci on the negative axis).

    Kernels in this package only ever need Ci of the modulus, so negative
    arguments are accepted here; `cosine_integral` keeps the strict domain.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x == 0) or not np.all(np.isfinite(x)):
        raise DomainError("cosine integral is singular at 0")
    return _sici(x)[1]


def sine_integral(x: float) -> EvalResult:
    if not np.isfinite(x):
        raise DomainError(f"sine_integral: non-finite argument {x!r}")
    s, _, e = _sici(np.array([x], dtype=float))
    return EvalResult(float(s[0]), float(e[0]))


def cosine_integral(x: float) -> EvalResult:
    if not np.isfinite(x) or x <= 0:
        raise DomainError(f"cosine_integral: requires finite x > 0, got {x!r}")
    _, c, e = _sici(np.array([x], dtype=float))
    return EvalResult(float(c[0]), float(e[0]))


def _u_series(x):
    # x cos x - sin x = sum_n (-1)^n x^(2n+1) [1/(2n)! - 1/(2n+1)!], n >= 1
    x2 = x * x
    out = np.zeros_like(x)
    p = x.copy()  # x^(2n-3) running power relative to x^4 division
    fact_even = 1.0
    for n in range(1, 20):
        fact_even *= (2 * n - 1) * (2 * n)
        coef = (-1) ** n * (1.0 / fact_even - 1.0 / (fact_even * (2 * n + 1)))
        if n == 1:
            p = 1.0 / x
        else:
            p = p * x2
        out += coef * p
    return out


def u_kernel(x):
    """u(x) = cos x / x^3 - sin x / x^4; odd, ~ -1/(3x) near 0."""
    x = np.asarray(x, dtype=float)
    if np.any(x == 0):
        raise DomainError("u_kernel is singular at x = 0")
    # evaluate on |x| so oddness holds bit for bit
    ax = np.abs(x)
    out = np.empty_like(x)
    small = ax < _SMALL_U
    out[small] = _u_series(ax[small])
    xb = ax[~small]
    out[~small] = (xb * np.cos(xb) - np.sin(xb)) / xb**4
    out = np.sign(x) * out
    return out if out.ndim else float(out)


def _U_regular_series(x):
    # (sin x - x cos x + x^2 sin x) / (3 x^3), expanded in even powers
    x2 = x * x
    out = np.zeros_like(x)
    p = np.ones_like(x)
    f = [1.0]
    for j in range(1, 45):
        f.append(f[-1] * j)
    for m in range(1, 20):
        coef = (-1) ** m * (1.0 / f[2 * m + 1] - 1.0 / f[2 * m]) + (-1) ** (m - 1) / f[2 * m - 1]
        out += coef * p / 3.0
        p = p * x2
    return out


def U_kernel(x):
    """U(x) = -cos x/(3x^2) - Ci(x)/3 + sin x/(3x^3) + sin x/(3x); even.

    Ci is taken at |x|, which makes U the even antiderivative of u.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x == 0):
        raise DomainError("U_kernel is singular at x = 0")
    ax = np.abs(x)
    c = ci(ax)
    out = np.empty_like(ax)
    small = ax < _SMALL_U
    out[small] = _U_regular_series(ax[small]) - c[small] / 3.0
    b = ax[~small]
    out[~small] = (-np.cos(b) / (3 * b**2) + np.sin(b) / (3 * b**3)
                   + np.sin(b) / (3 * b) - c[~small] / 3.0)
    return out if out.ndim else float(out)
