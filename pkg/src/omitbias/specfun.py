"""Scalar special functions: logistic and Normal primitives and Owen's T.

All functions accept Python floats or numpy arrays. Scalar input returns a
Python ``float``.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate, special

from .errors import DomainError

#: Scale making ``norm_cdf(PROBIT_LOGIT_C * u)`` a close match to ``expit(u)``.
PROBIT_LOGIT_C: float = 16.0 * math.sqrt(3.0) / (15.0 * math.pi)
PROBIT_LOGIT_C2: float = PROBIT_LOGIT_C**2

_OWEN_EPSABS = 1e-13
_OWEN_EPSREL = 1e-12


def _finite(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite, got {x!r}")
    return arr


def _out(arr: np.ndarray):
    return float(arr) if arr.ndim == 0 else arr


def expit(u):
    """Logistic function ``exp(u) / (1 + exp(u))``.

    Evaluated separately on each sign of ``u`` so that ``exp`` never
    overflows.
    """
    u = _finite(u, "u")
    e = np.exp(-np.abs(u))
    out = np.where(u >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return _out(out)


def logit(p):
    """Log-odds ``log(p / (1 - p))`` for ``0 < p < 1``."""
    p = _finite(p, "p")
    if np.any((p <= 0.0) | (p >= 1.0)):
        raise DomainError(f"logit requires 0 < p < 1, got {p!r}")
    return _out(np.log(p) - np.log1p(-p))


def norm_pdf(u):
    u = _finite(u, "u")
    return _out(np.exp(-0.5 * u * u) / math.sqrt(2.0 * math.pi))


def norm_cdf(u):
    """Standard Normal distribution function.

    Uses the Cephes ``ndtr`` routine (erf/erfc rational approximations),
    accurate to a few ulps over the real line.
    """
    u = _finite(u, "u")
    return _out(special.ndtr(u))


def norm_quantile(p):
    p = _finite(p, "p")
    if np.any((p <= 0.0) | (p >= 1.0)):
        raise DomainError(f"norm_quantile requires 0 < p < 1, got {p!r}")
    return _out(special.ndtri(p))


def _owen_t_scalar(h: float, a: float) -> float:
    if a == 0.0:
        return 0.0
    hh = 0.5 * h * h

    def integrand(x: float) -> float:
        s = 1.0 + x * x
        return math.exp(-hh * s) / s

    val, _ = integrate.quad(integrand, 0.0, a, epsabs=_OWEN_EPSABS, epsrel=_OWEN_EPSREL, limit=200)
    return val / (2.0 * math.pi)


def owen_t(h, a):
    """Owen's T function by adaptive Gauss-Kronrod quadrature.

    ``T(h, a) = (1 / 2 pi) * integral_0^a exp(-h^2 (1 + x^2) / 2) / (1 + x^2) dx``
    """
    h = _finite(h, "h")
    a = _finite(a, "a")
    hb, ab = np.broadcast_arrays(h, a)
    out = np.empty(hb.shape)
    for idx in np.ndindex(hb.shape):
        out[idx] = _owen_t_scalar(float(hb[idx]), float(ab[idx]))
    return _out(out)
