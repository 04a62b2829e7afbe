"""Real-argument special functions used throughout the package.

Bessel values come from :mod:`scipy.special` (Amos/Cephes), which already
switches between series, recurrence and asymptotic forms internally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

__all__ = [
    "BesselQuad",
    "SpecfunDomainError",
    "SpecfunOverflowError",
    "bessel_quad",
    "cross_product_D",
    "cross_product_N",
    "digamma",
    "integral_J2m",
]

MAX_ORDER = 64
MAX_ARG = 1.0e6


class SpecfunDomainError(ValueError):
    """Argument outside the supported domain."""


class SpecfunOverflowError(OverflowError):
    """A Bessel value left the representable range."""


@dataclass(frozen=True)
class BesselQuad:
    """J_m, J_m', Y_m, Y_m' at a single point."""

    j: float
    jp: float
    y: float
    yp: float

    def wronskian(self) -> float:
        return self.j * self.yp - self.jp * self.y


def _check_order(order: int) -> int:
    if int(order) != order or order < 0 or order > MAX_ORDER:
        raise SpecfunDomainError(f"order must be an integer in [0, {MAX_ORDER}], got {order}")
    return int(order)


def bessel_quad(order: int, x: float) -> BesselQuad:
    """Return J, J', Y, Y' of integer ``order`` at ``x > 0``.

    Derivatives use the recurrence J' = (J_{m-1} - J_{m+1})/2.
    """
    m = _check_order(order)
    if not (x > 0) or x >= MAX_ARG:
        raise SpecfunDomainError(f"x must lie in (0, {MAX_ARG:g}), got {x}")
    j = float(special.jv(m, x))
    y = float(special.yv(m, x))
    jp = float(special.jvp(m, x))
    yp = float(special.yvp(m, x))
    if not all(math.isfinite(v) for v in (j, jp, y, yp)):
        raise SpecfunOverflowError(f"Y_{m}({x}) is not representable")
    return BesselQuad(j, jp, y, yp)


def _check_cross_args(m: int, beta, h: float) -> np.ndarray:
    _check_order(m)
    b = np.asarray(beta, dtype=float)
    if np.any(b <= 0):
        raise SpecfunDomainError("beta must be positive")
    if not (h > 0):
        raise SpecfunDomainError("h must be positive")
    if np.any(b * (1 + h) >= MAX_ARG):
        raise SpecfunDomainError("beta*(1+h) exceeds the Bessel domain")
    return b


def _finite(v):
    if not np.all(np.isfinite(v)):
        raise SpecfunOverflowError("cross product overflowed")
    return float(v) if np.ndim(v) == 0 else v


def cross_product_D(m: int, beta, h: float):
    """Y_m(b) J_m(b(1+h)) - J_m(b) Y_m(b(1+h)); vectorised in ``beta``."""
    b = _check_cross_args(m, beta, h)
    bo = b * (1 + h)
    v = special.yv(m, b) * special.jv(m, bo) - special.jv(m, b) * special.yv(m, bo)
    return _finite(v)


def cross_product_N(m: int, beta, h: float):
    """Y_m'(b) J_m'(b(1+h)) - J_m'(b) Y_m'(b(1+h)); vectorised in ``beta``."""
    b = _check_cross_args(m, beta, h)
    bo = b * (1 + h)
    v = special.yvp(m, b) * special.jvp(m, bo) - special.jvp(m, b) * special.yvp(m, bo)
    return _finite(v)


def digamma(x: float) -> float:
    if not (x > 0):
        raise SpecfunDomainError(f"digamma needs x > 0, got {x}")
    return float(special.digamma(x))


def integral_J2m(m: int, k: float) -> float:
    """Integral of J_{2m}(t) over [0, k]."""
    if k < 0:
        raise SpecfunDomainError("k must be nonnegative")
    if k == 0:
        return 0.0
    # panels of width ~pi keep the oscillatory integrand well resolved
    edges = np.linspace(0.0, k, max(2, int(math.ceil(k / math.pi)) + 1))
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        val, _ = integrate.quad(lambda t: special.jv(2 * m, t), a, b, epsabs=1e-13, epsrel=1e-13, limit=200)
        total += val
    return total
