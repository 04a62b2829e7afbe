"""Annulus eigenpairs and the TE/TM/TEM waveguide modes of the annular hole.

The hole is ``1 < r < 1+h``, ``|x3| < l/2`` (inner radius scaled to one).
Eigenfunctions are normalised with the area measure ``r dr dtheta`` and the
angular factor ``exp(i m theta)`` is left to the caller.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache

import numpy as np
from scipy import optimize, special

from .specfun import cross_product_D, cross_product_N

__all__ = [
    "Family",
    "ModeFamily",
    "Parity",
    "Geometry",
    "BesselRoot",
    "ModeIndex",
    "ModeField",
    "RadialMode",
    "BracketFailure",
    "GapDomainError",
    "find_roots",
    "first_roots",
    "radial_mode",
    "eigenfunction",
    "asymptotic_beta",
    "s_value",
    "trig_ratio",
    "trace_factor",
    "waveguide_mode",
]


class Family(str, Enum):
    D = "D"
    N = "N"


class ModeFamily(str, Enum):
    TE = "TE"
    TM = "TM"
    TEM = "TEM"


class Parity(str, Enum):
    even = "even"
    odd = "odd"


class BracketFailure(RuntimeError):
    """A predicted root could not be bracketed."""


class GapDomainError(ValueError):
    """Evaluation point outside the annular hole."""


@dataclass(frozen=True)
class Geometry:
    h: float
    l: float
    a: float = 1.0

    def __post_init__(self):
        if not (self.a > 0 and self.l > 0):
            raise ValueError("a and l must be positive")
        if not (0 < self.h <= 0.2):
            raise ValueError(f"gap ratio h must lie in (0, 0.2], got {self.h}")

    @property
    def l_unit(self) -> float:
        """Thickness in units of the inner radius."""
        return self.l / self.a


@dataclass(frozen=True)
class BesselRoot:
    family: Family
    m: int
    n: int
    beta: float
    bracket: tuple[float, float]
    h: float

    @property
    def lam(self) -> float:
        return self.beta**2


@dataclass(frozen=True)
class ModeIndex:
    family: ModeFamily
    parity: Parity
    m: int = 0
    n: int = 0

    def __post_init__(self):
        if self.family is ModeFamily.TEM and self.m != 0:
            raise ValueError("TEM mode requires m = 0")
        if self.family is ModeFamily.TE and self.m == 0 and self.n == 0:
            raise ValueError("TE(0,0) is not a mode")
        if self.family is ModeFamily.TM and self.n < 1:
            raise ValueError("TM modes need n >= 1")


@dataclass(frozen=True)
class ModeField:
    E: np.ndarray
    H: np.ndarray


def _cross(family: Family, m: int, beta, h: float):
    return cross_product_D(m, beta, h) if family is Family.D else cross_product_N(m, beta, h)


def asymptotic_beta(family: Family | str, m: int, n: int, h: float) -> float:
    """Small-gap expansions of the cross-product roots."""
    family = Family(family)
    m = abs(m)
    if family is Family.D:
        return n * math.pi / h + (4 * m * m - 1) * h / (8 * n * math.pi)
    if n == 0:
        if m == 0:
            return 0.0
        return m * (1 - h / 2)
    return n * math.pi / h + (4 * m * m + 3) * h / (8 * n * math.pi * (1 + h))


def _bracket(family: Family, m: int, h: float, seed: float, lo_cap: float, hi_cap: float) -> tuple[float, float]:
    f = lambda b: _cross(family, m, b, h)
    width = max(1e-8 * seed, 4 * h * h * max(1, m * m))
    while True:
        a, b = max(lo_cap, seed - width), min(hi_cap, seed + width)
        if f(a) * f(b) < 0:
            return a, b
        if a <= lo_cap and b >= hi_cap:
            raise BracketFailure(f"no sign change for {family.value} root near {seed} (m={m}, h={h})")
        width *= 2.0


def _certify(
    family: Family, m: int, h: float, a: float, b: float, rel_tol: float = 1e-12
) -> tuple[float, tuple[float, float]]:
    f = lambda x: _cross(family, m, x, h)
    beta = optimize.brentq(f, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    fa = f(a)
    lo, hi = a, b
    # bisect down to a certified bracket of relative width rel_tol
    while hi - lo > rel_tol * beta:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0:
            lo = hi = mid
            break
        if (fm > 0) == (fa > 0):
            lo = mid
        else:
            hi = mid
    beta = 0.5 * (lo + hi)
    return beta, (lo, hi)


def find_roots(family: Family | str, m: int, h: float, beta_max: float, rel_tol: float = 1e-12) -> list[BesselRoot]:
    """Certified roots of the Dirichlet or Neumann cross product below ``beta_max``."""
    if not (0 < rel_tol <= 1e-9):
        raise ValueError("rel_tol must lie in (0, 1e-9]")
    family = Family(family)
    m = abs(int(m))
    if beta_max > 5 * math.pi / h * (1 + 1e-12):
        raise ValueError("beta_max exceeds 5*pi/h")
    roots: list[BesselRoot] = []
    spacing = math.pi / h
    n0 = 0 if (family is Family.N and m != 0) else 1
    n = n0
    while True:
        seed = asymptotic_beta(family, m, n, h)
        if n > 0 and seed - 0.5 * spacing > beta_max:
            break
        if n == 0:
            lo_cap, hi_cap = max(1e-3, 0.5 * m), m + 0.25 * spacing
        else:
            lo_cap, hi_cap = max(1e-3, seed - 0.5 * spacing), seed + 0.5 * spacing
        a, b = _bracket(family, m, h, seed, lo_cap, hi_cap)
        beta, br = _certify(family, m, h, a, b, rel_tol)
        if beta <= beta_max:
            roots.append(BesselRoot(family, m, n, beta, br, h))
        elif n > n0:
            break
        n += 1
    return roots


@lru_cache(maxsize=512)
def first_roots(family: Family | str, m: int, h: float, count: int) -> tuple[BesselRoot, ...]:
    """The first ``count`` roots (n = n0 .. n0+count-1)."""
    family = Family(family)
    m = abs(int(m))
    return tuple(_extend_roots(family, m, h, [], count))


def _extend_roots(family: Family, m: int, h: float, roots: list[BesselRoot], count: int) -> list[BesselRoot]:
    out = list(roots)
    spacing = math.pi / h
    n = out[-1].n + 1 if out else (0 if (family is Family.N and m != 0) else 1)
    while len(out) < count:
        seed = asymptotic_beta(family, m, n, h)
        a, b = _bracket(family, m, h, seed, seed - 0.5 * spacing, seed + 0.5 * spacing)
        beta, br = _certify(family, m, h, a, b)
        out.append(BesselRoot(family, m, n, beta, br, h))
        n += 1
    return out


@dataclass(frozen=True)
class RadialMode:
    """Normalised radial profile R(r) with 2*pi * int R^2 r dr = 1."""

    root: BesselRoot
    norm: float = field(init=False)
    _cy: float = field(init=False)
    _cj: float = field(init=False)

    def __post_init__(self):
        m, beta = self.root.m, self.root.beta
        if self.root.family is Family.D:
            cy, cj = special.jv(m, beta), special.yv(m, beta)
        else:
            cy, cj = special.jvp(m, beta), special.yvp(m, beta)
        # R(r) = cj_coef * J(beta r) - cy_coef * Y(beta r)
        object.__setattr__(self, "_cj", float(cj))
        object.__setattr__(self, "_cy", float(cy))
        object.__setattr__(self, "norm", 1.0)
        h = self.root.h
        nodes, weights = np.polynomial.legendre.leggauss(64 + 8 * self.root.n)
        r = 1 + h * (nodes + 1) / 2
        dens = 2 * math.pi * np.sum(weights * self.raw(r) ** 2 * r) * h / 2
        sign = 1.0
        if self.root.family is Family.N:
            sign = math.copysign(1.0, self.raw(np.array([1.0]))[0])
        else:
            sign = math.copysign(1.0, self.raw_deriv(np.array([1.0]))[0])
        object.__setattr__(self, "norm", sign / math.sqrt(dens))

    @property
    def m(self) -> int:
        return self.root.m

    @property
    def lam(self) -> float:
        return self.root.lam

    def raw(self, r):
        """Unnormalised Y_m(b) J_m(b r) - J_m(b) Y_m(b r) (primed coefficients for N)."""
        b, m = self.root.beta, self.root.m
        return self._cj * special.jv(m, b * r) - self._cy * special.yv(m, b * r)

    def raw_deriv(self, r):
        b, m = self.root.beta, self.root.m
        return b * (self._cj * special.jvp(m, b * r) - self._cy * special.yvp(m, b * r))

    def value(self, r):
        return self.norm * self.raw(np.asarray(r, dtype=float))

    def deriv(self, r):
        return self.norm * self.raw_deriv(np.asarray(r, dtype=float))


@lru_cache(maxsize=4096)
def radial_mode(family: Family | str, m: int, n: int, h: float) -> RadialMode:
    family = Family(family)
    m = abs(int(m))
    n0 = 0 if (family is Family.N and m != 0) else 1
    roots = first_roots(family, m, h, n - n0 + 1)
    return RadialMode(roots[n - n0])


def eigenfunction(root: BesselRoot, r):
    """Normalised radial value of the eigenfunction at ``r`` (complex dtype)."""
    return RadialMode(root).value(r) + 0j


def s_value(k: complex, lam: float) -> complex:
    """sqrt(k^2 - lam) on the branch Im s >= 0 (s > 0 for real k^2 > lam)."""
    s = cmath.sqrt(complex(k) ** 2 - lam)
    if s.imag < 0 or (s.imag == 0 and s.real < 0):
        s = -s
    return s


def trig_ratio(num: str, den: str, s: complex, x, half: float):
    """num(s x)/den(s half) for num, den in {'cos','sin'}, stable when Im s >= 0.

    Both numerator and denominator are multiplied by exp(i s half) so no
    growing exponential is ever formed; requires |x| <= half.
    """
    x = np.asarray(x, dtype=float)
    ep = np.exp(1j * s * (half + x))
    em = np.exp(1j * s * (half - x))
    e2 = np.exp(2j * s * half)
    top = 0.5 * (ep + em) if num == "cos" else (ep - em) / 2j
    bot = 0.5 * (e2 + 1) if den == "cos" else (e2 - 1) / 2j
    return top / bot


def trace_factor(parity: Parity | str, s: complex, half: float) -> complex:
    """E-trace factor of a mode at x3 = half: 2cos(s half) or -2sin(s half)."""
    if Parity(parity) is Parity.even:
        return 2 * cmath.cos(s * half)
    return -2 * cmath.sin(s * half)


def _axial(parity: Parity, s: complex, x3: float, half: float, normalized: bool):
    """Axial E- and H-factors: even (2cos, 2i sin), odd (-2 sin, 2i cos).

    With ``normalized`` both are divided by the E-trace factor at x3 = half.
    """
    if normalized:
        if parity is Parity.even:
            return trig_ratio("cos", "cos", s, x3, half), 1j * trig_ratio("sin", "cos", s, x3, half)
        return trig_ratio("sin", "sin", s, x3, half), -1j * trig_ratio("cos", "sin", s, x3, half)
    if parity is Parity.even:
        fe, fh = 2 * cmath.cos(s * x3), 2j * cmath.sin(s * x3)
    else:
        fe, fh = -2 * cmath.sin(s * x3), 2j * cmath.cos(s * x3)
    if not (cmath.isfinite(fe) and cmath.isfinite(fh)):
        raise OverflowError("raw mode factor overflows; use normalized=True")
    return fe, fh


def _scalar_parts(rm: RadialMode, m: int, r: float, theta: float):
    """psi, d1 psi, d2 psi for psi = R(r) exp(i m theta)."""
    ph = cmath.exp(1j * m * theta)
    R = float(rm.value(r))
    dR = float(rm.deriv(r))
    c, s = math.cos(theta), math.sin(theta)
    dr = dR * ph
    dth = 1j * m * R * ph / r
    return R * ph, dr * c - dth * s, dr * s + dth * c


def waveguide_mode(
    idx: ModeIndex,
    geom: Geometry,
    k: complex,
    point: tuple[float, float, float],
    normalized: bool = False,
) -> ModeField:
    """E and H of one waveguide mode at ``point = (r, theta, x3)``.

    ``normalized=False`` gives the textbook amplitudes (factor
    ``exp(isx3) + exp(-isx3)`` for even parity); ``normalized=True`` divides by
    the E-trace factor at the aperture so evanescent modes stay finite.
    Odd parity uses ``i(exp(isx3) - exp(-isx3))`` in place of the sum and
    ``i(exp(isx3) + exp(-isx3))`` in place of the difference.
    """
    r, theta, x3 = point
    h, half = geom.h, geom.l_unit / 2
    r = r / geom.a
    x3 = x3 / geom.a
    tol = 1e-12
    if not (1 - tol <= r <= 1 + h + tol) or abs(x3) > half + tol:
        raise GapDomainError(f"point {point} lies outside the gap")
    parity = Parity(idx.parity)
    k = complex(k) * geom.a
    fam = ModeFamily(idx.family)
    if fam is ModeFamily.TEM:
        s = k
        fe, fh = _axial(parity, s, x3, half, normalized)
        gx, gy = math.cos(theta) / r, math.sin(theta) / r
        E = np.array([fe * gx, fe * gy, 0j])
        H = np.array([-fh * gy, fh * gx, 0j])
        return ModeField(E, H)
    if fam is ModeFamily.TE:
        rm = radial_mode(Family.N, idx.m, idx.n, h)
        lam = rm.lam
        s = s_value(k, lam)
        fe, fh = _axial(parity, s, x3, half, normalized)
        psi, d1, d2 = _scalar_parts(rm, idx.m, r, theta)
        E = np.array([fe * d2, -fe * d1, 0j])
        H = np.array([s * fh * d1 / k, s * fh * d2 / k, -1j * lam * fe * psi / k])
        return ModeField(E, H)
    rm = radial_mode(Family.D, idx.m, idx.n, h)
    lam = rm.lam
    s = s_value(k, lam)
    fe, fh = _axial(parity, s, x3, half, normalized)
    psi, d1, d2 = _scalar_parts(rm, idx.m, r, theta)
    E = np.array([fe * d1, fe * d2, lam / (1j * s) * fh * psi])
    H = np.array([-k * fh * d2 / s, k * fh * d1 / s, 0j])
    return ModeField(E, H)
