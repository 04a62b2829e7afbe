"""Closed-form resonance asymptotics and their numerical refinement.

Resonances are roots of the per-momentum characteristic value Lambda_m(k) in
the lower half plane.  Seeds come from small-gap asymptotics; Newton polishes
them and an argument-principle count certifies uniqueness in a rectangle.

Fabry-Perot resonances are labelled by the axial order q (``mprime``): even
parity uses q = 2, 4, ... and odd parity q = 1, 3, ...
"""

from __future__ import annotations

import cmath
import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .annulus_modes import Geometry, Parity
from .kernel import SingleLayerGram, singlelayer_gram
from .system_assembly import assemble, characteristic_value, pi_0, pi_m

__all__ = [
    "ResonanceClass",
    "Method",
    "ResonanceResult",
    "Rectangle",
    "Disk",
    "NoConvergenceError",
    "BoundaryZeroError",
    "default_k_max",
    "axial_frequency",
    "asymptotic_resonances",
    "characteristic_function",
    "refine",
    "refine_many",
    "count_roots",
    "resonances_to_csv",
]

CSV_COLUMNS = ["m", "parity", "class", "mprime", "h", "l", "re_k", "im_k", "residual", "certified", "method"]
MAX_NEWTON = 50
BOUNDARY_FLOOR = 1e-8


class ResonanceClass(str, Enum):
    TE_FabryPerot = "TE_FabryPerot"
    TE_near_m = "TE_near_m"
    TEM = "TEM"


class Method(str, Enum):
    asymptotic = "asymptotic"
    refined = "refined"


class NoConvergenceError(RuntimeError):
    """Newton did not reach the residual tolerance."""


class BoundaryZeroError(RuntimeError):
    """Lambda is (numerically) zero on the contour."""


@dataclass(frozen=True)
class ResonanceResult:
    k: complex
    m: int
    parity: Parity
    classification: ResonanceClass
    mprime: int
    h: float
    l: float
    method: Method = Method.asymptotic
    residual: float = math.nan
    certified: bool = False
    count: int | None = None
    variant: str = "consistent"


@dataclass(frozen=True)
class Rectangle:
    lo: complex
    hi: complex

    @classmethod
    def around(cls, center: complex, half: float) -> "Rectangle":
        d = complex(half, half)
        return cls(center - d, center + d)

    def corners(self) -> list[complex]:
        a, b = self.lo, self.hi
        return [a, complex(b.real, a.imag), b, complex(a.real, b.imag)]

    def contour(self, n_side: int) -> list[complex]:
        c = self.corners()
        t = np.arange(n_side) / n_side
        return [a + (b - a) * s for a, b in zip(c, c[1:] + c[:1]) for s in t]

    def midpoint(self, z0: complex, z1: complex) -> complex:
        return (z0 + z1) / 2


@dataclass(frozen=True)
class Disk:
    center: complex
    radius: float

    def contour(self, n_side: int) -> list[complex]:
        t = 2 * np.pi * np.arange(4 * n_side) / (4 * n_side)
        return list(self.center + self.radius * np.exp(1j * t))

    def midpoint(self, z0: complex, z1: complex) -> complex:
        a0 = cmath.phase(z0 - self.center)
        a1 = cmath.phase(z1 - self.center)
        da = (a1 - a0 + math.pi) % (2 * math.pi) - math.pi
        return self.center + self.radius * cmath.exp(1j * (a0 + da / 2))


def default_k_max(l: float) -> float:
    """Band edge 3 pi / l + 3: at least one Fabry-Perot order of each parity."""
    return 3 * math.pi / l + 3


def axial_frequency(m: int, q: int, l: float) -> float:
    """k_{m,q} = sqrt(m^2 + (q pi / l)^2)."""
    return math.hypot(m, q * math.pi / l)


def _near_m(m: int, h: float, l: float, gram: SingleLayerGram, variant: str) -> complex:
    am = abs(m)
    if variant == "literal":
        from .system_assembly import spectral_coeffs

        c = spectral_coeffs(am, float(am), "literal")
        shift = (c.alpha_tilde - c.alpha) + 1j * (c.beta_tilde - c.beta)
        return am - am * h / 2 - am * h / l * shift
    return am - am * h / 2 - pi_m(am, float(am), h, gram, variant).value / (am * l)


def asymptotic_resonances(
    m: int,
    parity: Parity | str,
    geom: Geometry,
    k_max: float | None = None,
    gram: SingleLayerGram | None = None,
    variant: str = "consistent",
) -> list[ResonanceResult]:
    """Small-gap resonance formulas, sorted by real part.

    ``variant="literal"`` evaluates the textbook closed forms as written;
    ``"consistent"`` uses the coefficients matching the assembled system.
    """
    parity = Parity(parity)
    gram = gram or singlelayer_gram(64)
    h, l, a = geom.h, geom.l_unit, geom.a
    kmax = (default_k_max(geom.l) if k_max is None else k_max) * a
    out: list[ResonanceResult] = []

    def add(k, cls, q):
        out.append(ResonanceResult(complex(k) / a, m, parity, cls, q, h, geom.l, variant=variant))

    q = 2 if parity is Parity.even else 1
    while axial_frequency(m, q, l) <= kmax:
        kq = axial_frequency(m, q, l)
        if m == 0:
            P = pi_0(kq, h, gram, variant).value
            k = kq - 2 * kq * P if variant == "literal" else kq - 2 * kq * P / l
            add(k, ResonanceClass.TEM, q)
        else:
            P = pi_m(m, kq, h, gram, variant).value
            add(kq - m * m * h / (2 * kq) - 2 * P / (kq * l), ResonanceClass.TE_FabryPerot, q)
        q += 2
    if m != 0 and parity is Parity.even and abs(m) <= kmax:
        add(_near_m(m, h, l, gram, variant), ResonanceClass.TE_near_m, 0)
    out.sort(key=lambda r: r.k.real)
    return out


def characteristic_function(m: int, parity: Parity | str, geom: Geometry, N: int = 8, **kw):
    """k -> Lambda_m(k) at fixed geometry and truncation."""
    parity = Parity(parity)

    def f(k: complex) -> complex:
        return characteristic_value(assemble(m, parity, k, geom, N, **kw))

    return f


def _newton(f, k: complex, tol: float) -> tuple[complex, float]:
    F = f(k)
    for _ in range(MAX_NEWTON):
        if abs(F) < tol:
            return k, abs(F)
        d = 1e-7 * max(abs(k), 1e-3)
        dF = (f(k + d) - f(k - d)) / (2 * d)
        if dF == 0:
            break
        step = -F / dF
        # damping: halve until the residual decreases
        for _ in range(20):
            k_new = k + step
            F_new = f(k_new)
            if abs(F_new) < abs(F):
                break
            step /= 2
        k, F = k_new, F_new
    if abs(F) < tol:
        return k, abs(F)
    raise NoConvergenceError(f"Newton stalled at k={k} with |Lambda|={abs(F):.3g}")


def refine(
    seed: ResonanceResult,
    geom: Geometry,
    N: int = 8,
    tol: float = 1e-9,
    certify: bool = True,
    **kw,
) -> ResonanceResult:
    """Polish ``seed`` by damped Newton and certify it by a winding count."""
    f = characteristic_function(seed.m, seed.parity, geom, N, **kw)
    k, res = _newton(f, complex(seed.k), tol)
    certified, count = False, None
    if certify:
        half = max(10 * abs(k - seed.k), 1e-3)
        try:
            count = count_roots(seed.m, seed.parity, Rectangle.around(k, half), geom, N, func=f)
        except BoundaryZeroError:
            count = count_roots(seed.m, seed.parity, Rectangle.around(k, 1.37 * half), geom, N, func=f)
        certified = count == 1
    return replace(seed, k=k, method=Method.refined, residual=res, certified=certified, count=count)


def _refine_job(args):
    seed, geom, N, tol, kw = args
    return refine(seed, geom, N, tol, **kw)


def refine_many(
    seeds, geom: Geometry, N: int = 8, tol: float = 1e-9, workers: int = 1, **kw
) -> list[ResonanceResult]:
    """Refine independent seeds, optionally in worker processes; order is preserved."""
    jobs = [(s, geom, N, tol, kw) for s in seeds]
    if workers <= 1:
        return [_refine_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_refine_job, jobs))


def count_roots(
    m: int,
    parity: Parity | str,
    rect: Rectangle | Disk,
    geom: Geometry,
    N: int = 8,
    func=None,
    samples_per_side: int = 16,
    max_points: int = 4000,
) -> int:
    """Winding number of Lambda around ``rect`` (a rectangle or a disk).

    Segments are bisected until the phase change across each is below pi/4.
    """
    f = func or characteristic_function(m, parity, geom, N)
    pts = list(rect.contour(samples_per_side))
    vals = [f(z) for z in pts]
    pts.append(pts[0])
    vals.append(vals[0])

    def check(v):
        if abs(v) <= BOUNDARY_FLOOR:
            raise BoundaryZeroError("Lambda vanishes on the contour; perturb the rectangle")

    for v in vals:
        check(v)
    i = 0
    while i < len(pts) - 1:
        dphi = cmath.phase(vals[i + 1] / vals[i])
        if abs(dphi) > math.pi / 4 and len(pts) < max_points and abs(pts[i + 1] - pts[i]) > 1e-12:
            z = rect.midpoint(pts[i], pts[i + 1])
            v = f(z)
            check(v)
            pts.insert(i + 1, z)
            vals.insert(i + 1, v)
            continue
        i += 1
    total = sum(cmath.phase(vals[i + 1] / vals[i]) for i in range(len(vals) - 1))
    return int(round(total / (2 * math.pi)))


def resonances_to_csv(results: list[ResonanceResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in results:
        w.writerow(
            [
                r.m,
                r.parity.value,
                r.classification.value,
                r.mprime,
                f"{r.h:.17g}",
                f"{r.l:.17g}",
                f"{r.k.real:.17g}",
                f"{r.k.imag:.17g}",
                f"{r.residual:.17g}",
                str(r.certified).lower(),
                r.method.value,
            ]
        )
    return buf.getvalue()
