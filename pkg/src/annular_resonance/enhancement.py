"""Forced scattering: sources, inhomogeneous solves and fields in the gap.

The aperture equation for each parity half-problem is tested against every
trace basis function U_b and reads

    (Y_b/2)|U_b|^2 e_b + sum_c K_bc e_c = (ik/2) int conj(U_b) . H_src,

with H_src the tangential magnetic drive (half the incident plus reflected
field on the aperture).  The balanced unknowns of the characteristic system
then satisfy [D - A, -R; -C, I - B] [d; c] = [a; b] with a = rho0 S_0 and
b_n = S_n / g_n.  Fields are superposed from trace-normalised modes.
"""

from __future__ import annotations

import cmath
import csv
import io
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable

import numpy as np
from scipy import special

from .annulus_modes import Geometry, Parity, radial_mode, s_value, trig_ratio
from .annulus_modes import Family
from .resonance import ResonanceClass, asymptotic_resonances, refine
from .system_assembly import CharacteristicSystem, SingularSystemError, _solve_rest, assemble, characteristic_value

__all__ = [
    "ExcitationKind",
    "Excitation",
    "SourceVector",
    "ForcedSolution",
    "FieldSample",
    "ScanRow",
    "SingularForcingError",
    "jacobi_anger_order",
    "excited_momenta",
    "build_source",
    "solve_forced",
    "solve_excitation",
    "field_in_gap",
    "field_grid",
    "enhancement_scan",
    "scan_to_csv",
]

SCAN_COLUMNS = ["h", "k_drive", "excitation", "max_abs_E", "max_abs_H", "max_E_times_h", "max_H_times_h"]
WALL_LAYER = 1e-6
GRID_SHAPE = (16, 8, 16)
_SOURCE_NODES = 64


class SingularForcingError(ZeroDivisionError):
    """The drive sits on an exact real root of Lambda."""


class ExcitationKind(str, Enum):
    normal_plane = "normal_plane"
    oblique_plane = "oblique_plane"
    dipole = "dipole"


@dataclass(frozen=True)
class Excitation:
    kind: ExcitationKind
    k: complex
    d1: float = 0.0
    d3: float = 1.0
    y3: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", ExcitationKind(self.kind))
        if self.kind is ExcitationKind.oblique_plane and not math.isclose(self.d1**2 + self.d3**2, 1.0, abs_tol=1e-12):
            raise ValueError("oblique incidence needs d1^2 + d3^2 = 1")
        if self.kind is ExcitationKind.dipole and not self.y3 > 0:
            raise ValueError("dipole height y3 must be positive")

    @classmethod
    def normal(cls, k: complex) -> "Excitation":
        return cls(ExcitationKind.normal_plane, k)

    @classmethod
    def oblique(cls, k: complex, d1: float, d3: float) -> "Excitation":
        return cls(ExcitationKind.oblique_plane, k, d1, d3)

    @classmethod
    def dipole(cls, k: complex, y3: float) -> "Excitation":
        return cls(ExcitationKind.dipole, k, y3=y3)


@dataclass(frozen=True)
class SourceVector:
    m: int
    parity: Parity
    factor: complex  # parity factor applied to the right-hand side
    a: complex
    b: np.ndarray
    S: np.ndarray  # raw tested drives (ik/2) int conj(U) . H_src, resonant first

    def is_zero(self) -> bool:
        return self.a == 0 and not np.any(self.b)


@dataclass
class ForcedSolution:
    system: CharacteristicSystem
    source: SourceVector
    d: complex
    c: np.ndarray

    def trace_amplitudes(self) -> np.ndarray:
        """E-trace amplitudes e_b, resonant basis function first."""
        return np.concatenate([[self.system.kappa0 * self.d], self.system.nu * self.c])


@dataclass(frozen=True)
class FieldSample:
    position: tuple[float, float, float]
    E: np.ndarray
    H: np.ndarray


@dataclass(frozen=True)
class ScanRow:
    h: float
    k_drive: float
    excitation: str
    max_abs_E: float
    max_abs_H: float
    max_abs_H3: float
    max_E_times_h: float
    max_H_times_h: float


# -- sources ------------------------------------------------------------------


def jacobi_anger_order(k: float, d1: float, h: float) -> int:
    """Truncation order ceil(k d1 (1+h)) + 8 of the angular expansion."""
    return int(math.ceil(abs(k) * abs(d1) * (1 + h))) + 8


def excited_momenta(exc: Excitation, h: float) -> list[int]:
    if exc.kind is ExcitationKind.normal_plane:
        return [-1, 1]
    if exc.kind is ExcitationKind.dipole:
        return [0]
    if exc.d1 == 0:
        return [-1, 1]
    M = jacobi_anger_order(abs(exc.k), exc.d1, h)
    return list(range(-M, M + 1))


def _radial_rule(h: float, a: float = 1.0):
    x, w = np.polynomial.legendre.leggauss(_SOURCE_NODES)
    return 1 + h * (x + 1) / 2, w * h / 2


def _plane_profile(exc: Excitation, m: int, r: np.ndarray) -> np.ndarray:
    """(1/2pi) int Phi exp(-i m theta) dtheta, where grad Phi = exp(i k d1 x1) e_1."""
    k = complex(exc.k)
    d1 = exc.d1 if exc.kind is ExcitationKind.oblique_plane else 0.0
    if d1 == 0:
        return r / 2 if abs(m) == 1 else np.zeros_like(r)
    x = k * d1 * r
    jm = special.jv(abs(m), x) * (-1) ** (m if m < 0 else 0)
    return (1j**m) * (jm - (m == 0)) / (1j * k * d1)


def _dipole_F(k: complex, r: np.ndarray, y3: float) -> np.ndarray:
    rho2 = r**2 + y3**2
    rho = np.sqrt(rho2)
    return (k * rho + 1j) * r * np.exp(1j * k * rho) / (k * rho2**1.5)


def _tested_drives(exc: Excitation, m: int, geom: Geometry, basis) -> np.ndarray:
    """(ik/2) int conj(U_b) . H_src for every basis function, in units a = 1."""
    h, half = geom.h, geom.l_unit / 2
    k = complex(exc.k) * geom.a
    r, w = _radial_rule(h)
    out = np.zeros(len(basis), complex)
    if exc.kind is ExcitationKind.dipole:
        if m != 0:
            return out
        F = _dipole_F(k, r, exc.y3 / geom.a)
        for i, bf in enumerate(basis):
            if bf.kind == "TEM":
                # curl log r = -theta/r, H_src = -F theta / (4 pi)
                out[i] = 0.5 * np.sum(w * F)
            elif bf.kind == "TM":
                rm = radial_mode(Family.D, 0, bf.n, h)
                out[i] = 2 * math.pi / (4 * math.pi) * np.sum(w * rm.deriv(r) * F * r)
        return (0.5j * k) * out
    d3 = exc.d3 if exc.kind is ExcitationKind.oblique_plane else 1.0
    phase = cmath.exp(-1j * k * d3 * half)
    prof = _plane_profile(exc, m, r)
    if not np.any(prof):
        return out
    for i, bf in enumerate(basis):
        if bf.kind != "TE":
            continue  # TM and TEM traces are orthogonal to gradient drives
        rm = radial_mode(Family.N, m, bf.n, h)
        # int conj(-grad psi) . grad Phi = -lam int Phi conj(psi)
        proj = 2 * math.pi * np.sum(w * prof * rm.value(r) * r)
        out[i] = -rm.lam * phase * proj
    return (0.5j * k) * out


def build_source(
    exc: Excitation,
    m: int,
    parity: Parity | str,
    geom: Geometry,
    N: int = 8,
    system: CharacteristicSystem | None = None,
) -> SourceVector:
    """Balanced right-hand side (a_m, b_m) of the forced system."""
    parity = Parity(parity)
    sys = system or assemble(m, parity, exc.k, geom, N)
    S = _tested_drives(exc, m, geom, sys.basis)
    a = complex(sys.rho0 * S[0])
    b = S[1:] / sys.g
    return SourceVector(m, parity, 1.0, a, b, S)


def solve_forced(sys: CharacteristicSystem, src: SourceVector) -> tuple[complex, np.ndarray]:
    """d = [a + R (I-B)^{-1} b] / Lambda,  c = (I-B)^{-1} (b + C d)."""
    a = src.factor * src.a
    b = src.factor * np.asarray(src.b, complex)
    lam = characteristic_value(sys)
    if abs(lam) < 1e-14:
        raise SingularForcingError(f"|Lambda| = {abs(lam):.3g} at k = {sys.k}")
    y = _solve_rest(sys, b)
    d = (a + sys.R_m @ y) / lam
    c = _solve_rest(sys, b + sys.C_m * d)
    return complex(d), c


def solve_excitation(exc: Excitation, geom: Geometry, N: int = 8) -> list[ForcedSolution]:
    """Forced solutions for every excited momentum and both parities."""
    out = []
    for m in excited_momenta(exc, geom.h):
        for parity in Parity:
            sys = assemble(m, parity, exc.k, geom, N)
            src = build_source(exc, m, parity, geom, N, sys)
            if src.is_zero():
                continue
            d, c = solve_forced(sys, src)
            out.append(ForcedSolution(sys, src, d, c))
    return out


# -- fields ---------------------------------------------------------------------


def _axial_factors(parity: Parity, s: complex, x3: np.ndarray, half: float):
    if parity is Parity.even:
        return trig_ratio("cos", "cos", s, x3, half), 1j * trig_ratio("sin", "cos", s, x3, half)
    return trig_ratio("sin", "sin", s, x3, half), -1j * trig_ratio("cos", "sin", s, x3, half)


def _half_field(sol: ForcedSolution, r, theta, x3):
    """E, H of one parity half-problem on broadcast arrays (unit-radius coordinates)."""
    sys = sol.system
    k, h, half, m = sys.k, sys.h, sys.l / 2, sys.m
    shape = np.broadcast(r, theta, x3).shape
    E = np.zeros((3,) + shape, complex)
    H = np.zeros((3,) + shape, complex)
    ct, st = np.cos(theta), np.sin(theta)
    ph = np.exp(1j * m * theta)
    for amp, bf in zip(sol.trace_amplitudes(), sys.basis):
        if amp == 0:
            continue
        # nu x E = -sum e_b U_b on the aperture
        amp = -amp
        if bf.kind == "TEM":
            fe, fh = _axial_factors(sys.parity, k, x3, half)
            E += amp * np.array([fe * ct / r, fe * st / r, 0 * fe])
            H += amp * np.array([-fh * st / r, fh * ct / r, 0 * fh])
            continue
        fam = Family.N if bf.kind == "TE" else Family.D
        rm = radial_mode(fam, m, bf.n, h)
        R, dR = rm.value(r), rm.deriv(r)
        psi = R * ph
        d1 = (dR * ct - 1j * m * R / r * st) * ph
        d2 = (dR * st + 1j * m * R / r * ct) * ph
        s = s_value(k, bf.lam)
        fe, fh = _axial_factors(sys.parity, s, x3, half)
        if bf.kind == "TE":
            E += amp * np.array([fe * d2, -fe * d1, 0 * psi])
            H += amp * np.array([s * fh * d1 / k, s * fh * d2 / k, -1j * bf.lam * fe * psi / k])
        else:
            E += amp * np.array([fe * d1, fe * d2, bf.lam / (1j * s) * fh * psi])
            H += amp * np.array([-k * fh * d2 / s, k * fh * d1 / s, 0 * psi])
    return E, H


_MIRROR = np.array([1, 1, -1])[:, None]


def _total_field(solutions: Iterable[ForcedSolution], geom: Geometry, r, theta, x3):
    """Even plus odd above the midplane; mirror-combined below it."""
    a = geom.a
    r = np.asarray(r, float) / a
    theta = np.asarray(theta, float)
    x3 = np.asarray(x3, float) / a
    r, theta, x3 = np.broadcast_arrays(r, theta, x3)
    flat = [v.ravel() for v in (r, theta, x3)]
    lower = flat[2] < 0
    xs = np.abs(flat[2])
    E = np.zeros((3, flat[0].size), complex)
    H = np.zeros_like(E)
    for sol in solutions:
        e, hh = _half_field(sol, flat[0], flat[1], xs)
        sign = 1 if sol.system.parity is Parity.even else -1
        # reflected point: E* = P E, H* = -P H (axial vector)
        e_low = sign * _MIRROR * e
        h_low = -sign * _MIRROR * hh
        E += np.where(lower, e_low, e)
        H += np.where(lower, h_low, hh)
    shape = (3,) + r.shape
    return E.reshape(shape), H.reshape(shape) / a


def field_in_gap(
    solutions: Iterable[ForcedSolution],
    geom: Geometry,
    point: tuple[float, float, float],
) -> FieldSample:
    """Total E and H at ``point = (r, theta, x3)`` inside the gap."""
    r, theta, x3 = point
    if not (geom.a <= r <= geom.a * (1 + geom.h)) or abs(x3) > geom.l / 2:
        raise ValueError(f"point {point} lies outside the gap")
    E, H = _total_field(list(solutions), geom, r, theta, x3)
    return FieldSample((r, theta, x3), E.reshape(3), H.reshape(3))


def field_grid(solutions, geom: Geometry, shape: tuple[int, int, int] = GRID_SHAPE, layer: float = WALL_LAYER):
    """Fields on a tensor grid in (r, theta, x3) avoiding a thin wall layer."""
    a, h, half = geom.a, geom.h, geom.l / 2
    r = np.linspace(a * (1 + layer), a * (1 + h - layer), shape[0])
    theta = 2 * np.pi * np.arange(shape[1]) / shape[1]
    x3 = np.linspace(-half * (1 - layer), half * (1 - layer), shape[2])
    R, T, X = np.meshgrid(r, theta, x3, indexing="ij")
    E, H = _total_field(list(solutions), geom, R, T, X)
    return (R, T, X), E, H


# -- scans ----------------------------------------------------------------------


def _resonance_k(selector: dict, geom: Geometry, N: int) -> complex:
    m = selector.get("m", 1)
    parity = Parity(selector.get("parity", "even"))
    cls = ResonanceClass(selector.get("class", "TE_FabryPerot"))
    q = selector.get("mprime", 2)
    seeds = asymptotic_resonances(m, parity, geom, k_max=selector.get("k_max"))
    for s in seeds:
        if s.classification is cls and (cls is ResonanceClass.TE_near_m or s.mprime == q):
            return refine(s, geom, N, certify=False).k
    raise LookupError(f"no resonance matching {selector}")


def enhancement_scan(
    kind: ExcitationKind | str,
    selector: dict,
    h_list: Iterable[float],
    geom: Geometry,
    N: int = 8,
    d1: float = 0.0,
    y3: float = 1.0,
    detune: float = 0.0,
) -> list[ScanRow]:
    """Drive at Re(k*) (+ ``detune``) for each gap width and record field maxima."""
    kind = ExcitationKind(kind)
    hs = list(h_list)
    if len(hs) < 3 or any(b >= a for a, b in zip(hs, hs[1:])):
        raise ValueError("h list must be strictly descending with at least three values")
    rows = []
    for h in hs:
        g = Geometry(h, geom.l, geom.a)
        k = _resonance_k(selector, g, N).real + detune
        if kind is ExcitationKind.oblique_plane:
            exc = Excitation.oblique(k, d1, math.sqrt(1 - d1 * d1))
        elif kind is ExcitationKind.dipole:
            exc = Excitation.dipole(k, y3)
        else:
            exc = Excitation.normal(k)
        sols = solve_excitation(exc, g, N)
        _, E, H = field_grid(sols, g)
        mE = float(np.max(np.linalg.norm(E, axis=0))) if sols else 0.0
        mH = float(np.max(np.linalg.norm(H, axis=0))) if sols else 0.0
        mH3 = float(np.max(np.abs(H[2]))) if sols else 0.0
        rows.append(ScanRow(h, k, kind.value, mE, mH, mH3, mE * h, mH * h))
    return rows


def scan_to_csv(rows: Iterable[ScanRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SCAN_COLUMNS)
    for r in rows:
        w.writerow(
            [
                f"{r.h:.17g}",
                f"{r.k_drive:.17g}",
                r.excitation,
                f"{r.max_abs_E:.17g}",
                f"{r.max_abs_H:.17g}",
                f"{r.max_E_times_h:.17g}",
                f"{r.max_H_times_h:.17g}",
            ]
        )
    return buf.getvalue()
