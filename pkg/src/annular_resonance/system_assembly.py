"""Per-momentum characteristic system and closed-form spectral coefficients.

Unknowns are the aperture traces of the hole modes.  For momentum m the
resonant unknown ``d`` is TE_{m0} (m != 0) or TEM (m = 0); the remaining 2N
unknowns ``c`` are the first N non-resonant TE modes followed by the first N TM
modes, scaled so that the system reads

    (D - A) d - R c = a,        -C d + (I - B) c = b,

and the scalar characteristic function is Lambda = D - A - R (I - B)^{-1} C.

Two flavours of the closed-form coefficients are provided.  ``"literal"`` keeps
the textbook normalisation of the small-gap formulas; ``"consistent"`` rescales
them to match the small-gap expansion of the kernel used in the assembly.
"""

from __future__ import annotations

import cmath
import csv
import io
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import special

from .annulus_modes import Family, Geometry, Parity, radial_mode, s_value
from .kernel import DEFAULT_ANGULAR, DEFAULT_RADIAL, PairingEngine, SingleLayerGram, singlelayer_gram
from .specfun import integral_J2m

__all__ = [
    "SpectralCoeffs",
    "PiValue",
    "CharacteristicSystem",
    "SingularSystemError",
    "MissingRootError",
    "spectral_coeffs",
    "beta_bessel_form",
    "pi_m",
    "pi_0",
    "assemble",
    "characteristic_value",
    "system_to_csv",
    "VARIANTS",
]

VARIANTS = ("literal", "consistent")
EULER_GAMMA = float(np.euler_gamma)
_GL_X, _GL_W = np.polynomial.legendre.leggauss(96)
_THETA = (np.pi / 4) * (_GL_X + 1)
_THETA_W = (np.pi / 4) * _GL_W
COND_LIMIT = 1e12


class SingularSystemError(np.linalg.LinAlgError):
    """I - B (or Lambda) is numerically singular."""


class MissingRootError(LookupError):
    """Eigenvalue tables do not cover the requested truncation."""


# -- spectral coefficients ----------------------------------------------------


def _theta_integral(func, m: int) -> complex:
    """int_0^{pi/2} func(theta) cos(2 m theta) dtheta (smooth integrand)."""
    vals = func(_THETA) * np.cos(2 * m * _THETA)
    return complex(np.sum(vals * _THETA_W))


def _alpha(m: int, k: complex, variant: str) -> complex:
    m = abs(m)
    const = (math.log(2) - EULER_GAMMA - special.digamma(m + 0.5)) / (4 * math.pi)
    if variant == "literal":
        integral = _theta_integral(lambda t: (np.cos(k * np.sin(t)) - 1) / np.sin(t), m)
        return 3 / (8 * math.pi) + integral / math.pi + const
    integral = _theta_integral(lambda t: (np.cos(2 * k * np.sin(t)) - 1) / np.sin(t), m)
    return 3 / (8 * math.pi) + integral / (4 * math.pi) + const


def _beta(m: int, k: complex, variant: str) -> complex:
    m = abs(m)
    if variant == "literal":
        return _theta_integral(lambda t: np.sin(k * np.sin(t)) / np.sin(t), m) / math.pi
    return _theta_integral(lambda t: np.sin(2 * k * np.sin(t)) / np.sin(t), m) / (4 * math.pi)


def beta_bessel_form(m: int, k: float, variant: str = "literal") -> float:
    """The Bessel-integral form of beta_m(k) for real k."""
    if variant == "literal":
        return 0.5 * integral_J2m(abs(m), k)
    return 0.125 * integral_J2m(abs(m), 2 * k)


@dataclass(frozen=True)
class SpectralCoeffs:
    m: int
    k: complex
    alpha: complex
    beta: complex
    alpha_tilde: complex
    beta_tilde: complex
    variant: str = "literal"


def spectral_coeffs(m: int, k: complex, variant: str = "literal") -> SpectralCoeffs:
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    k = complex(k)
    a = _alpha(m, k, variant)
    b = _beta(m, k, variant)
    at = 0.5 * (_alpha(m + 1, k, variant) + _alpha(m - 1, k, variant))
    bt = 0.5 * (_beta(m + 1, k, variant) + _beta(m - 1, k, variant))
    if k.imag == 0:
        a, b, at, bt = (v.real for v in (a, b, at, bt))
    return SpectralCoeffs(m, k, a, b, at, bt, variant)


@dataclass(frozen=True)
class PiValue:
    value: complex
    m: int
    k: complex
    h: float
    variant: str = "literal"


def pi_m(m: int, k: complex, h: float, gram: SingleLayerGram | None = None, variant: str = "literal") -> PiValue:
    """Frequency-shift functional of the TE_{m0} branch (m != 0)."""
    if m == 0:
        raise ValueError("pi_m needs m != 0; use pi_0")
    gram = gram or singlelayer_gram(64)
    c = spectral_coeffs(m, k, variant)
    k2, m2 = complex(k) ** 2, m * m
    if variant == "literal":
        kap = gram.kappa
        v = (m2 - k2) * h * math.log(h) / (2 * math.pi) + 2 * k2 * h * (c.alpha_tilde + 1j * c.beta_tilde)
        v += -2 * m2 * h * (c.alpha + 1j * c.beta) + (m2 - k2) * h * kap
    else:
        kap = gram.kappa_with(4.0)
        v = (m2 - k2) * h * math.log(h) / (2 * math.pi) + 2 * k2 * h * (c.alpha_tilde + 1j * c.beta_tilde)
        v += -2 * m2 * h * (c.alpha + 1j * c.beta) + 2 * (m2 - k2) * h * kap
        v *= 2
    return PiValue(complex(v), m, complex(k), h, variant)


def pi_0(k: complex, h: float, gram: SingleLayerGram | None = None, variant: str = "literal") -> PiValue:
    """Frequency-shift functional of the TEM branch."""
    gram = gram or singlelayer_gram(64)
    c = spectral_coeffs(1, k, variant)
    if variant == "literal":
        v = -h * math.log(h) / (4 * math.pi) + c.alpha * h + 1j * c.beta * h - h * gram.kappa
    else:
        v = 4 * (-h * math.log(h) / (4 * math.pi) + c.alpha * h + 1j * c.beta * h - h * gram.kappa_with(4.0))
    return PiValue(complex(v), 0, complex(k), h, variant)


# -- mode-matching assembly ---------------------------------------------------


def _inv_tan(parity: Parity, z: complex) -> complex:
    """1/T with T = tan z (even) or -cot z (odd), stable for Im z >= 0."""
    e = cmath.exp(2j * z)
    cot = 1j * (e + 1) / (e - 1)
    tan = -1j * (e - 1) / (e + 1)
    return cot if parity is Parity.even else -tan


def _lhs_trig(parity: Parity, z: complex) -> complex:
    return cmath.sin(z) if parity is Parity.even else cmath.cos(z)


def _trace_trig(parity: Parity, z: complex) -> complex:
    return 2 * cmath.cos(z) if parity is Parity.even else -2 * cmath.sin(z)


def _sinc(z: complex) -> complex:
    """sin(z)/z with a Taylor branch near 0."""
    if abs(z) < 1e-4:
        z2 = z * z
        return 1 - z2 / 6 + z2 * z2 / 120
    return cmath.sin(z) / z


@dataclass
class BasisFunction:
    kind: str  # "TE", "TM", "TEM"
    n: int
    lam: float
    value: np.ndarray  # radial profile at quadrature nodes
    deriv: np.ndarray


@lru_cache(maxsize=256)
def _basis(m: int, h: float, N: int, n_radial: int) -> tuple:
    from .kernel import RadialQuadrature

    r = RadialQuadrature(h, n_radial).r
    out = []
    try:
        if m == 0:
            out.append(BasisFunction("TEM", 0, 0.0, np.log(r), 1 / r))
            te = [radial_mode(Family.N, 0, n, h) for n in range(1, N + 1)]
        else:
            rm0 = radial_mode(Family.N, m, 0, h)
            out.append(BasisFunction("TE", 0, rm0.lam, rm0.value(r), rm0.deriv(r)))
            te = [radial_mode(Family.N, m, n, h) for n in range(1, N + 1)]
        tm = [radial_mode(Family.D, m, n, h) for n in range(1, N + 1)]
    except Exception as exc:  # noqa: BLE001 - re-raised with context
        raise MissingRootError(f"eigen tables do not cover N={N} for m={m}, h={h}") from exc
    out += [BasisFunction("TE", rm.root.n, rm.lam, rm.value(r), rm.deriv(r)) for rm in te]
    out += [BasisFunction("TM", rm.root.n, rm.lam, rm.value(r), rm.deriv(r)) for rm in tm]
    return tuple(out)


def coupling_matrix(m: int, k: complex, h: float, N: int, n_radial: int = DEFAULT_RADIAL, n_angular: int = DEFAULT_ANGULAR):
    """K[b, c] = exterior trace pairing of source basis c tested with conj(b)."""
    basis = _basis(m, h, N, n_radial)
    eng = PairingEngine(h, k, n_radial, n_angular)
    r = eng.quad.r
    K0, Kp, Km = eng.matrix(m), eng.matrix(m + 1), eng.matrix(m - 1)
    val = np.array([b.value for b in basis])
    dp = np.array([b.deriv - m * b.value / r for b in basis])
    dm = np.array([b.deriv + m * b.value / r for b in basis])
    P0 = val @ K0 @ val.T
    Pp = dp @ Kp @ dp.T
    Pm = dm @ Km @ dm.T
    k2 = complex(k) ** 2
    lam = np.array([b.lam for b in basis])
    is_te = np.array([b.kind == "TE" for b in basis])
    grad = 0.5 * k2 * (Pp + Pm)
    mixed = 0.5j * k2 * (Pp - Pm)
    K = np.where(np.outer(is_te, is_te), -np.outer(lam, lam) * P0 + grad, 0)
    K = K + np.where(np.outer(~is_te, ~is_te), grad, 0)
    K = K + np.where(np.outer(is_te, ~is_te), mixed, 0)
    K = K + np.where(np.outer(~is_te, is_te), -mixed, 0)
    return basis, K


@dataclass
class CharacteristicSystem:
    m: int
    parity: Parity
    k: complex
    h: float
    l: float
    N: int
    D_m: complex
    A_mm: complex
    R_m: np.ndarray
    C_m: np.ndarray
    B_m: np.ndarray
    # trace amplitude per unit unknown: e_0 = kappa0 * d, e_n = nu_n * c_n
    kappa0: complex = 0j
    nu: np.ndarray = field(default_factory=lambda: np.zeros(0, complex))
    # source scaling: a = rho0 * S_0, b_n = S_n / g_n
    rho0: complex = 0j
    g: np.ndarray = field(default_factory=lambda: np.zeros(0, complex))
    basis: tuple = ()
    a_scale: float = 1.0

    def rest_kinds(self) -> list[tuple[str, int]]:
        return [(b.kind, b.n) for b in self.basis[1:]]


def assemble(
    m: int,
    parity: Parity | str,
    k: complex,
    geom: Geometry,
    N: int = 8,
    gram: SingleLayerGram | None = None,
    n_radial: int | None = None,
    n_angular: int = DEFAULT_ANGULAR,
) -> CharacteristicSystem:
    """Assemble the truncated per-momentum system at wavenumber ``k``.

    ``gram`` is accepted for interface symmetry; the matrices come from the
    full kernel, not from its small-gap limit.
    """
    parity = Parity(parity)
    if not (1 <= N <= 64):
        raise ValueError("N must lie in [1, 64]")
    n_radial = n_radial or max(DEFAULT_RADIAL, 4 * N)
    h, l = geom.h, geom.l_unit
    k = complex(k) * geom.a
    basis, K = coupling_matrix(m, k, h, N, n_radial, n_angular)
    half = l / 2
    nu = np.empty(2 * N, complex)
    g = np.empty(2 * N, complex)
    for i, b in enumerate(basis[1:]):
        s = s_value(k, b.lam)
        it = _inv_tan(parity, s * half)
        if b.kind == "TE":
            nu[i] = 2 * it / b.lam**0.75
            g[i] = s * b.lam**0.25
        else:
            nu[i] = 2 * it / b.lam**0.25
            g[i] = k * k * b.lam**0.75 / s
    b0 = basis[0]
    if b0.kind == "TEM":
        D = _lhs_trig(parity, k * half)
        kappa0 = _trace_trig(parity, k * half)
        rho0 = 1 / (2 * math.pi * k * math.log1p(h))
    else:
        s0 = s_value(k, b0.lam)
        w0 = math.sqrt(abs(2 + cmath.sin(s0 * l)))
        if parity is Parity.even:
            D = s0 * _lhs_trig(parity, s0 * half)
            trace = _trace_trig(parity, s0 * half)
        else:
            # unknown rescaled by s0 so that Lambda stays analytic at cutoff
            D = _lhs_trig(parity, s0 * half)
            trace = -l * _sinc(s0 * half)
        kappa0 = trace / (b0.lam**0.75 * w0)
        rho0 = w0 / b0.lam**0.25
    A = -rho0 * K[0, 0] * kappa0
    R = -rho0 * K[0, 1:] * nu
    C = -K[1:, 0] * kappa0 / g
    B = -K[1:, 1:] * nu[None, :] / g[:, None]
    return CharacteristicSystem(
        m, parity, k, h, l, N, complex(D), complex(A), R, C, B, complex(kappa0), nu, complex(rho0), g, basis, geom.a
    )


def _solve_rest(sys: CharacteristicSystem, rhs: np.ndarray) -> np.ndarray:
    M = np.eye(len(sys.C_m)) - sys.B_m
    cond = np.linalg.cond(M)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularSystemError(f"I - B has condition number {cond:.3g}")
    return np.linalg.solve(M, rhs)


def characteristic_value(sys: CharacteristicSystem) -> complex:
    """Lambda_m(k) = D - A - R (I - B)^{-1} C."""
    return complex(sys.D_m - sys.A_mm - sys.R_m @ _solve_rest(sys, sys.C_m))


def system_to_csv(sys: CharacteristicSystem) -> str:
    """Debug dump of all blocks, complex entries as ``re,im``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["block", "row", "col", "re", "im"])

    def put(name, i, j, z):
        w.writerow([name, i, j, f"{z.real:.17g}", f"{z.imag:.17g}"])

    put("D", 0, 0, sys.D_m)
    put("A", 0, 0, sys.A_mm)
    for j, z in enumerate(sys.R_m):
        put("R", 0, j, z)
    for i, z in enumerate(sys.C_m):
        put("C", i, 0, z)
    for i in range(sys.B_m.shape[0]):
        for j in range(sys.B_m.shape[1]):
            put("B", i, j, sys.B_m[i, j])
    return buf.getvalue()
