"""Angular Green's kernel, flat single-layer Gram data and radial pairings.

The kernel of the single-layer operator restricted to angular momentum m is

    F_m(r, r') = (1/2pi) int_0^{2pi} exp(i k d) / d  cos(m theta) dtheta,
    d = sqrt(r^2 + r'^2 - 2 r r' cos theta).

Its k = 0 part is a toroidal Legendre function, F = Q_{m-1/2}(w)/(pi sqrt(r r'))
with w = (r^2 + r'^2)/(2 r r'), and the log singularity is
-log|r - r'| / (pi sqrt(r r')).  Pairings split off that log term and integrate
it with exact product weights; the bounded remainder uses tensor Gauss.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Union

import numpy as np
from scipy import special

__all__ = [
    "KernelValue",
    "CoincidenceError",
    "SingleLayerGram",
    "f_kernel",
    "kernel_remainder",
    "singlelayer_gram",
    "kappa_target",
    "gram_to_csv",
    "gram_from_csv",
    "RadialQuadrature",
    "PairingEngine",
    "pairing_scalar",
    "pairing_gradient",
]

EULER_GAMMA = float(np.euler_gamma)
DEFAULT_RADIAL = 32
DEFAULT_ANGULAR = 256


class CoincidenceError(ValueError):
    """Kernel requested on the diagonal r = r'."""


@dataclass(frozen=True)
class KernelValue:
    value: complex
    log_coefficient: float


# -- toroidal functions -------------------------------------------------------


def _toroidal_plus_log(mu: int, r, rp):
    """Q_{mu-1/2}(w) + log|r - r'|, with its finite limit on the diagonal."""
    r = np.asarray(r, dtype=float)
    rp = np.asarray(rp, dtype=float)
    r, rp = np.broadcast_arrays(r, rp)
    delta = np.abs(r - rp)
    diag = delta == 0
    dsafe = np.where(diag, 1.0, delta)
    wm1 = dsafe**2 / (2 * r * rp)
    w = 1 + wm1
    p = wm1 / (w + 1)  # 1 - modulus parameter
    K = special.ellipkm1(p)
    E = special.ellipe(1 - p)
    q_prev = np.sqrt(2 / (w + 1)) * K  # Q_{-1/2}
    if mu == 0:
        q = q_prev
    else:
        q = w * np.sqrt(2 / (w + 1)) * K - np.sqrt(2 * (w + 1)) * E  # Q_{1/2}
        for n in range(1, mu):
            q_prev, q = q, (2 * n * w * q - (n - 0.5) * q_prev) / (n + 0.5)
    out = q + np.log(dsafe)
    limit = np.log(2 * np.sqrt(r * rp)) - EULER_GAMMA - special.digamma(mu + 0.5)
    return np.where(diag, limit, out)


@lru_cache(maxsize=16)
def _angular_rule(n: int):
    """Gauss rule on [0, pi] graded towards theta = 0 via theta = pi x^3."""
    x, w = np.polynomial.legendre.leggauss(n)
    x = (x + 1) / 2
    w = w / 2
    theta = np.pi * x**3
    jac = 3 * np.pi * x**2
    return theta, w * jac


def _k_ratio(k: complex, r, rp, n_ang: int):
    """Weighted samples of (exp(i k d) - 1)/d on the graded angular rule."""
    r = np.asarray(r, dtype=float)[..., None]
    rp = np.asarray(rp, dtype=float)[..., None]
    theta, w = _angular_rule(n_ang)
    d = np.sqrt((r - rp) ** 2 + 4 * r * rp * np.sin(theta / 2) ** 2)
    kd = k * d
    small = np.abs(kd) < 1e-6
    dsafe = np.where(d == 0, 1.0, d)
    ratio = np.where(small, 1j * k * (1 + 0.5j * kd), np.expm1(1j * kd) / dsafe)
    return ratio * (w / np.pi), theta


def _k_part(mu: int, k: complex, r, rp, n_ang: int = DEFAULT_ANGULAR):
    """(1/pi) int_0^pi (exp(i k d) - 1) cos(mu theta) / d dtheta."""
    if k == 0:
        return np.zeros(np.broadcast(np.asarray(r), np.asarray(rp)).shape, dtype=complex)
    ratio, theta = _k_ratio(k, r, rp, n_ang)
    return ratio @ np.cos(mu * theta)


def kernel_remainder(mu: int, k: complex, r, rp, n_ang: int = DEFAULT_ANGULAR):
    """F_mu + log|r - r'| / (pi sqrt(r r')), finite on the diagonal."""
    mu = abs(int(mu))
    r = np.asarray(r, dtype=float)
    rp = np.asarray(rp, dtype=float)
    return _toroidal_plus_log(mu, r, rp) / (np.pi * np.sqrt(r * rp)) + _k_part(mu, k, r, rp, n_ang)


def f_kernel(m: int, k: complex, r: float, rp: float, n_ang: int = DEFAULT_ANGULAR) -> KernelValue:
    """Pointwise F_m(r, r'); ``log_coefficient`` multiplies log|r - r'|."""
    if abs(r - rp) < 1e-14:
        raise CoincidenceError("F_m is singular at r = r'")
    coeff = -1.0 / (math.pi * math.sqrt(r * rp))
    rem = complex(kernel_remainder(m, k, r, rp, n_ang))
    return KernelValue(rem + coeff * math.log(abs(r - rp)), coeff)


# -- flat single-layer Gram ---------------------------------------------------


def _sin_log(c: float) -> float:
    """int_0^1 log(u) sin(c u) du."""
    _, ci = special.sici(c)
    return -(EULER_GAMMA + math.log(c) - ci) / c


def _cos_log(c: float) -> float:
    """int_0^1 log(u) cos(c u) du."""
    si, _ = special.sici(c)
    return -si / c


def _u_cos_log(c: float) -> float:
    """int_0^1 u log(u) cos(c u) du."""
    _, ci = special.sici(c)
    cin = EULER_GAMMA + math.log(c) - ci
    return cin / c**2 - (1 - math.cos(c)) / c**2


def _log_cos_integral(a: int, b: int) -> float:
    """int_0^1 int_0^1 log|x - y| cos(a pi x) cos(b pi y) dx dy."""
    if (a + b) % 2:
        return 0.0
    if a == b == 0:
        return -1.5
    if a == b:
        c = a * math.pi
        return _cos_log(c) - _u_cos_log(c) - _sin_log(c) / c
    A = 1 / ((a - b) * math.pi)
    B = 1 / ((a + b) * math.pi)
    sa = _sin_log(a * math.pi) if a else 0.0
    sb = _sin_log(b * math.pi) if b else 0.0
    return -(A + B) * sa + (A - B) * sb


@dataclass(frozen=True)
class SingleLayerGram:
    N: int
    P: np.ndarray
    p: np.ndarray
    kappa: float

    def kappa_with(self, weight: float) -> float:
        """p^T (I + weight P)^{-1} p."""
        A = np.eye(self.N) + weight * self.P
        c = np.linalg.cholesky(A)
        z = np.linalg.solve(c, self.p)
        return float(z @ z)


def kappa_target() -> float:
    return 1 / (2 * math.pi**2) - math.log(math.pi / 2) / math.pi**2


@lru_cache(maxsize=16)
def singlelayer_gram(N: int) -> SingleLayerGram:
    """Gram data of S0 (kernel -log|t-t'|/pi on (0,1)) in the scaled cosine basis."""
    if not (1 <= N <= 256):
        raise ValueError("N must lie in [1, 256]")
    idx = range(1, N + 1)
    P = np.empty((N, N))
    for i in idx:
        for j in range(i, N + 1):
            P[i - 1, j - 1] = P[j - 1, i - 1] = -math.sqrt(i * j) * _log_cos_integral(i, j) / 2
    p = np.array([-math.sqrt(i / (2 * math.pi)) * _log_cos_integral(i, 0) for i in idx])
    gram = SingleLayerGram(N, P, p, 0.0)
    try:
        kappa = gram.kappa_with(2.0)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("I + 2P is not positive definite") from exc
    P.setflags(write=False)
    p.setflags(write=False)
    return SingleLayerGram(N, P, p, kappa)


def gram_to_csv(gram: SingleLayerGram) -> str:
    """Row-major dump of P followed by p (n = 0 column)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n'", "n", "value"])
    for i in range(gram.N):
        for j in range(gram.N):
            w.writerow([i + 1, j + 1, f"{gram.P[i, j]:.17g}"])
    for i in range(gram.N):
        w.writerow([i + 1, 0, f"{gram.p[i]:.17g}"])
    return buf.getvalue()


def gram_from_csv(text: str) -> SingleLayerGram:
    """Inverse of :func:`gram_to_csv`; kappa is recomputed from the data."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or [c.strip() for c in rows[0]] != ["n'", "n", "value"]:
        raise ValueError("Gram CSV must start with the header n',n,value")
    entries = [(int(a), int(b), float(v)) for a, b, v in rows[1:] if a.strip()]
    N = max(a for a, _, _ in entries)
    P = np.full((N, N), np.nan)
    p = np.full(N, np.nan)
    for a, b, v in entries:
        if b == 0:
            p[a - 1] = v
        else:
            P[a - 1, b - 1] = v
    if np.isnan(P).any() or np.isnan(p).any():
        raise ValueError("Gram CSV is incomplete")
    gram = SingleLayerGram(N, P, p, 0.0)
    return SingleLayerGram(N, P, p, gram.kappa_with(2.0))


# -- product quadrature on [1, 1+h] ------------------------------------------


def _legendre_log_gram(n: int) -> np.ndarray:
    """G_kl = int int_{[-1,1]^2} log|x-y| P_k(x) P_l(y), exact."""

    def pq(k: int, j: int) -> float:
        # int_{-1}^{1} P_k Q_j
        if k == j or j < 0:
            return 0.0
        return (1 - (-1) ** (k + j)) / ((k - j) * (k + j + 1))

    G = np.zeros((n, n))
    for k in range(n):
        for l in range(1, n):
            G[k, l] = 2.0 / (2 * l + 1) * (pq(k, l + 1) - pq(k, l - 1))
    G[0, 0] = 4 * math.log(2) - 6
    G[1:, 0] = G[0, 1:]
    return 0.5 * (G + G.T)


@lru_cache(maxsize=8)
def _log_matrix(n: int):
    """Nodes, weights and L with int int_{[0,1]^2} log|t-t'| p q ~= p^T L q."""
    x, w = np.polynomial.legendre.leggauss(n)
    V = np.polynomial.legendre.legvander(x, n - 1)  # V[j, k] = P_k(x_j)
    T = ((2 * np.arange(n) + 1) / 2)[:, None] * (V * w[:, None]).T  # coefficients from values
    G = _legendre_log_gram(n)
    G[0, 0] -= 4 * math.log(2)
    L = 0.25 * T.T @ G @ T
    L = 0.5 * (L + L.T)
    return (x + 1) / 2, w / 2, L


class RadialQuadrature:
    """Gauss nodes on [1, 1+h] with exact log-singular product weights."""

    def __init__(self, h: float, n: int = DEFAULT_RADIAL):
        self.h = h
        self.n = n
        t, w, L = _log_matrix(n)
        self.t = t
        self.r = 1 + h * t
        self.w = w * h  # weights in r
        self._Lt = L

    def log_part(self) -> np.ndarray:
        """M with int int -log|r-r'| u v sqrt(r r') dr dr' / pi ~= u^T M v."""
        h = self.h
        sq = np.sqrt(self.r)
        wl = self._Lt + math.log(h) * np.outer(self._tw, self._tw)
        return -(h * h / math.pi) * sq[:, None] * wl * sq[None, :]

    @property
    def _tw(self):
        return self.w / self.h


RadialFunction = Union[Callable[[np.ndarray], np.ndarray], object]


class PairingEngine:
    """Kernel matrices for a fixed (h, k) on a radial quadrature.

    ``matrix(mu)`` returns K with  pi * int int F_mu u v r r' dr dr' ~= u^T K v
    for node values u, v.
    """

    def __init__(self, h: float, k: complex, n_radial: int = DEFAULT_RADIAL, n_angular: int = DEFAULT_ANGULAR):
        self.h = h
        self.k = complex(k)
        self.quad = RadialQuadrature(h, n_radial)
        self.n_angular = n_angular
        self._cache: dict[int, np.ndarray] = {}
        self._log = math.pi * self.quad.log_part()
        self._ratio = None

    def _k_samples(self):
        if self._ratio is None:
            q = self.quad
            iu = np.triu_indices(q.n)
            self._ratio = (iu,) + _k_ratio(self.k, q.r[iu[0]], q.r[iu[1]], self.n_angular)
        return self._ratio

    def matrix(self, mu: int) -> np.ndarray:
        mu = abs(int(mu))
        if mu not in self._cache:
            q = self.quad
            rem = _toroidal_plus_log(mu, q.r[:, None], q.r[None, :]) / (np.pi * np.sqrt(np.outer(q.r, q.r)))
            if self.k != 0:
                iu, ratio, theta = self._k_samples()
                upper = ratio @ np.cos(mu * theta)
                kp = np.zeros((q.n, q.n), complex)
                kp[iu] = upper
                kp = kp + kp.T - np.diag(np.diag(kp))
                rem = rem + kp
            wr = q.w * q.r
            smooth = math.pi * wr[:, None] * rem * wr[None, :]
            self._cache[mu] = self._log + smooth
        return self._cache[mu]

    def scalar(self, mu: int, u: np.ndarray, v: np.ndarray) -> complex:
        return complex(u @ self.matrix(mu) @ v)


def _profile(f, r: np.ndarray):
    """Values and derivatives of a radial profile at r."""
    if hasattr(f, "value") and hasattr(f, "deriv"):
        return np.asarray(f.value(r)), np.asarray(f.deriv(r))
    if isinstance(f, tuple):
        return np.asarray(f[0](r)), np.asarray(f[1](r))
    vals = np.asarray(f(r))
    return vals, None


def pairing_scalar(
    m: int,
    k: complex,
    f: RadialFunction,
    g: RadialFunction,
    h: float,
    n_radial: int = DEFAULT_RADIAL,
    n_angular: int = DEFAULT_ANGULAR,
) -> complex:
    """<S_k (f e^{im theta}), conj(g e^{im theta})> = pi int int F_m f conj(g) r r' dr dr'."""
    eng = PairingEngine(h, k, n_radial, n_angular)
    r = eng.quad.r
    fv, _ = _profile(f, r)
    gv, _ = _profile(g, r)
    return eng.scalar(m, fv, np.conj(gv))


def ladder_parts(m: int, f, r):
    """Radial parts of D+ and D- applied to f e^{im theta}."""
    fv, fd = _profile(f, r)
    if fd is None:
        raise TypeError("gradient pairing needs a profile with a derivative")
    return fd - m * fv / r, fd + m * fv / r


def pairing_gradient(
    m: int,
    k: complex,
    f: RadialFunction,
    g: RadialFunction,
    h: float,
    n_radial: int = DEFAULT_RADIAL,
    n_angular: int = DEFAULT_ANGULAR,
) -> complex:
    """<S_k grad(f e^{im theta}), conj grad(g e^{im theta})> via the D+/D- ladder."""
    eng = PairingEngine(h, k, n_radial, n_angular)
    r = eng.quad.r
    fp, fm = ladder_parts(m, f, r)
    gp, gm = ladder_parts(m, g, r)
    return 0.5 * (eng.scalar(m + 1, fp, np.conj(gp)) + eng.scalar(m - 1, fm, np.conj(gm)))
