import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from annular_resonance.annulus_modes import (
    Family,
    Geometry,
    ModeFamily,
    ModeIndex,
    Parity,
    asymptotic_beta,
    find_roots,
    first_roots,
    radial_mode,
    s_value,
    trace_factor,
    trig_ratio,
    waveguide_mode,
)

# cross-product roots from mpmath.findroot at 30 digits
REFERENCE_ROOTS = [
    ("D", 0, 0.1, 1, 31.412314159884275861),
    ("D", 2, 0.05, 1, 62.860256894520848693),
    ("N", 1, 0.1, 0, 0.95273999822163748975),
    ("N", 3, 0.05, 1, 62.905742133559701333),
    ("N", 0, 0.1, 1, 31.426761168652784468),
    ("N", 2, 0.02, 0, 1.9802303541457446008),
]


@pytest.mark.parametrize("fam,m,h,n,beta", REFERENCE_ROOTS)
def test_roots_match_reference(fam, m, h, n, beta):
    n0 = 0 if (fam == "N" and m != 0) else 1
    root = first_roots(fam, m, h, n - n0 + 1)[-1]
    assert root.n == n
    assert root.beta == pytest.approx(beta, rel=1e-12)
    lo, hi = root.bracket
    assert lo <= root.beta <= hi and hi - lo <= 1e-9 * root.beta


def test_find_roots_agrees_with_first_roots():
    rs = find_roots(Family.N, 1, 0.05, 200.0)
    ref = first_roots(Family.N, 1, 0.05, len(rs))
    assert [r.beta for r in rs] == pytest.approx([r.beta for r in ref], rel=1e-12)
    assert [r.n for r in rs] == [0, 1, 2, 3][: len(rs)]


def test_find_roots_rejects_loose_tolerance():
    with pytest.raises(ValueError):
        find_roots(Family.D, 0, 0.1, 50.0, rel_tol=1e-6)


@pytest.mark.parametrize("fam,m,n", [("D", 0, 1), ("D", 2, 1), ("N", 1, 1), ("N", 2, 0)])
def test_asymptotic_beta_is_second_order(fam, m, n):
    errs = []
    for h in (0.02, 0.01):
        n0 = 0 if (fam == "N" and m != 0) else 1
        beta = first_roots(fam, m, h, n - n0 + 1)[-1].beta
        errs.append(abs(beta - asymptotic_beta(fam, m, n, h)))
    assert errs[0] / errs[1] > 3.0


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(["D", "N"]), st.integers(0, 4), st.integers(1, 3), st.floats(0.005, 0.2))
def test_radial_modes_are_normalised(fam, m, n, h):
    rm = radial_mode(fam, m, n, h)
    x, w = np.polynomial.legendre.leggauss(96)
    r = 1 + h * (x + 1) / 2
    norm = 2 * math.pi * np.sum(w * rm.value(r) ** 2 * r) * h / 2
    assert norm == pytest.approx(1.0, abs=1e-10)


def test_distinct_modes_are_orthogonal():
    h = 0.05
    x, w = np.polynomial.legendre.leggauss(96)
    r = 1 + h * (x + 1) / 2
    a, b = radial_mode("N", 2, 0, h), radial_mode("N", 2, 1, h)
    assert abs(2 * math.pi * np.sum(w * a.value(r) * b.value(r) * r) * h / 2) < 1e-10


def test_boundary_conditions():
    h = 0.03
    d = radial_mode("D", 1, 2, h)
    n = radial_mode("N", 1, 2, h)
    ends = np.array([1.0, 1.0 + h])
    assert np.max(np.abs(d.value(ends))) < 1e-8 * np.max(np.abs(d.deriv(ends)))
    assert np.max(np.abs(n.deriv(ends))) < 1e-8 * np.max(np.abs(n.value(ends))) * n.root.beta


def test_geometry_validation():
    assert Geometry(0.01, 2.0, a=2.0).l_unit == 1.0
    with pytest.raises(ValueError):
        Geometry(0.3, 2.0)
    with pytest.raises(ValueError):
        Geometry(0.01, -1.0)


def test_mode_index_validation():
    with pytest.raises(ValueError):
        ModeIndex(ModeFamily.TEM, Parity.even, m=1)
    with pytest.raises(ValueError):
        ModeIndex(ModeFamily.TM, Parity.odd, m=1, n=0)
    with pytest.raises(ValueError):
        ModeIndex(ModeFamily.TE, Parity.even, m=0, n=0)


@settings(max_examples=50, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(0, 50))
def test_s_value_branch(kr, ki, lam):
    s = s_value(complex(kr, ki), lam)
    assert s.imag >= 0
    assert abs(s * s - (complex(kr, ki) ** 2 - lam)) < 1e-9 * (1 + lam + kr * kr + ki * ki)


def test_trig_ratio_is_stable_for_evanescent_modes():
    s = 1000j
    v = trig_ratio("cos", "cos", s, np.array([0.0, 0.5, 1.0]), 1.0)
    assert np.all(np.isfinite(v))
    assert v[-1] == pytest.approx(1.0)


def test_trace_factor():
    assert trace_factor("even", 0.7, 1.0) == pytest.approx(2 * math.cos(0.7))
    assert trace_factor("odd", 0.7, 1.0) == pytest.approx(-2 * math.sin(0.7))


def test_waveguide_mode_wall_condition():
    geom = Geometry(0.05, 2.0)
    idx = ModeIndex(ModeFamily.TE, Parity.even, m=1, n=1)
    f = waveguide_mode(idx, geom, 2.3, (1.0, 0.4, 0.3))
    # tangential E (theta, x3 components) vanishes on r = 1
    e_theta = -math.sin(0.4) * f.E[0] + math.cos(0.4) * f.E[1]
    assert abs(e_theta) < 1e-8 * np.max(np.abs(f.E))
    assert abs(f.E[2]) < 1e-12
