import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from annular_resonance.specfun import (
    SpecfunDomainError,
    bessel_quad,
    cross_product_D,
    cross_product_N,
    digamma,
    integral_J2m,
)

# reference values from mpmath at 30 digits
BESSEL_3_7P5 = (
    -0.25806091319346031166,
    -0.12704904524840613749,
    0.1597075919379351151,
    -0.25029725905301367736,
)
DIGAMMA = {0.5: -1.9635100260214234794, 2.5: 0.70315664064524318723, 10.0: 2.2517525890667211076}
INT_J2M = {
    (0, 1.0): 0.91973041008976023931,
    (1, 2.5): 0.47379273963971184704,
    (2, 10.0): 0.86330705300864035951,
    (3, 0.5): 2.4052640079178693887e-8,
}


def test_bessel_quad_matches_reference():
    q = bessel_quad(3, 7.5)
    for got, want in zip((q.j, q.jp, q.y, q.yp), BESSEL_3_7P5):
        assert got == pytest.approx(want, rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 20), st.floats(0.05, 500.0))
def test_wronskian(m, x):
    q = bessel_quad(m, x)
    scale = max(1.0, abs(q.y * q.jp), abs(q.j * q.yp))
    assert abs(q.wronskian() - 2 / (math.pi * x)) < 1e-12 * scale


@pytest.mark.parametrize("x", sorted(DIGAMMA))
def test_digamma(x):
    assert digamma(x) == pytest.approx(DIGAMMA[x], rel=1e-14)


@pytest.mark.parametrize("m,k", sorted(INT_J2M))
def test_integral_J2m(m, k):
    assert integral_J2m(m, k) == pytest.approx(INT_J2M[(m, k)], rel=1e-10, abs=1e-15)


def test_integral_J2m_tends_to_one():
    # int_0^inf J_n = 1
    assert integral_J2m(1, 400.0) == pytest.approx(1.0, abs=0.05)


def test_cross_products_vanish_at_reference_roots():
    assert abs(cross_product_D(0, 31.412314159884275861, 0.1)) < 1e-13
    assert abs(cross_product_N(1, 0.95273999822163748975, 0.1)) < 1e-12


def test_cross_products_vectorise():
    v = cross_product_D(2, [1.0, 2.0, 3.0], 0.05)
    assert v.shape == (3,)


@pytest.mark.parametrize(
    "call",
    [
        lambda: bessel_quad(-1, 1.0),
        lambda: bessel_quad(1, 0.0),
        lambda: bessel_quad(65, 1.0),
        lambda: cross_product_D(1, -1.0, 0.1),
        lambda: cross_product_N(1, 1.0, 0.0),
        lambda: digamma(0.0),
        lambda: integral_J2m(1, -1.0),
    ],
)
def test_domain_errors(call):
    with pytest.raises(SpecfunDomainError):
        call()
