import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from annular_resonance.kernel import (
    CoincidenceError,
    PairingEngine,
    f_kernel,
    gram_from_csv,
    gram_to_csv,
    kappa_target,
    pairing_gradient,
    pairing_scalar,
    singlelayer_gram,
)
from annular_resonance.kernel import _log_cos_integral

# F_m(r, r') = (1/pi) int_0^pi exp(i k d) cos(m t) / d dt, mpmath at 30 digits
F_REFERENCE = [
    (1, 2.3, 1.0, 1.004, complex(1.6648836686541865086, 0.66156776845772994301)),
    (0, complex(1.5, 0.2), 1.01, 1.003, complex(1.4020807515359146217, 0.58558663177356595024)),
    (3, 0.7, 1.0, 1.02, complex(0.93533683707606318729, 0.000016401371836101621333)),
]
# int_0^1 int_0^1 log|x - y| cos(a pi x) cos(b pi y), mpmath nested quadrature
LOG_COS_REFERENCE = {
    (0, 0): -1.5,
    (1, 1): -0.3868475049514081,
    (2, 4): 0.01142739415625797,
    (3, 1): 0.02942519149047824,
    (2, 0): 0.1234929635471594,
}
KAPPA_TARGET = 0.0049056976088323328646


@pytest.mark.parametrize("m,k,r,rp,want", F_REFERENCE)
def test_f_kernel_matches_reference(m, k, r, rp, want):
    got = f_kernel(m, k, r, rp)
    assert abs(got.value - want) < 1e-7 * abs(want)
    assert got.log_coefficient == pytest.approx(-1 / (math.pi * math.sqrt(r * rp)))


def test_f_kernel_is_symmetric():
    a = f_kernel(2, 1.7, 1.0, 1.013).value
    b = f_kernel(2, 1.7, 1.013, 1.0).value
    assert abs(a - b) < 1e-13


def test_f_kernel_rejects_diagonal():
    with pytest.raises(CoincidenceError):
        f_kernel(1, 1.0, 1.01, 1.01)


@pytest.mark.parametrize("ab", sorted(LOG_COS_REFERENCE))
def test_log_cos_integral(ab):
    assert _log_cos_integral(*ab) == pytest.approx(LOG_COS_REFERENCE[ab], rel=1e-13, abs=1e-15)


def test_kappa_target():
    assert kappa_target() == pytest.approx(KAPPA_TARGET, rel=1e-14)


def test_kappa_converges_monotonically():
    errs = [abs(singlelayer_gram(n).kappa - KAPPA_TARGET) for n in (8, 16, 32, 64)]
    assert all(b < a for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 1e-3


def test_gram_is_symmetric_positive():
    g = singlelayer_gram(16)
    assert np.allclose(g.P, g.P.T)
    assert np.all(np.linalg.eigvalsh(np.eye(16) + 2 * g.P) > 0)


def test_gram_rejects_bad_order():
    with pytest.raises(ValueError):
        singlelayer_gram(0)


def test_gram_csv_roundtrip():
    g = singlelayer_gram(8)
    back = gram_from_csv(gram_to_csv(g))
    assert np.array_equal(back.P, g.P) and np.array_equal(back.p, g.p)
    assert back.kappa == g.kappa


def test_gram_csv_rejects_incomplete_and_bad_header():
    text = gram_to_csv(singlelayer_gram(4)).splitlines()
    with pytest.raises(ValueError):
        gram_from_csv("\n".join(text[:-1]))
    with pytest.raises(ValueError):
        gram_from_csv("a,b,c\n" + "\n".join(text[1:]))


def test_pairing_matrix_is_symmetric():
    K = PairingEngine(0.02, 2.3 + 0.1j, 24).matrix(2)
    assert np.allclose(K, K.T, rtol=1e-12, atol=0)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 3), st.floats(0.3, 4.0))
def test_pairing_is_bilinear_symmetric(m, k):
    f = lambda r: (r - 1) ** 2
    g = lambda r: np.cos(40 * (r - 1))
    a = pairing_scalar(m, k, f, g, 0.02, 24)
    b = pairing_scalar(m, k, g, f, 0.02, 24)
    assert abs(a - b) < 1e-10 * max(1.0, abs(a))


def test_scalar_pairing_of_constant_converges_in_quadrature():
    one = lambda r: np.ones_like(r)
    v24 = pairing_scalar(0, 1.0, one, one, 0.01, 24)
    v48 = pairing_scalar(0, 1.0, one, one, 0.01, 48)
    assert abs(v24 - v48) < 1e-9 * abs(v48)


def test_gradient_pairing_needs_derivative():
    with pytest.raises(TypeError):
        pairing_gradient(1, 1.0, lambda r: r, lambda r: r, 0.02)
