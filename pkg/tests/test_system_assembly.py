import math

import numpy as np
import pytest

from annular_resonance.annulus_modes import Geometry, Parity, first_roots
from annular_resonance.kernel import singlelayer_gram
from annular_resonance.system_assembly import (
    assemble,
    beta_bessel_form,
    characteristic_value,
    coupling_matrix,
    pi_0,
    pi_m,
    spectral_coeffs,
    system_to_csv,
)
from annular_resonance.validation import _amm_closed_form


@pytest.mark.parametrize("variant", ["literal", "consistent"])
@pytest.mark.parametrize("m", [0, 1, 4])
@pytest.mark.parametrize("k", [0.5, 2.0, 5.0])
def test_beta_forms_agree(variant, m, k):
    assert spectral_coeffs(m, k, variant).beta == pytest.approx(beta_bessel_form(m, k, variant), abs=1e-9)


def test_spectral_coeffs_real_for_real_k():
    c = spectral_coeffs(2, 1.3)
    assert all(isinstance(v, float) for v in (c.alpha, c.beta, c.alpha_tilde, c.beta_tilde))


def test_spectral_coeffs_rejects_unknown_variant():
    with pytest.raises(ValueError):
        spectral_coeffs(1, 1.0, "other")


def test_pi_values_scale_like_h_log_h():
    g = singlelayer_gram(64)
    for f in (lambda h: pi_m(1, 3.2, h, g).value, lambda h: pi_0(3.1, h, g).value):
        r = abs(f(0.01)) / abs(f(0.02))
        assert 0.3 < r < 0.7
    with pytest.raises(ValueError):
        pi_m(0, 1.0, 0.01)


def test_coupling_matrix_shape_and_symmetry():
    basis, K = coupling_matrix(1, 2.3, 0.02, 4)
    assert K.shape == (9, 9) and len(basis) == 9
    te = [i for i, b in enumerate(basis) if b.kind == "TE"]
    blk = K[np.ix_(te, te)]
    assert np.max(np.abs(blk - blk.T)) < 1e-12 * np.max(np.abs(blk))


def test_assemble_blocks():
    s = assemble(2, "even", 2.3, Geometry(0.02, 2.0), N=4)
    assert s.B_m.shape == (8, 8) and s.R_m.shape == (8,) and s.C_m.shape == (8,)
    assert s.rest_kinds()[:4] == [("TE", n) for n in range(1, 5)]
    text = system_to_csv(s)
    assert text.startswith("block,row,col,re,im\n")
    assert len(text.splitlines()) == 1 + 2 + 8 + 8 + 64


def test_assemble_rejects_bad_truncation():
    with pytest.raises(ValueError):
        assemble(1, "even", 1.0, Geometry(0.02, 2.0), N=0)


def _analytic(f, k, eps=1e-5):
    dx = (f(k + eps) - f(k - eps)) / (2 * eps)
    dy = (f(k + 1j * eps) - f(k - 1j * eps)) / (2j * eps)
    return abs(dx - dy) / max(abs(dx), 1e-12)


@pytest.mark.parametrize("parity", ["even", "odd"])
def test_lambda_is_analytic_at_resonant_cutoff(parity):
    geom = Geometry(0.01, 2.0)
    k0 = first_roots("N", 1, 0.01, 1)[0].beta
    f = lambda k: characteristic_value(assemble(1, parity, k, geom, N=4))
    assert _analytic(f, k0 + 1e-4 - 1e-3j) < 1e-4


def test_lambda_is_invariant_under_a_scaling():
    f1 = characteristic_value(assemble(1, "even", 3.0 - 0.01j, Geometry(0.01, 2.0), N=4))
    f2 = characteristic_value(assemble(1, "even", 1.5 - 0.005j, Geometry(0.01, 4.0, a=2.0), N=4))
    assert abs(f1 - f2) < 1e-12 * abs(f1)


def test_amm_matches_closed_form_for_m2():
    h, k = 0.01, 2.3
    s = assemble(2, Parity.even, k, Geometry(h, 2.0), N=8)
    lam = first_roots("N", 2, h, 1)[0].lam
    assert abs(s.A_mm / _amm_closed_form(2, k, h, 2.0, lam) - 1) < 0.15
