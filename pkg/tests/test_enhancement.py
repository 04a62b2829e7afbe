import math

import numpy as np
import pytest

from annular_resonance.annulus_modes import Geometry, Parity, first_roots
from annular_resonance.enhancement import (
    Excitation,
    SingularForcingError,
    SourceVector,
    build_source,
    enhancement_scan,
    excited_momenta,
    field_in_gap,
    jacobi_anger_order,
    solve_excitation,
    solve_forced,
)
from annular_resonance.enhancement import _half_field, _total_field
from annular_resonance.system_assembly import assemble

GEOM = Geometry(0.02, 2.0)


def test_excitation_validation():
    with pytest.raises(ValueError):
        Excitation.oblique(1.0, 0.6, 0.6)
    with pytest.raises(ValueError):
        Excitation.dipole(1.0, 0.0)


def test_momenta_and_jacobi_anger_order():
    assert excited_momenta(Excitation.normal(2.0), 0.01) == [-1, 1]
    assert excited_momenta(Excitation.dipole(2.0, 1.0), 0.01) == [0]
    assert jacobi_anger_order(3.0, 0.6, 0.01) == 10
    assert len(excited_momenta(Excitation.oblique(3.0, 0.6, 0.8), 0.01)) == 21


def test_plane_wave_does_not_drive_m0():
    src = build_source(Excitation.normal(3.1), 0, "even", GEOM, N=4)
    assert src.is_zero()


def test_dipole_does_not_drive_m_nonzero():
    src = build_source(Excitation.dipole(3.1, 1.0), 2, "even", GEOM, N=4)
    assert src.is_zero()
    assert not build_source(Excitation.dipole(3.1, 1.0), 0, "even", GEOM, N=4).is_zero()


@pytest.mark.parametrize("h", [0.02, 0.005])
def test_resonant_drive_amplitude(h):
    geom = Geometry(h, 2.0)
    k = 3.2
    sys = assemble(1, Parity.even, k, geom, N=4)
    src = build_source(Excitation.normal(k), 1, Parity.even, geom, N=4, system=sys)
    lam = first_roots("N", 1, h, 1)[0].lam
    w0 = sys.rho0 * lam**0.25
    ratio = abs(src.a) / (abs(w0) * lam**0.75)
    assert ratio == pytest.approx(k / 2 * math.sqrt(math.pi * h / 2), rel=2 * h)


def test_forced_solution_is_linear():
    sys = assemble(1, Parity.odd, 3.0, GEOM, N=4)
    src = build_source(Excitation.normal(3.0), 1, Parity.odd, GEOM, N=4, system=sys)
    d1, c1 = solve_forced(sys, src)
    doubled = SourceVector(src.m, src.parity, src.factor, 2 * src.a, 2 * src.b, 2 * src.S)
    d2, c2 = solve_forced(sys, doubled)
    assert d2 == pytest.approx(2 * d1) and np.allclose(c2, 2 * c1)


def test_singular_forcing_raises():
    sys = assemble(1, Parity.even, 3.0, GEOM, N=4)
    sys.D_m = sys.A_mm + sys.R_m @ np.linalg.solve(np.eye(len(sys.C_m)) - sys.B_m, sys.C_m)
    src = build_source(Excitation.normal(3.0), 1, Parity.even, GEOM, N=4, system=sys)
    with pytest.raises(SingularForcingError):
        solve_forced(sys, src)


def test_mirror_rule_matches_direct_extension():
    sols = solve_excitation(Excitation.oblique(2.7, 0.6, 0.8), GEOM, N=4)
    r = np.array([1.004, 1.011, 1.017])
    th = np.array([0.3, 1.9, 4.0])
    x3 = np.array([-0.7, -0.2, -0.95])
    E, H = _total_field(sols, GEOM, r, th, x3)
    Ed = sum(_half_field(s, r, th, x3)[0] for s in sols)
    Hd = sum(_half_field(s, r, th, x3)[1] for s in sols)
    assert np.allclose(E, Ed, rtol=1e-10, atol=1e-12 * np.max(np.abs(E)))
    assert np.allclose(H, Hd, rtol=1e-10, atol=1e-12 * np.max(np.abs(H)))


def test_field_in_gap_checks_domain():
    sols = solve_excitation(Excitation.normal(3.0), GEOM, N=4)
    sample = field_in_gap(sols, GEOM, (1.01, 0.0, 0.3))
    assert sample.E.shape == (3,) and np.all(np.isfinite(sample.H))
    with pytest.raises(ValueError):
        field_in_gap(sols, GEOM, (1.5, 0.0, 0.0))


def test_scan_rejects_unsorted_h_list():
    with pytest.raises(ValueError):
        enhancement_scan("normal_plane", {"m": 1}, [0.01, 0.02, 0.005], GEOM)
