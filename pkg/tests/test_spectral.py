import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tipbeam import spectral
from tipbeam.model import BeamParams
from tipbeam.quadrature import QuadratureGrid


def det_B(p, P):
    """Direct 2x2 determinant of the boundary system of B, and the size of its products (oracle)."""
    pL = p * P.L
    ch, sh, c, s = math.cosh(pL), math.sinh(pL), math.cos(pL), math.sin(pL)
    mu2 = -P.Lambda * p**4 / P.rho
    left = (sh - s) * (P.J * mu2 * (ch - c) + p * P.Lambda * (sh + s))
    right = (ch + c) * (P.J * mu2 * (sh + s) + p * P.Lambda * (ch + c))
    return left - right, abs(left) + abs(right)


def det_A(p, P):
    """Determinant of the A boundary rows built from the raw shape functions, and the size of its products (oracle)."""
    pL = p * P.L
    ch, sh, c, s = math.cosh(pL), math.sinh(pL), math.cos(pL), math.sin(pL)
    mu2 = -P.Lambda * p**4 / P.rho
    # phi1 = cosh - cos, phi2 = sinh - sin and their derivatives at L
    d = {
        1: ((ch - c), p * (sh + s), p**2 * (ch + c), p**3 * (sh - s)),
        2: ((sh - s), p * (ch - c), p**2 * (sh + s), p**3 * (ch + c)),
    }
    tip = [P.m * mu2 * d[k][0] - P.Lambda * d[k][3] for k in (1, 2)]
    rot = [P.J * mu2 * d[k][1] + P.Lambda * d[k][2] for k in (1, 2)]
    left, right = tip[0] * rot[1], tip[1] * rot[0]
    return left - right, abs(left) + abs(right)


params_st = st.builds(BeamParams, rho=st.floats(0.2, 5), Lambda=st.floats(0.2, 5), L=st.floats(0.3, 3),
                      m=st.floats(0.05, 5), J=st.floats(0.01, 3))


@settings(max_examples=60, deadline=None)
@given(params_st, st.floats(0.05, 8.0))
def test_char_functions_match_direct_determinants(P, pL):
    p = pL / P.L
    for which, oracle in (("B", det_B), ("A", det_A)):
        value, products = oracle(p, P)
        # both sides carry roundoff relative to the terms that cancel in them
        scale = max(math.fsum(abs(t) for t in spectral._char_terms(which, p, P)), products)
        assert abs(spectral.char(which, p, P) - value) <= 1e-12 * scale


def test_char_rejects_nonpositive_wavenumber(unit):
    with pytest.raises(ValueError):
        spectral.char_B(0.0, unit)
    with pytest.raises(ValueError):
        spectral.char_A(-1.0, unit)


def test_classic_limits(unit):
    # no payload: B reduces to the cantilever equation 1 + cosh cos = 0
    bare = unit.with_(J=1e-300, m=1e-300)
    roots = spectral.find_roots("B", bare, 3)
    assert roots == pytest.approx([1.8751040687119611, 4.6940911329741746, 7.8547574382376126], rel=1e-10)
    # A with negligible payload has the same spectrum
    assert spectral.find_roots("A", bare, 2) == pytest.approx(roots[:2], rel=1e-10)


def test_roots_agree_with_grid_scan_oracle(unit):
    roots = spectral.find_roots("B", unit, 4)
    grid = np.arange(1e-3, roots[-1] + 0.5, 1e-3)
    vals = np.array([spectral.char_B(p, unit) for p in grid])
    flips = grid[:-1][np.sign(vals[:-1]) != np.sign(vals[1:])]
    assert len(flips[flips < roots[-1] + 1e-3]) == 4
    assert np.all(np.abs(flips[:4] - roots) < 2e-3)


@pytest.mark.parametrize("which", ["A", "B"])
def test_modes_are_increasing_normalized_and_resolve_the_equation(unit, which):
    modes = spectral.find_modes(which, unit, 8)
    ps = [m.p for m in modes]
    assert all(a < b for a, b in zip(ps, ps[1:]))
    assert [m.index for m in modes] == list(range(1, 9))
    assert np.allclose(spectral.gram_matrix(modes, unit), np.eye(8), atol=1e-8)
    for m in modes:
        assert spectral.relative_char(which, m.p, unit) < 1e-12
        assert spectral.eigen_residual(m, unit) < 1e-8
        assert m.mu_abs == pytest.approx(math.sqrt(unit.Lambda / unit.rho) * m.p**2)
        assert abs(spectral.mode_eval(m, 0.0)) < 1e-14 and abs(spectral.mode_eval(m, 0.0, 1)) < 1e-14
        assert spectral.mode_eval(m, unit.L) == pytest.approx(m.uL, abs=1e-14)


@settings(max_examples=15, deadline=None)
@given(params_st)
def test_equipartition_and_orthonormality(P):
    for which in ("A", "B"):
        modes = spectral.find_modes(which, P, 4)
        G = spectral.gram_matrix(modes, P)
        assert np.allclose(G, np.eye(4), atol=1e-8)
        g = QuadratureGrid.for_wavenumber(P.L, modes[-1].p)
        for m in modes:
            bend = P.Lambda * g.integrate(spectral.mode_eval(m, g.x, 2) ** 2)
            assert bend == pytest.approx(1.0, abs=1e-9)


def test_high_modes_stay_accurate(unit):
    modes = spectral.find_modes("A", unit, 30)
    assert modes[-1].p * unit.L > 30  # past the rescaling threshold
    assert max(spectral.eigen_residual(m, unit) for m in modes) < 1e-8
    assert np.allclose(spectral.gram_matrix(modes[-5:], unit), np.eye(5), atol=1e-8)


def test_derivatives_match_finite_differences(unit):
    m = spectral.find_modes("B", unit, 3)[2]
    x, h = 0.37, 1e-4
    for d in (1, 2, 3, 4):
        fd = (spectral.mode_eval(m, x + h, d - 1) - spectral.mode_eval(m, x - h, d - 1)) / (2 * h)
        assert spectral.mode_eval(m, x, d) == pytest.approx(fd, rel=1e-6)


def test_shear_free_end_of_B_modes_by_finite_differences(unit):
    for m in spectral.find_modes("B", unit, 3):
        h, L = 1e-3, unit.L
        f = [spectral.mode_eval(m, L - k * h, 2) for k in range(5)]
        d3 = (25 * f[0] - 48 * f[1] + 36 * f[2] - 16 * f[3] + 3 * f[4]) / (12 * h)
        assert abs(d3) < 1e-6 * m.p**3


def test_mode_eval_rejects_points_outside(unit):
    m = spectral.find_modes("B", unit, 1)[0]
    with pytest.raises(ValueError):
        spectral.mode_eval(m, 1.1)
    with pytest.raises(ValueError):
        spectral.mode_eval(m, -0.1)


def test_build_mode_rejects_non_roots(unit):
    with pytest.raises(spectral.SpectralError):
        spectral.build_mode(1.0, unit, "B")


def test_perturbed_wavenumber_has_large_residual(unit):
    m = spectral.find_modes("A", unit, 1)[0]
    bad = spectral.build_mode(m.p * 1.01, unit, "A", check=False)
    assert spectral.eigen_residual(bad, unit) > 1e-3


def test_bracket_exhaustion_is_reported(unit):
    with pytest.raises(spectral.BracketExhaustion):
        spectral.find_roots("B", unit, 5, p_cap=6.0)


def test_exceptional_values():
    Lpi = BeamParams(L=math.pi)
    assert spectral.j_exceptional(1, Lpi) == pytest.approx(math.tanh(math.pi / 2), rel=1e-14)
    assert spectral.j_exceptional(2, Lpi) == pytest.approx(1 / math.tanh(math.pi) / 8, rel=1e-14)
    assert abs(spectral.j_exceptional(1, Lpi) - 0.9171523) < 1e-6
    assert abs(spectral.j_exceptional(2, Lpi) - 0.1254677) < 1e-6
    assert abs(spectral.j_exceptional(1, BeamParams()) - 0.0295794) < 1e-6
    with pytest.raises(ValueError):
        spectral.j_exceptional(0, Lpi)


@given(st.floats(0.1, 10), st.floats(0.1, 10))
def test_exceptional_set_decreases_to_its_asymptote(rho, L):
    P = BeamParams(rho=rho, L=L)
    table = spectral.exceptional_set(P, 10)
    J = table.values
    assert len(table) == 10 and np.all(J > 0) and np.all(np.diff(J) < 0)
    assert J[-1] / (rho * (L / (10 * math.pi)) ** 3) == pytest.approx(1.0, abs=1e-8)
    assert spectral.j_exceptional(60, P) == pytest.approx(rho * (L / (60 * math.pi)) ** 3, rel=1e-14)


def test_is_exceptional(unit):
    J1, J2 = spectral.j_exceptional(1, unit), spectral.j_exceptional(2, unit)
    assert spectral.is_exceptional(J1, unit) == 1
    assert spectral.is_exceptional(J2 * (1 + 1e-12), unit) == 2
    assert spectral.is_exceptional(1.0, unit) is None
    assert spectral.is_exceptional(0.5 * (J1 + J2), unit) is None
    with pytest.raises(ValueError):
        spectral.is_exceptional(J1, unit, rel_tol=0.5)


@pytest.mark.parametrize("ell", [1, 2, 3, 12])
def test_nodal_mode(unit, ell):
    P = unit.with_(J=spectral.j_exceptional(ell, unit))
    m = spectral.nodal_mode(ell, P)
    assert m.nodal and m.uL == 0.0 and spectral.mode_eval(m, P.L) == 0.0
    assert m.p == pytest.approx(ell * math.pi / P.L, rel=1e-15)
    assert spectral.eigen_residual(m, P) < 1e-8
    assert spectral.relative_char("A", m.p, P) < 1e-8
    assert spectral.relative_char("B", m.p, P) < 1e-8
    # the nodal mode is one of the B-modes, at the position its index states
    B = spectral.find_modes("B", P, m.index)
    assert B[-1].p == pytest.approx(m.p, rel=1e-10)
    assert spectral.gram_matrix([m, *B[:-1]], P) == pytest.approx(np.eye(m.index), abs=1e-8)


def test_nodal_mode_rejects_generic_J(unit):
    with pytest.raises(spectral.ExceptionalMismatch, match="nearest exceptional value is J_1"):
        spectral.nodal_mode(2, unit.with_(J=0.03))


def test_generic_B_modes_move_the_tip(unit):
    assert all(abs(m.uL) > 1e-3 for m in spectral.find_modes("B", unit, 8))


def test_residual_is_scale_invariant(unit):
    from dataclasses import replace
    m = spectral.find_modes("B", unit, 2)[1]
    assert spectral.eigen_residual(replace(m, norm=7 * m.norm), unit) == pytest.approx(
        spectral.eigen_residual(m, unit), rel=1e-6, abs=1e-15)
