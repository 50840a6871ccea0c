import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tipbeam import fem, laws
from tipbeam.model import (BeamParams, BeamState, DimensionError, NonlinearLaws, QuadratureError,
                           antiderivative_K1, dissipation_rate, energy_V, inner_H,
                           validate_laws, validate_params)


def test_params_validation_flags_each_bad_field():
    assert validate_params(BeamParams()).passed
    report = validate_params(BeamParams(m=0.0, rho=-1.0))
    assert not report
    assert {name for name, _, _ in report.violations} == {"m", "rho"}
    assert not validate_params(BeamParams(J=math.nan))


def test_laws_validation_accepts_catalogue_laws():
    assert validate_laws(laws.make_laws("linear_cubic", "linear"))
    assert validate_laws(laws.make_laws("cubic", "arctan", c=2.0, K_bound=0.1))


def test_laws_validation_reports_each_violation():
    bad = NonlinearLaws(k1=lambda z: -z, dk1=lambda z: -1.0,
                        k2=lambda z: 0.1 - z, dk2=lambda z: -1.0, sample_grid=(-1, 1, 201))
    names = {name for name, _, _ in validate_laws(bad).violations}
    assert names == {"spring potential nonnegative", "damper monotone",
                     "damper vanishes at zero", "damper quadratic bound"}


def test_zero_damper_fails_quadratic_bound():
    report = validate_laws(laws.make_laws("linear", "zero"))
    assert [v[0] for v in report.violations] == ["damper quadratic bound"]
    assert "damper quadratic bound" in report.describe()


def test_antiderivative_by_quadrature_matches_closed_form():
    free = NonlinearLaws(k1=lambda z: z + z**3, dk1=lambda z: 1 + 3 * z**2,
                         k2=lambda z: z, dk2=lambda z: 1.0)
    for z in (-1.5, 0.0, 0.3, 2.0):
        assert antiderivative_K1(free, z) == pytest.approx(z**2 / 2 + z**4 / 4, rel=1e-12, abs=0)


@pytest.mark.parametrize("k1", [
    lambda z: 1 / abs(z - 0.5) if z != 0.5 else math.inf,
    lambda z: math.sin(1 / z) / z if z else 0.0,
])
def test_antiderivative_reports_failed_quadrature(k1):
    bad = NonlinearLaws(k1=k1, dk1=lambda z: 0.0, k2=lambda z: z, dk2=lambda z: 1.0)
    with pytest.raises(QuadratureError):
        antiderivative_K1(bad, 1.0)


def test_state_shapes_and_read_only():
    nodes = np.linspace(0, 1, 5)
    with pytest.raises(DimensionError):
        BeamState(nodes, np.zeros(7), np.zeros(8))
    s = BeamState.zero(nodes)
    assert s.n_elements == 4
    with pytest.raises(ValueError):
        s.q[0] = 1.0


def test_energy_of_quadratic_displacement():
    # u = x^2 lies in the Hermite space: bending 2, tip potential K1(1) = 1/4
    p = BeamParams()
    disc = fem.assemble(p, 3)
    q = fem.interpolate(lambda x: x**2, lambda x: 2 * x, disc)
    spring = laws.make_laws("cubic", "linear")
    s = disc.state(q, np.zeros_like(q))
    assert energy_V(s, p, spring) == pytest.approx(2.25, abs=1e-10)
    assert fem.discrete_energy(disc, q, 0 * q, spring) == pytest.approx(2.25, abs=1e-10)


def test_energy_rejects_mismatched_length():
    s = BeamState.zero(np.linspace(0, 2, 3))
    with pytest.raises(DimensionError):
        energy_V(s, BeamParams(), laws.make_laws())


def test_dissipation_rate_uses_tip_velocity():
    disc = fem.assemble(BeamParams(), 2)
    v = np.zeros(disc.ndof)
    v[disc.tip_value_index] = 0.5
    s = disc.state(np.zeros(disc.ndof), v)
    assert dissipation_rate(s, BeamParams(), laws.make_laws("linear", "linear_cubic")) == pytest.approx(
        -(0.5 + 0.125) * 0.5)


vectors = st.lists(st.floats(-10, 10), min_size=8, max_size=8).map(np.array)


@settings(max_examples=40, deadline=None)
@given(vectors, vectors, vectors, vectors)
def test_inner_product_matches_discrete_quadratic_form(q1, v1, q2, v2):
    p = BeamParams(rho=2.0, Lambda=0.5, m=1.5, J=0.3)
    disc = fem.assemble(p, 4)
    s1, s2 = disc.state(q1, v1), disc.state(q2, v2)
    expected = 0.5 * (q1 @ disc.K @ q2 + v1 @ disc.M @ v2)
    scale = 1 + 0.5 * (abs(q1) @ abs(disc.K) @ abs(q2) + abs(v1) @ disc.M.__abs__() @ abs(v2))
    assert abs(inner_H(s1, s2, p) - expected) <= 1e-12 * scale
    assert inner_H(s1, s2, p) == pytest.approx(inner_H(s2, s1, p), rel=1e-12, abs=1e-12 * scale)


@settings(max_examples=30, deadline=None)
@given(vectors, vectors)
def test_energy_is_norm_plus_spring_potential(q, v):
    p = BeamParams()
    disc = fem.assemble(p, 4)
    s = disc.state(q, v)
    spring = laws.make_laws("linear_cubic", "linear")
    V = energy_V(s, p, spring)
    assert V == pytest.approx(inner_H(s, s, p) + antiderivative_K1(spring, s.tip_value), rel=1e-12, abs=1e-9)
    assert V >= 0
