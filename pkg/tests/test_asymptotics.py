import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tipbeam import asymptotics as asy, fem, laws, spectral
from tipbeam.model import BeamState, DimensionError


@pytest.fixture(scope="module")
def setting(exceptional):
    mode = spectral.nodal_mode(1, exceptional)
    disc = fem.assemble(exceptional, 16)
    phi = asy.nodal_interpolant(mode, disc)
    modes = spectral.find_modes("A", exceptional, 4) + spectral.find_modes("B", exceptional, 4)
    shapes = [fem.interpolate(lambda x, m=m: spectral.mode_eval(m, x), lambda x, m=m: spectral.mode_eval(m, x, 1), disc)
              for m in modes]
    return exceptional, mode, disc, phi, np.array(shapes)


def _state(setting, cu, cv):
    _, _, disc, _, shapes = setting
    return disc.state(np.asarray(cu) @ shapes, np.asarray(cv) @ shapes)


coeffs = st.lists(st.floats(-2, 2), min_size=8, max_size=8)


def _energy_inner(params, disc, y, z):
    Mt = disc.mass(z.qdot)
    return y.q @ disc.stiffness(z.q) + y.qdot @ Mt


def test_projection_of_zero_and_of_the_mode(setting):
    params, mode, disc, phi, _ = setting
    z = asy.project_omega(BeamState.zero(disc.nodes), params, mode)
    assert np.all(z.q == 0) and np.all(z.qdot == 0)
    y = asy.project_omega(disc.state(phi, 0 * phi), params, mode)
    assert np.allclose(y.q, phi, rtol=0, atol=1e-13) and np.all(y.qdot == 0)
    y = asy.project_omega(disc.state(0 * phi, 3 * phi), params, mode)
    assert np.allclose(y.qdot, 3 * phi, rtol=0, atol=1e-12) and np.allclose(y.q, 0, atol=1e-15)


@settings(max_examples=40, deadline=None)
@given(coeffs, coeffs)
def test_projection_is_idempotent_and_lands_in_the_plane(setting, cu, cv):
    params, mode, disc, phi, _ = setting
    y = _state(setting, cu, cv)
    p1 = asy.project_omega(y, params, mode)
    p2 = asy.project_omega(p1, params, mode)
    scale = 1 + np.max(np.abs(p1.q)) + np.max(np.abs(p1.qdot))
    assert np.allclose(p2.q, p1.q, atol=1e-12 * scale) and np.allclose(p2.qdot, p1.qdot, atol=1e-12 * scale)
    for vec in (p1.q, p1.qdot):
        c = vec @ phi / (phi @ phi)
        assert np.allclose(vec, c * phi, atol=1e-12 * scale)
        assert vec[disc.tip_value_index] == 0.0


@settings(max_examples=40, deadline=None)
@given(coeffs, coeffs, coeffs, coeffs)
def test_projection_is_self_adjoint_in_the_energy_product(setting, a, b, c, d):
    params, mode, disc, _, _ = setting
    y, z = _state(setting, a, b), _state(setting, c, d)
    Py, Pz = asy.project_omega(y, params, mode), asy.project_omega(z, params, mode)
    lhs, rhs = _energy_inner(params, disc, Py, z), _energy_inner(params, disc, y, Pz)
    size = math.sqrt(_energy_inner(params, disc, y, y) * _energy_inner(params, disc, z, z))
    assert abs(lhs - rhs) <= 1e-11 * (1 + size)


def test_projection_requires_an_exceptional_inertia(unit):
    mode = spectral.nodal_mode(1, unit.with_(J=spectral.j_exceptional(1, unit)))
    disc = fem.assemble(unit, 8)
    with pytest.raises(asy.NotExceptionalError):
        asy.project_omega(BeamState.zero(disc.nodes), unit, mode)
    with pytest.raises(asy.NotExceptionalError):
        asy.predict_periodic(BeamState.zero(disc.nodes), unit, 1)
    generic = spectral.find_modes("B", unit, 1)[0]
    with pytest.raises(asy.NotExceptionalError):
        asy.project_omega(BeamState.zero(disc.nodes), unit, generic)


def test_projection_rejects_a_foreign_mesh(setting):
    params, mode, _, _, _ = setting
    nodes = np.array([0.0, 0.3, 1.0])
    with pytest.raises(DimensionError):
        asy.project_omega(BeamState.zero(nodes), params, mode)


@pytest.mark.parametrize("n, tol", [(512, 1e-11), (64, 1e-7)])
def test_orbit_at_time_zero_matches_the_projection(exceptional, n, tol):
    mode = spectral.nodal_mode(1, exceptional)
    disc = fem.assemble(exceptional, n)
    ua = fem.interpolate(lambda x: spectral.mode_eval(spectral.find_modes("A", exceptional, 1)[0], x),
                         lambda x: spectral.mode_eval(spectral.find_modes("A", exceptional, 1)[0], x, 1), disc)
    phi = asy.nodal_interpolant(mode, disc)
    y0 = disc.state(ua + 0.4 * phi, 0.7 * phi - ua)
    orbit = asy.predict_periodic(y0, exceptional, 1)
    proj = asy.project_omega(y0, exceptional, mode)
    start = asy.orbit_state(orbit, 0.0, disc)
    scale = np.max(np.abs(proj.q)) + np.max(np.abs(proj.qdot))
    assert np.max(np.abs(start.q - proj.q)) < tol * scale
    assert np.max(np.abs(start.qdot - proj.qdot)) < tol * scale


@settings(max_examples=20, deadline=None)
@given(coeffs, coeffs)
def test_prediction_depends_only_on_the_projection(setting, cu, cv):
    params, mode, _, _, _ = setting
    y = _state(setting, cu, cv)
    o1 = asy.predict_periodic(y, params, 1)
    o2 = asy.predict_periodic(asy.project_omega(y, params, mode), params, 1)
    size = 1 + abs(o1.a) + abs(o1.b)
    assert abs(o1.a - o2.a) < 1e-5 * size and abs(o1.b - o2.b) < 1e-5 * size


def test_evaluated_orbit_is_periodic_and_pinned_at_the_tip(setting):
    params, mode, *_ = setting
    orbit = asy.PeriodicOrbit(1, mode, 0.3, -0.8, mode.omega)
    x = np.linspace(0, params.L, 50)
    t = 0.37
    assert np.allclose(asy.eval_periodic(orbit, t + orbit.period, x), asy.eval_periodic(orbit, t, x), atol=1e-12)
    assert abs(asy.eval_periodic(orbit, t, params.L)) < 1e-12
    assert abs(asy.eval_periodic(orbit, t, 0.0)) < 1e-15
    assert orbit.amplitude(0.0) == 0.3 and orbit.amplitude_rate(0.0) == pytest.approx(-0.8 * mode.omega)
    with pytest.raises(ValueError):
        asy.PeriodicOrbit(1, mode, 0.3, 0.1, 2 * mode.omega)


@pytest.fixture(scope="module")
def orbit_run(exceptional):
    mode = spectral.nodal_mode(1, exceptional)
    disc = fem.assemble(exceptional, 16)
    phi = asy.nodal_interpolant(mode, disc)
    lawset = laws.make_laws()
    period = asy.slowest_period(exceptional)
    traj = fem.simulate(disc, lawset, disc.state(0.5 * phi, 0.0 * phi), 2e-3, 21 * period, stride=5)
    return exceptional, lawset, traj, asy.predict_periodic(traj.initial_state, exceptional, 1)


def test_orbit_error_of_the_pure_mode_is_small(orbit_run):
    params, _, traj, orbit = orbit_run
    # early window: the scheme's phase lag grows linearly in time
    assert asy.orbit_error(traj, orbit, (0.0, 2 * orbit.period)) < 2e-3
    assert asy.orbit_error(traj, orbit, (0.0, traj.T)) < 5e-2


def test_orbit_error_detects_a_wrong_phase(orbit_run):
    params, _, traj, orbit = orbit_run
    wrong = asy.PeriodicOrbit(1, orbit.mode, orbit.a, orbit.b + 0.1 * abs(orbit.a), orbit.omega)
    assert asy.orbit_error(traj, wrong, (0.0, traj.T)) >= 0.05


def test_orbit_error_window_and_degenerate_cases(orbit_run):
    params, _, traj, orbit = orbit_run
    with pytest.raises(ValueError):
        asy.orbit_error(traj, orbit, (traj.T + 1, traj.T + 2))
    with pytest.raises(ValueError):
        asy.orbit_error(traj, orbit, (1.0, 1.0))
    still = asy.PeriodicOrbit(1, orbit.mode, 0.0, 0.0, orbit.omega)
    assert asy.orbit_error(traj, still, (0.0, traj.T)) == math.inf


def test_pure_nodal_mode_is_classified_periodic(orbit_run):
    params, lawset, traj, orbit = orbit_run
    report = asy.classify_limit(traj, params, lawset)
    assert report.classification == "periodic"
    assert report.orbit.a == pytest.approx(0.5, rel=1e-6)
    assert report.energy_balance_defect < 1e-10
    assert report.as_dict()["orbit"]["ell"] == 1


def test_zero_trajectory_decays(unit):
    disc = fem.assemble(unit, 4)
    lawset = laws.make_laws()
    period = asy.slowest_period(unit)
    traj = fem.simulate(disc, lawset, BeamState.zero(disc.nodes), 0.05, 20 * period, stride=10)
    assert asy.classify_limit(traj, unit, lawset).classification == "decayed"


def test_short_horizons_are_refused(unit):
    disc = fem.assemble(unit, 4)
    traj = fem.simulate(disc, laws.make_laws(), BeamState.zero(disc.nodes), 0.05, 1.0)
    with pytest.raises(asy.HorizonTooShort):
        asy.classify_limit(traj, unit, laws.make_laws())


def test_undamped_generic_beam_is_undetermined(unit):
    disc = fem.assemble(unit, 8)
    free = laws.make_laws("zero", "zero")
    q = fem.interpolate(lambda x: x**2, lambda x: 2 * x, disc)
    traj = fem.simulate(disc, free, disc.state(q, 0 * q), 5e-3, 20 * asy.slowest_period(unit), stride=20)
    report = asy.classify_limit(traj, unit, free)
    assert report.classification == "undetermined" and report.orbit is None


def test_report_validation():
    with pytest.raises(ValueError):
        asy.LimitReport("spiral", 0.0, None, math.nan, 0.0)
    with pytest.raises(ValueError):
        asy.LimitReport("periodic", 1.0, None, 0.0, 0.0)
