"""Acceptance checks shared by ``tipbeam verify`` and the test suite.

Each check returns a :class:`CheckResult` carrying the measured quantities
next to the thresholds they were compared with.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math
import os
from pathlib import Path
import tempfile
import time

import numpy as np
from scipy import optimize

from . import asymptotics as asy, fem, laws as catalogue, spectral
from .config import parse_config
from .model import BeamParams, BeamState, inner_H
from .quadrature import QuadratureGrid
from .runner import OUTPUT_ROOT_ENV, run

UNIT = BeamParams()


@dataclass
class CheckResult:
    number: int
    title: str
    passed: bool = False
    metrics: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        shown = ", ".join(f"{k}={_short(v)}" for k, v in self.metrics.items())
        return f"[{status}] criterion {self.number}: {self.title} ({shown}; {self.seconds:.1f}s)"

    def as_dict(self) -> dict:
        return {"number": self.number, "title": self.title, "passed": self.passed,
                "metrics": self.metrics, "seconds": self.seconds}


def _short(v):
    if isinstance(v, float):
        return f"{v:.3g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_short(x) for x in v) + "]"
    return str(v)


def _timed(number, title):
    def wrap(fn):
        def run_check() -> CheckResult:
            result = CheckResult(number, title)
            start = time.perf_counter()
            fn(result)
            result.seconds = time.perf_counter() - start
            if "runtime_limit_s" in result.metrics:
                within = result.seconds < result.metrics["runtime_limit_s"]
                result.metrics["runtime_ok"] = within
                result.passed = result.passed and within
            return result
        run_check.number = number
        run_check.title = title
        return run_check
    return wrap


def _shape(mode, disc):
    return fem.interpolate(lambda x: spectral.mode_eval(mode, x, 0),
                           lambda x: spectral.mode_eval(mode, x, 1), disc)


# --- spectral ---------------------------------------------------------------

@_timed(1, "spectral residuals and orthonormality")
def check_spectral_residuals(r: CheckResult):
    worst_res, worst_gram = 0.0, 0.0
    for which in ("B", "A"):
        modes = spectral.find_modes(which, UNIT, 6)
        worst_res = max(worst_res, max(spectral.eigen_residual(m, UNIT) for m in modes))
        G = spectral.gram_matrix(modes, UNIT)
        worst_gram = max(worst_gram, float(np.max(np.abs(G - np.eye(len(modes))))))
    r.metrics.update(max_residual=worst_res, max_gram_error=worst_gram, runtime_limit_s=5.0)
    r.passed = worst_res < 1e-8 and worst_gram < 1e-8


@_timed(2, "exceptional inertias")
def check_exceptional_set(r: CheckResult):
    worst = 0.0
    for L in (1.0, math.pi):
        p = BeamParams(L=L)
        for ell in range(1, 11):
            x = ell * math.pi
            hyp = math.tanh(x / 2) if ell % 2 else 1 / math.tanh(x / 2)
            expected = hyp * p.rho * (p.L / x) ** 3
            worst = max(worst, abs(spectral.j_exceptional(ell, p) - expected) / expected)
    p = BeamParams(L=math.pi)
    J1, J2 = spectral.j_exceptional(1, p), spectral.j_exceptional(2, p)
    r.metrics.update(max_rel_error=worst, J1=J1, J2=J2)
    r.passed = worst < 1e-12 and abs(J1 - 0.9171523) < 1e-6 and abs(J2 - 0.1254677) < 1e-6


@_timed(3, "nodal mode identities at J_1")
def check_nodal_mode(r: CheckResult):
    params = UNIT.with_(J=spectral.j_exceptional(1, UNIT))
    mode = spectral.nodal_mode(1, params)
    L = params.L
    h = 1e-3
    # fourth-order backward difference of u'' at the tip
    f = [float(spectral.mode_eval(mode, L - k * h, 2)) for k in range(5)]
    d3 = (25 * f[0] - 48 * f[1] + 36 * f[2] - 16 * f[3] + 3 * f[4]) / (12 * h)
    p = math.pi / L
    rel_A, rel_B = spectral.relative_char("A", p, params), spectral.relative_char("B", p, params)
    r.metrics.update(uL=abs(mode.uL), u3L_fd=abs(d3), rel_char_A=rel_A, rel_char_B=rel_B)
    r.passed = abs(mode.uL) < 1e-12 and abs(d3) < 1e-6 and rel_A < 1e-8 and rel_B < 1e-8


@_timed(4, "finite element frequencies against A-modes")
def check_fem_consistency(r: CheckResult):
    mu = np.array([m.mu_abs for m in spectral.find_modes("A", UNIT, 3)])
    errors = []
    for n in (16, 32, 64):
        f = fem.fem_frequencies(fem.assemble(UNIT, n), 3)
        errors.append(np.abs(f - mu) / mu)
    errors = np.array(errors)
    monotone = bool(np.all(errors[1:] < errors[:-1]))
    r.metrics.update(rel_error_64=errors[-1].tolist(), monotone=monotone)
    r.passed = bool(np.all(errors[-1] < 1e-4)) and monotone


# --- energy -------------------------------------------------------------------

def _tip_load_state(disc, amplitude):
    L = disc.params.L
    return fem.interpolate(lambda x: amplitude * x**2 * (3 * L - x) / (2 * L**3),
                           lambda x: amplitude * 3 * x * (2 * L - x) / (2 * L**3), disc)


def _step_defects(disc, laws, q, v, dt, steps):
    stepper = fem.MidpointStepper(disc, laws, dt)
    E0 = E = fem.discrete_energy(disc, q, v, laws)
    out = np.empty(steps)
    for k in range(steps):
        q, v, w, _ = stepper.step(q, v)
        E1 = fem.discrete_energy(disc, q, v, laws)
        out[k] = abs(E1 - E + dt * laws.k2(w) * w) / E0
        E = E1
    return out, q, v


@_timed(5, "energy behaviour of the midpoint rule")
def check_energy_dichotomy(r: CheckResult):
    disc = fem.assemble(UNIT, 32)
    q0 = _tip_load_state(disc, 0.1)
    A1 = spectral.find_modes("A", UNIT, 1)[0]
    v0 = 0.1 * _shape(A1, disc)

    free = catalogue.make_laws("zero", "zero")
    stepper = fem.MidpointStepper(disc, free, 1e-3)
    E0 = fem.discrete_energy(disc, q0, v0, free)
    q, v, drift = q0, v0, 0.0
    for _ in range(10_000):
        q, v, _, _ = stepper.step(q, v)
        drift = max(drift, abs(fem.discrete_energy(disc, q, v, free) - E0) / E0)

    linear = catalogue.make_laws("linear", "linear")
    defect_linear = float(np.max(_step_defects(disc, linear, q0, v0, 1e-3, 2000)[0]))

    cubic = catalogue.make_laws("linear_cubic", "linear")
    q_big = _tip_load_state(disc, 0.5)
    defects = [float(np.max(_step_defects(disc, cubic, q_big, 0 * q_big, dt, round(1.0 / dt))[0]))
               for dt in (4e-3, 2e-3, 1e-3)]
    ratios = [defects[0] / defects[1], defects[1] / defects[2]]
    r.metrics.update(drift_free=drift, defect_linear=defect_linear,
                     defects_cubic=defects, ratios=ratios)
    r.passed = drift < 1e-10 and defect_linear < 1e-12 and min(ratios) >= 8.0


# --- dichotomy ----------------------------------------------------------------

@_timed(6, "decay for generic J")
def check_generic_decay(r: CheckResult):
    laws = catalogue.make_laws("linear_cubic", "linear")
    disc = fem.assemble(UNIT, 64)
    A1 = spectral.find_modes("A", UNIT, 1)[0]
    T = 50 * 2 * math.pi / A1.omega
    traj = fem.simulate(disc, laws, disc.state(_shape(A1, disc), np.zeros(disc.ndof)), 1e-3, T,
                        stride=1000)
    E = traj.energies
    rise = float(np.max(np.diff(E))) / E[0]
    tail = traj.nu_estimate / E[0]
    r.metrics.update(max_rise=rise, tail_ratio=tail, runtime_limit_s=60.0)
    r.passed = rise <= 1e-8 and tail < 1e-2


def least_squares_orbit(y0: BeamState, params: BeamParams, mode) -> tuple:
    """(a, b) from a direct Gram solve onto span{[u, 0], [0, u]} in the energy inner product."""
    g = QuadratureGrid.on_mesh(y0.nodes, 16, 4)
    u = spectral.mode_eval(mode, g.x, 0)
    u2 = spectral.mode_eval(mode, g.x, 2)
    J, rho, Lam = params.J, params.rho, params.Lambda
    slope = float(spectral.mode_eval(mode, params.L, 1))
    G11 = 0.5 * Lam * g.integrate(u2 * u2)
    G22 = 0.5 * rho * g.integrate(u * u) + (J * slope) ** 2 / (2 * J)
    r1 = 0.5 * Lam * g.integrate(y0.u(g.x, 2) * u2)
    r2 = 0.5 * rho * g.integrate(y0.v(g.x) * u) + y0.xi(params) * (J * slope) / (2 * J)
    c_u, c_v = r1 / G11, r2 / G22
    return c_u, c_v / mode.omega


@_timed(7, "periodic limit for J = J_1")
def check_periodic_limit(r: CheckResult):
    params = UNIT.with_(J=spectral.j_exceptional(1, UNIT))
    laws = catalogue.make_laws("linear_cubic", "linear")
    disc = fem.assemble(params, 64)
    mode = spectral.nodal_mode(1, params)
    A1 = spectral.find_modes("A", params, 1)[0]
    ua = _shape(A1, disc)
    seed = disc.state(ua + 0.5 * _tip_load_state(disc, 1.0), 2.0 * ua)
    base = asy.project_omega(seed, params, mode)
    E_base = fem.discrete_energy(disc, base.q, base.qdot, laws)

    def share(s):
        # fraction of the perturbed energy carried by the perturbation
        return 1 - E_base / fem.discrete_energy(disc, base.q + s * ua, base.qdot, laws)

    scale = optimize.brentq(lambda s: share(s) - 0.2, 0.0, 10.0, xtol=1e-14)
    perturbed = disc.state(base.q + scale * ua, base.qdot)
    period = 2 * math.pi / mode.omega
    dt, T = 2.5e-4, 55 * period

    results = {}
    for name, y0 in (("projected", base), ("perturbed", perturbed)):
        orbit = asy.predict_periodic(y0, params, 1)
        a_ls, b_ls = least_squares_orbit(y0, params, mode)
        mismatch = max(abs(orbit.a - a_ls), abs(orbit.b - b_ls)) / max(abs(a_ls), abs(b_ls))
        traj = fem.simulate(disc, laws, y0, dt, T, stride=40)
        windows = [asy.orbit_error(traj, orbit, (k * period, (k + 5) * period)) for k in (10, 30, 50)]
        results[name] = (mismatch, windows)

    mis_p, win_p = results["projected"]
    mis_q, win_q = results["perturbed"]
    energy_share = 1 - E_base / fem.discrete_energy(disc, perturbed.q, perturbed.qdot, laws)
    r.metrics.update(orbit_error_projected=win_p[-1], windows_perturbed=win_q,
                     ab_vs_least_squares=max(mis_p, mis_q), perturbation_energy_share=energy_share)
    r.passed = (win_p[-1] < 1e-3 and win_q[0] > win_q[1] > win_q[2] and win_q[2] < 5e-2
                and max(mis_p, mis_q) < 1e-8)


def _random_smooth_state(rng, disc, modes):
    def field():
        c = rng.standard_normal(len(modes)) / np.arange(1, len(modes) + 1)
        return sum(ci * _shape(m, disc) for ci, m in zip(c, modes))
    return disc.state(field(), field())


@_timed(8, "projection laws")
def check_projection(r: CheckResult):
    params = UNIT.with_(J=spectral.j_exceptional(1, UNIT))
    disc = fem.assemble(params, 64)
    mode = spectral.nodal_mode(1, params)
    modes = spectral.find_modes("A", params, 4) + spectral.find_modes("B", params, 4)
    rng = np.random.default_rng(20240601)
    idem = sym = rng_err = 0.0
    for _ in range(20):
        y = _random_smooth_state(rng, disc, modes)
        z = _random_smooth_state(rng, disc, modes)
        Py, Pz = asy.project_omega(y, params, mode), asy.project_omega(z, params, mode)
        PPy = asy.project_omega(Py, params, mode)
        ny, nz = math.sqrt(inner_H(y, y, params)), math.sqrt(inner_H(z, z, params))
        d = disc.state(PPy.q - Py.q, PPy.qdot - Py.qdot)
        idem = max(idem, math.sqrt(inner_H(d, d, params)) / ny)
        sym = max(sym, abs(inner_H(Py, z, params) - inner_H(y, Pz, params)) / (ny * nz))
        rng_err = max(rng_err, abs(Py.tip_value) / ny, abs(Py.psi(params)) / ny)
    r.metrics.update(idempotence=idem, symmetry=sym, range=rng_err)
    r.passed = idem < 1e-10 and sym < 1e-10 and rng_err < 1e-10


DETERMINISM_CONFIG = """\
[beam]
J = 1.0
[laws]
spring = linear_cubic
damper = linear
[initial]
modal = A:1:1.0:0.0
[discretization]
n_elements = 16
dt = 4e-3
periods = 20
stride = 50
[output]
directory = {directory}
"""


@_timed(9, "deterministic simulate output")
def check_determinism(r: CheckResult):
    saved = os.environ.pop(OUTPUT_ROOT_ENV, None)
    try:
        with tempfile.TemporaryDirectory() as tmp:
            digests = []
            for name in ("first", "second"):
                cfg = parse_config(DETERMINISM_CONFIG.format(directory=Path(tmp) / name))
                manifest = run(cfg)
                digests.append(tuple((manifest.directory / manifest.files[k]).read_bytes()
                                     for k in ("timeseries", "snapshots")))
            identical = digests[0] == digests[1]
    finally:
        if saved is not None:
            os.environ[OUTPUT_ROOT_ENV] = saved
    r.metrics.update(identical=identical)
    r.passed = identical


CHECKS = (check_spectral_residuals, check_exceptional_set, check_nodal_mode, check_fem_consistency,
          check_energy_dichotomy, check_generic_decay, check_periodic_limit, check_projection,
          check_determinism)

SUITES = {
    "spectral": (1, 2, 3, 4),
    "energy": (5, 9),
    "dichotomy": (6, 7, 8),
    "all": tuple(range(1, 10)),
}


def run_suite(name: str, echo=None) -> list:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    results = []
    for check in CHECKS:
        if check.number in SUITES[name]:
            result = check()
            if echo:
                echo(result.line())
            results.append(result)
    return results
