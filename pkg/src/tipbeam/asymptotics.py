"""Long-time limits of the damped beam: decay to rest or a nodal-mode orbit.

For generic rotary inertia every trajectory loses all its energy.  When J
equals one of the exceptional values J_ell, the B-mode with a node at the
tip is invisible to the controller, and the trajectory settles onto the
oscillation of that mode carried by the projection of the initial state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math
from typing import Optional

import numpy as np

from . import fem, spectral
from .model import BeamParams, BeamState, DimensionError, NonlinearLaws
from .quadrature import QuadratureGrid

CLASSIFICATIONS = ("decayed", "periodic", "undetermined")

#: minimum horizon, in periods of the slowest A-mode
MIN_PERIODS = 20


class NotExceptionalError(ValueError):
    """J is not an exceptional inertia for the requested ell."""


class HorizonTooShort(ValueError):
    """Trajectory is too short to judge its long-time behaviour."""


@dataclass(frozen=True)
class PeriodicOrbit:
    """u(t, x) = (a cos wt + b sin wt) u_nodal(x)."""

    ell: int
    mode: spectral.Mode
    a: float
    b: float
    omega: float

    def __post_init__(self):
        if abs(self.omega - self.mode.mu_abs) > 1e-10 * self.mode.mu_abs:
            raise ValueError("orbit frequency must equal the nodal mode frequency")

    @property
    def period(self) -> float:
        return 2 * math.pi / self.omega

    def amplitude(self, t):
        t = np.asarray(t, dtype=float)
        return self.a * np.cos(self.omega * t) + self.b * np.sin(self.omega * t)

    def amplitude_rate(self, t):
        t = np.asarray(t, dtype=float)
        w = self.omega
        return -self.a * w * np.sin(w * t) + self.b * w * np.cos(w * t)

    def tip_slope_rate(self, t):
        """Predicted xi(t)/J."""
        return self.amplitude_rate(t) * self.mode.duL

    def as_dict(self) -> dict:
        return {"ell": self.ell, "a": self.a, "b": self.b, "omega": self.omega,
                "p": self.mode.p, "duL": self.mode.duL}


@dataclass(frozen=True)
class Thresholds:
    decay: float = 1e-2
    slope: float = 1e-2
    orbit: float = 5e-2
    orbit_periods: float = 5.0


@dataclass(frozen=True)
class LimitReport:
    classification: str
    nu_estimate: float
    orbit: Optional[PeriodicOrbit]
    orbit_error: float
    energy_balance_defect: float
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.classification not in CLASSIFICATIONS:
            raise ValueError(f"unknown classification {self.classification!r}")
        if self.classification == "periodic" and self.orbit is None:
            raise ValueError("a periodic classification needs an orbit")

    def as_dict(self) -> dict:
        return {
            "classification": self.classification,
            "nu_estimate": self.nu_estimate,
            "orbit": None if self.orbit is None else self.orbit.as_dict(),
            "orbit_error": self.orbit_error,
            "energy_balance_defect": self.energy_balance_defect,
            "details": self.details,
        }


def _require_exceptional(params: BeamParams, ell: int, rel_tol: float = 1e-10) -> spectral.Mode:
    try:
        return spectral.nodal_mode(ell, params, rel_tol=rel_tol)
    except spectral.ExceptionalMismatch as exc:
        raise NotExceptionalError(str(exc)) from exc


def _ell_of(mode: spectral.Mode, params: BeamParams) -> int:
    ell = round(mode.p * params.L / math.pi)
    if not mode.nodal or ell < 1:
        raise NotExceptionalError("mode has no node at the tip")
    return ell


def _uniform_operator(nodes, params: BeamParams, tip_terms: bool = True) -> fem.DiscreteOperator:
    n = len(nodes) - 1
    disc = fem.assemble(params, n, tip_terms=tip_terms)
    if not np.allclose(disc.nodes, nodes, rtol=0, atol=1e-12 * params.L):
        raise DimensionError("state mesh is not the uniform mesh on [0, L]")
    return disc


def nodal_interpolant(mode: spectral.Mode, disc: fem.DiscreteOperator) -> np.ndarray:
    """Hermite DOFs of the nodal mode; the tip value is exactly zero."""
    phi = fem.interpolate(lambda x: spectral.mode_eval(mode, x, 0),
                          lambda x: spectral.mode_eval(mode, x, 1), disc)
    phi[disc.tip_value_index] = 0.0
    return phi


def project_omega(y0: BeamState, params: BeamParams, mode: spectral.Mode) -> BeamState:
    """Orthogonal projection, in the energy inner product, onto the nodal-mode plane.

    The plane is spanned by [phi, 0] and [0, phi] where phi interpolates the
    nodal mode on the mesh of `y0`.  Because phi vanishes at the tip, the
    payload mass drops out and the coefficients are

        a = <u0'', phi''> / ||phi''||^2,
        c = (rho <v0, phi> + J v0'(L) phi'(L)) / (rho ||phi||^2 + J phi'(L)^2).

    For the exact mode these reduce to Lambda <u0'', u''> and
    w^2 (rho <v0, u> + xi0 u'(L)) by the normalization of the mode.
    """
    ell = _ell_of(mode, params)
    _require_exceptional(params, ell)
    bare = _uniform_operator(y0.nodes, params, tip_terms=False)
    phi = nodal_interpolant(mode, bare)
    Mphi = bare.mass(phi)
    Mphi[bare.tip_slope_index] += params.J * phi[bare.tip_slope_index]
    a = fem.bending_inner(bare, y0.q, phi) / fem.bending_inner(bare, phi, phi)
    c = float(y0.qdot @ Mphi) / float(phi @ Mphi)
    return BeamState(y0.nodes, a * phi, c * phi)


def _grid_for(nodes, p: float, order: int = 16) -> QuadratureGrid:
    L = nodes[-1]
    panels = QuadratureGrid.for_wavenumber(L, p, order).breaks
    subdivide = max(1, math.ceil((len(panels) - 1) / (len(nodes) - 1)))
    return QuadratureGrid.on_mesh(nodes, order, subdivide)


def projection_coefficients(y0: BeamState, params: BeamParams, mode: spectral.Mode):
    """Continuum coefficients (alpha, beta) of the nodal-mode projection.

    alpha = Lambda <u0'', u''> and beta = rho <v0, u> + xi0 u'(L), with
    integrals over a Gauss grid aligned with the mesh of `y0`.
    """
    g = _grid_for(y0.nodes, mode.p)
    alpha = params.Lambda * g.integrate(y0.u(g.x, 2) * spectral.mode_eval(mode, g.x, 2))
    beta = params.rho * g.integrate(y0.v(g.x) * spectral.mode_eval(mode, g.x, 0))
    beta += y0.xi(params) * mode.duL
    return float(alpha), float(beta)


def predict_periodic(y0: BeamState, params: BeamParams, ell: int) -> PeriodicOrbit:
    """Periodic limit reached from `y0` when J = J_ell.

    The orbit starts at the projection of `y0`: displacement alpha u and
    velocity w^2 beta u, so a = alpha and b = w beta.
    """
    if abs(y0.L - params.L) > 1e-12 * params.L:
        raise DimensionError(f"state mesh spans [0, {y0.L}] but L = {params.L}")
    mode = _require_exceptional(params, ell)
    alpha, beta = projection_coefficients(y0, params, mode)
    return PeriodicOrbit(ell, mode, alpha, mode.omega * beta, mode.omega)


def eval_periodic(orbit: PeriodicOrbit, t, x):
    return orbit.amplitude(t) * spectral.mode_eval(orbit.mode, x, 0)


def orbit_state(orbit: PeriodicOrbit, t: float, disc: fem.DiscreteOperator) -> BeamState:
    """Interpolated orbit state at time t on the mesh of `disc`."""
    phi = nodal_interpolant(orbit.mode, disc)
    return disc.state(float(orbit.amplitude(t)) * phi, float(orbit.amplitude_rate(t)) * phi)


def _energy_norm_sq(disc: fem.DiscreteOperator, q, v) -> float:
    """Squared energy norm, equal to (q.K.q + v.M.v) / 2."""
    return fem.bending_energy(disc, q) + 0.5 * float(v @ disc.mass(v))


def orbit_error(traj: fem.TrajectoryRecord, orbit: PeriodicOrbit, window) -> float:
    """Relative distance between a trajectory and an orbit over a time window.

    The larger of two relative L2-in-time errors: the tip slope rate against
    the predicted xi/J, and the energy norm of the snapshot states against
    the interpolated orbit states.
    """
    t0, t1 = map(float, window)
    mask = (traj.times >= t0) & (traj.times <= t1)
    if not t1 > t0 or not np.any(mask):
        raise ValueError(f"window [{t0}, {t1}] holds no samples")
    t = traj.times[mask]
    pred = orbit.tip_slope_rate(t)
    err_channel = _relative(np.sum((traj.tip_slope_rates[mask] - pred) ** 2), np.sum(pred**2))

    smask = (traj.snapshot_times >= t0) & (traj.snapshot_times <= t1)
    if not np.any(smask):
        return err_channel
    disc = _uniform_operator(traj.nodes, traj.params)
    phi = nodal_interpolant(orbit.mode, disc)
    num = den = 0.0
    for i in np.flatnonzero(smask):
        ts = traj.snapshot_times[i]
        q_orb = float(orbit.amplitude(ts)) * phi
        v_orb = float(orbit.amplitude_rate(ts)) * phi
        num += _energy_norm_sq(disc, traj.snapshots_q[i] - q_orb, traj.snapshots_v[i] - v_orb)
        den += _energy_norm_sq(disc, q_orb, v_orb)
    return max(err_channel, _relative(num, den))


def _relative(num_sq: float, den_sq: float) -> float:
    if den_sq == 0.0:
        return 0.0 if num_sq == 0.0 else math.inf
    return math.sqrt(num_sq / den_sq)


def slowest_period(params: BeamParams) -> float:
    return 2 * math.pi / spectral.find_modes("A", params, 1)[0].omega


def classify_limit(traj: fem.TrajectoryRecord, params: BeamParams, laws: NonlinearLaws,
                   thresholds: Thresholds = Thresholds()) -> LimitReport:
    """Decide whether a trajectory decayed, locked onto the nodal orbit, or neither."""
    period = slowest_period(params)
    horizon = traj.T - traj.times[0]
    if horizon < MIN_PERIODS * period * (1 - 1e-9):
        raise HorizonTooShort(
            f"horizon {horizon:.4g} covers fewer than {MIN_PERIODS} periods ({period:.4g} each)")
    E = traj.energies
    V0 = float(E[0])
    defect = abs(V0 - float(E[-1]) - float(traj.dissipated[-1]))
    nu = traj.nu_estimate
    details = {"V0": V0, "slowest_period": period}

    def report(kind, orbit=None, err=math.nan):
        return LimitReport(kind, nu, orbit, err, defect, details)

    if V0 == 0.0 or nu < thresholds.decay * V0:
        return report("decayed")

    # compare the last tenth of the horizon with the tenth before it
    span = 0.1 * horizon
    last = traj.times >= traj.T - span
    prev = (traj.times >= traj.T - 2 * span) & ~last
    slope = abs(float(np.mean(E[last])) - float(np.mean(E[prev]))) / nu
    details["tail_relative_change"] = slope
    ell = spectral.is_exceptional(params.J, params)
    details["exceptional_ell"] = ell
    if slope >= thresholds.slope or ell is None:
        return report("undetermined")
    orbit = predict_periodic(traj.initial_state, params, ell)
    window = (traj.T - thresholds.orbit_periods * orbit.period, traj.T)
    err = orbit_error(traj, orbit, window)
    if err < thresholds.orbit:
        return report("periodic", orbit, err)
    return report("undetermined", orbit, err)
