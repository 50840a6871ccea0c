"""Hermite cubic discretization and implicit midpoint time stepping.

Unknowns are nodal values and slopes with the clamped node removed.  The
payload enters as point mass ``m`` on the tip-value DOF and rotary inertia
``J`` on the tip-slope DOF; the spring and damper act on the tip-value row.
Matrices are stored in symmetric upper banded form (3 superdiagonals).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
import math
from typing import Callable, Optional

import numpy as np
from scipy import linalg
from scipy.linalg import lapack

from .model import BeamParams, BeamState, DimensionError, NonlinearLaws, antiderivative_K1

BAND = 3

#: below this many DOFs a dense matrix-vector product beats the banded one
DENSE_LIMIT = 256


class NewtonFailure(RuntimeError):
    """Newton iteration of a midpoint step did not converge."""


class StepUnderflow(RuntimeError):
    """Step size was halved below the floor without a successful step."""


class EigenIterationError(RuntimeError):
    pass


def element_stiffness(Lambda: float, h: float) -> np.ndarray:
    return Lambda / h**3 * np.array([
        [12, 6 * h, -12, 6 * h],
        [6 * h, 4 * h**2, -6 * h, 2 * h**2],
        [-12, -6 * h, 12, -6 * h],
        [6 * h, 2 * h**2, -6 * h, 4 * h**2],
    ])


def element_mass(rho: float, h: float) -> np.ndarray:
    return rho * h / 420 * np.array([
        [156, 22 * h, 54, -13 * h],
        [22 * h, 4 * h**2, 13 * h, -3 * h**2],
        [54, 13 * h, 156, -22 * h],
        [-13 * h, -3 * h**2, -22 * h, 4 * h**2],
    ])


def band_matvec(ab: np.ndarray, x: np.ndarray) -> np.ndarray:
    """y = A x for symmetric A in upper banded storage."""
    u = ab.shape[0] - 1
    y = ab[u] * x
    for k in range(1, min(u, len(x) - 1) + 1):
        d = ab[u - k, k:]
        y[:-k] += d * x[k:]
        y[k:] += d * x[:-k]
    return y


def band_to_dense(ab: np.ndarray) -> np.ndarray:
    u, n = ab.shape[0] - 1, ab.shape[1]
    A = np.diag(ab[u].copy())
    for k in range(1, min(u, n - 1) + 1):
        A += np.diag(ab[u - k, k:], k) + np.diag(ab[u - k, k:], -k)
    return A


@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    params: BeamParams
    n_elements: int
    nodes: np.ndarray
    M_band: np.ndarray
    K_band: np.ndarray

    @property
    def ndof(self) -> int:
        return 2 * self.n_elements

    @property
    def tip_value_index(self) -> int:
        return self.ndof - 2

    @property
    def tip_slope_index(self) -> int:
        return self.ndof - 1

    @cached_property
    def M(self) -> np.ndarray:
        return band_to_dense(self.M_band)

    @cached_property
    def K(self) -> np.ndarray:
        return band_to_dense(self.K_band)

    @cached_property
    def _h(self):
        return np.diff(self.nodes)

    @cached_property
    def curvature_map(self) -> np.ndarray:
        """Dense map from DOFs to element-end curvatures (left ends, then right ends)."""
        n, h = self.n_elements, self._h
        C = np.zeros((2 * n, 2 * n + 2))
        for e in range(n):
            he = h[e]
            C[e, 2 * e:2 * e + 4] = [-6 / he**2, -4 / he, 6 / he**2, -2 / he]
            C[n + e, 2 * e:2 * e + 4] = [6 / he**2, 2 / he, -6 / he**2, 4 / he]
        return C[:, 2:]

    def mass(self, x):
        x = np.asarray(x, dtype=float)
        return self.M @ x if self.ndof <= DENSE_LIMIT else band_matvec(self.M_band, x)

    def stiffness(self, x):
        x = np.asarray(x, dtype=float)
        return self.K @ x if self.ndof <= DENSE_LIMIT else band_matvec(self.K_band, x)

    def state(self, q, qdot) -> BeamState:
        return BeamState(self.nodes, q, qdot)


def assemble(params: BeamParams, n_elements: int, tip_terms: bool = True) -> DiscreteOperator:
    """Consistent mass and stiffness on a uniform mesh, clamped DOFs removed."""
    if n_elements < 1:
        raise ValueError("n_elements must be at least 1")
    nodes = np.linspace(0.0, params.L, n_elements + 1)
    h = params.L / n_elements
    ke, me = element_stiffness(params.Lambda, h), element_mass(params.rho, h)
    nfull = 2 * (n_elements + 1)
    Mb = np.zeros((BAND + 1, nfull))
    Kb = np.zeros((BAND + 1, nfull))
    for e in range(n_elements):
        base = 2 * e
        for a in range(4):
            for b in range(a, 4):
                Mb[BAND + a - b, base + b] += me[a, b]
                Kb[BAND + a - b, base + b] += ke[a, b]
    Mb, Kb = Mb[:, 2:], Kb[:, 2:]
    if tip_terms:
        Mb[BAND, -2] += params.m
        Mb[BAND, -1] += params.J
    return DiscreteOperator(params, n_elements, nodes, Mb, Kb)


def interpolate(u: Callable, du: Callable, disc: DiscreteOperator, tol: float = 1e-12) -> np.ndarray:
    """Hermite interpolant: nodal values and slopes of u, clamped node dropped."""
    x = disc.nodes
    vals = np.array([float(u(xi)) for xi in x])
    slopes = np.array([float(du(xi)) for xi in x])
    scale = max(1.0, np.max(np.abs(vals)), np.max(np.abs(slopes)))
    if abs(vals[0]) > tol * scale or abs(slopes[0]) > tol * scale:
        raise ValueError(f"field violates the clamp: u(0) = {vals[0]:.3g}, u'(0) = {slopes[0]:.3g}")
    q = np.empty(disc.ndof)
    q[0::2], q[1::2] = vals[1:], slopes[1:]
    return q


def discrete_energy(disc: DiscreteOperator, q, qdot, laws: NonlinearLaws) -> float:
    q, qdot = np.asarray(q, dtype=float), np.asarray(qdot, dtype=float)
    if q.shape != (disc.ndof,) or qdot.shape != (disc.ndof,):
        raise DimensionError(f"expected DOF vectors of length {disc.ndof}")
    kinetic = 0.5 * qdot @ disc.mass(qdot)
    return float(kinetic + bending_energy(disc, q)) + antiderivative_K1(laws, q[disc.tip_value_index])


def bending_energy(disc: DiscreteOperator, q) -> float:
    """Equal to q.K.q / 2, evaluated from element curvatures.

    The curvature of a Hermite cubic is linear on each element, so the
    integral of its square is exact from the two end values.  Summing these
    avoids the cancellation that the banded quadratic form suffers on fine
    meshes, where K has entries of order 1/h^3.
    """
    C = disc.curvature_map
    k = C @ np.asarray(q, dtype=float)
    n = disc.n_elements
    k0, k1 = k[:n], k[n:]
    return float(0.5 * disc.params.Lambda * (disc._h / 3) @ (k0 * k0 + k0 * k1 + k1 * k1))


def bending_inner(disc: DiscreteOperator, q, r) -> float:
    """Equal to q.K.r, evaluated from element curvatures like :func:`bending_energy`."""
    C = disc.curvature_map
    k, c = C @ np.asarray(q, dtype=float), C @ np.asarray(r, dtype=float)
    n = disc.n_elements
    k0, k1, c0, c1 = k[:n], k[n:], c[:n], c[n:]
    return float(disc.params.Lambda * (disc._h / 6) @ (2 * k0 * c0 + k0 * c1 + k1 * c0 + 2 * k1 * c1))


# --- eigenvalues -------------------------------------------------------------

STALL_TOL = 1e-10

def fem_frequencies(disc: DiscreteOperator, count: int, tol: float = 1e-14,
                    max_iter: int = 500, return_vectors: bool = False):
    """Smallest `count` frequencies sqrt(lambda) of K x = lambda M x.

    Inverse iteration with M-orthogonal deflation against converged vectors;
    once an eigenvalue estimate settles to 1e-4 the iteration switches to a
    fixed shift at that estimate.  Iteration stops when the relative change
    of the Rayleigh quotient drops below `tol` or stops decreasing while
    already below ``STALL_TOL``.
    """
    n = disc.ndof
    if not 1 <= count <= n:
        raise ValueError(f"count must be in 1..{n}")
    chol = linalg.cholesky_banded(disc.K_band, lower=False)
    K_full = np.zeros((2 * BAND + 1, n))
    K_full[:BAND + 1] = disc.K_band
    for k in range(1, BAND + 1):
        K_full[BAND + k, :-k] = disc.K_band[BAND - k, k:]
    M_full = np.zeros_like(K_full)
    M_full[:BAND + 1] = disc.M_band
    for k in range(1, BAND + 1):
        M_full[BAND + k, :-k] = disc.M_band[BAND - k, k:]

    rng = np.random.default_rng(12345)
    vecs, lams = [], []

    def deflate(y):
        for v in vecs:
            y = y - (v @ disc.mass(y)) * v
        return y

    for k in range(count):
        x = deflate(rng.standard_normal(n))
        x /= math.sqrt(x @ disc.mass(x))
        lam_old, prev_change, shift = math.inf, math.inf, None
        for it in range(max_iter):
            rhs = disc.mass(x)
            if shift is None:
                y = linalg.cho_solve_banded((chol, False), rhs)
            else:
                y = linalg.solve_banded((BAND, BAND), K_full - shift * M_full, rhs)
            y = deflate(y)
            # x is M-normalized, so x.M.y = 1/(lam - shift) in the limit;
            # this avoids the cancellation in the quotient y.K.y
            lam = (shift or 0.0) + 1.0 / float(rhs @ y)
            y /= math.sqrt(y @ disc.mass(y))
            change = abs(lam - lam_old) / lam
            x, lam_old = y, lam
            # the Rayleigh quotient carries roundoff of order cond(K) * eps,
            # so a stalled change below STALL_TOL also counts as converged
            if change < tol or (change < STALL_TOL and change >= prev_change):
                break
            prev_change = change
            if shift is None and change < 1e-4:
                shift = lam
        else:
            raise EigenIterationError(f"mode {k + 1}: no convergence after {max_iter} iterations")
        vecs.append(x)
        # Rayleigh quotient with the bending energy taken from element
        # curvatures, which keeps full relative accuracy on fine meshes
        lams.append(2.0 * bending_energy(disc, x) / float(x @ disc.mass(x)))
    order = np.argsort(lams)
    freqs = np.sqrt(np.array(lams)[order])
    if return_vectors:
        return freqs, np.array(vecs)[order]
    return freqs


# --- time stepping -----------------------------------------------------------

@dataclass(frozen=True)
class NewtonOptions:
    tol: float = 1e-12
    max_iter: int = 25


class MidpointStepper:
    """Implicit midpoint rule for M a + K q + e_tip (k1(q_tip) + k2(v_tip)) = 0.

    With the midpoint velocity w = (q+ - q-)/dt the scheme reads

        S w = (2/dt) M v- - K q- - e_tip f(q-_tip + dt/2 w_tip, w_tip),
        S = (2/dt) M + (dt/2) K,

    so w = g - f * S^{-1} e_tip and only the scalar w_tip is unknown.  The
    Newton iteration on the coupled system therefore collapses to a scalar
    Newton on w_tip; S is factored once per step size.
    """

    def __init__(self, disc: DiscreteOperator, laws: NonlinearLaws, dt: float,
                 newton: NewtonOptions = NewtonOptions()):
        if not dt > 0:
            raise ValueError("dt must be positive")
        self.disc, self.laws, self.dt, self.newton = disc, laws, dt, newton
        S = (2.0 / dt) * disc.M_band + (dt / 2.0) * disc.K_band
        self._chol = linalg.cholesky_banded(S, lower=False, check_finite=False)
        e = np.zeros(disc.ndof)
        e[disc.tip_value_index] = 1.0
        self._w = self._solve(e)
        self.iterations = 0

    def _solve(self, b):
        x, info = lapack.dpbtrs(self._chol, b, lower=0)
        if info != 0:
            raise linalg.LinAlgError(f"banded solve failed with info={info}")
        return x

    def step(self, q, v):
        """Advance (q, v) by one step; returns (q+, v+, w_tip, iterations)."""
        disc, laws, dt = self.disc, self.laws, self.dt
        it = disc.tip_value_index
        g = self._solve((2.0 / dt) * disc.mass(v) - disc.stiffness(q))
        gt, wt, qt = g[it], self._w[it], q[it]
        z = v[it]
        for n_iter in range(self.newton.max_iter + 1):
            qbar = qt + 0.5 * dt * z
            f = laws.k1(qbar) + laws.k2(z)
            F = z - gt + wt * f
            scale = max(abs(gt), abs(z), abs(wt * f))
            if abs(F) <= self.newton.tol * scale or scale == 0.0:
                break
            dF = 1.0 + wt * (0.5 * dt * laws.dk1(qbar) + laws.dk2(z))
            if not (dF != 0 and math.isfinite(dF)):
                raise NewtonFailure("singular Newton derivative at the tip")
            dz = F / dF
            z -= dz
            if not math.isfinite(z):
                raise NewtonFailure("Newton iterate diverged")
            if abs(dz) <= 4 * np.finfo(float).eps * abs(z):
                break
        else:
            raise NewtonFailure(f"no convergence in {self.newton.max_iter} Newton iterations")
        self.iterations += n_iter
        f = laws.k1(qt + 0.5 * dt * z) + laws.k2(z)
        w = g - f * self._w
        return q + dt * w, 2.0 * w - v, w[it], n_iter


def step_midpoint(disc: DiscreteOperator, laws: NonlinearLaws, state: BeamState, dt: float,
                  newton: NewtonOptions = NewtonOptions()) -> BeamState:
    q, v, _, _ = MidpointStepper(disc, laws, dt, newton).step(np.array(state.q), np.array(state.qdot))
    return disc.state(q, v)


@dataclass(frozen=True, eq=False)
class TrajectoryRecord:
    """Time series of one simulation run.

    ``dissipations`` is -k2(v(L)) v(L) at each recorded state; ``dissipated``
    is the cumulative energy removed by the scheme, sum of dt*k2(w)*w over
    midpoint tip velocities w.
    """

    times: np.ndarray
    energies: np.ndarray
    dissipations: np.ndarray
    dissipated: np.ndarray
    tip_values: np.ndarray
    tip_velocities: np.ndarray
    tip_slope_rates: np.ndarray
    snapshot_times: np.ndarray
    snapshots_q: np.ndarray
    snapshots_v: np.ndarray
    nodes: np.ndarray
    params: BeamParams
    laws_name: str
    dt: float
    stats: dict = field(default_factory=dict)

    @property
    def T(self) -> float:
        return float(self.times[-1])

    @property
    def nu_estimate(self) -> float:
        """Mean energy over the final tenth of the horizon."""
        tail = self.times >= self.times[0] + 0.9 * (self.T - self.times[0])
        return float(np.mean(self.energies[tail]))

    def snapshot(self, i: int) -> BeamState:
        return BeamState(self.nodes, self.snapshots_q[i], self.snapshots_v[i])

    @property
    def initial_state(self) -> BeamState:
        return self.snapshot(0)


def simulate(disc: DiscreteOperator, laws: NonlinearLaws, initial: BeamState, dt: float, T: float,
             stride: int = 10, newton: NewtonOptions = NewtonOptions(),
             dt_floor: Optional[float] = None) -> TrajectoryRecord:
    """Integrate from `initial` over [0, T] with step dt.

    A step whose Newton iteration fails is retried as two half steps,
    recursively, down to ``dt_floor`` (default 1e-8 T).
    """
    if not dt > 0 or not T > 0:
        raise ValueError("dt and T must be positive")
    if initial.nodes.shape != disc.nodes.shape or not np.allclose(initial.nodes, disc.nodes):
        raise DimensionError("initial state lives on a different mesh")
    n_steps = int(math.ceil(T / dt - 1e-9))
    dt_floor = 1e-8 * T if dt_floor is None else dt_floor
    it = disc.tip_value_index
    steppers = {}

    def stepper(h):
        if h not in steppers:
            steppers[h] = MidpointStepper(disc, laws, h, newton)
        return steppers[h]

    stats = {"steps": 0, "rejected_steps": 0, "newton_iterations": 0, "max_newton_iterations": 0}

    def advance(q, v, h):
        """Returns (q, v, dissipated energy) over an interval of length h."""
        if h < dt_floor:
            raise StepUnderflow(f"step size {h:.3g} fell below floor {dt_floor:.3g}")
        try:
            q1, v1, wt, n_it = stepper(h).step(q, v)
        except NewtonFailure:
            stats["rejected_steps"] += 1
            qa, va, da = advance(q, v, h / 2)
            qb, vb, db = advance(qa, va, h / 2)
            return qb, vb, da + db
        stats["steps"] += 1
        stats["newton_iterations"] += n_it
        stats["max_newton_iterations"] = max(stats["max_newton_iterations"], n_it)
        return q1, v1, h * laws.k2(wt) * wt

    n_rec = n_steps + 1
    times = dt * np.arange(n_rec)
    energies, diss, cum = np.empty(n_rec), np.empty(n_rec), np.zeros(n_rec)
    uL, vL, vpL = np.empty(n_rec), np.empty(n_rec), np.empty(n_rec)
    snap_idx = list(range(0, n_rec, stride))
    if snap_idx[-1] != n_rec - 1:
        snap_idx.append(n_rec - 1)
    snaps_q = np.empty((len(snap_idx), disc.ndof))
    snaps_v = np.empty((len(snap_idx), disc.ndof))
    snap_pos = {k: j for j, k in enumerate(snap_idx)}

    q, v = np.array(initial.q), np.array(initial.qdot)
    for k in range(n_rec):
        if k > 0:
            q, v, d = advance(q, v, dt)
            cum[k] = cum[k - 1] + d
        energies[k] = discrete_energy(disc, q, v, laws)
        diss[k] = -laws.k2(v[it]) * v[it]
        uL[k], vL[k], vpL[k] = q[it], v[it], v[disc.tip_slope_index]
        if k in snap_pos:
            snaps_q[snap_pos[k]], snaps_v[snap_pos[k]] = q, v
    return TrajectoryRecord(times, energies, diss, cum, uL, vL, vpL, times[snap_idx],
                            snaps_q, snaps_v, disc.nodes.copy(), disc.params, laws.name, dt, stats)
