"""Physical parameters, boundary feedback laws, states and energy functionals.

The beam occupies [0, L], is clamped at x=0 and carries a rigid payload of
mass ``m`` and rotary inertia ``J`` at x=L.  The payload is pushed by a spring
force ``-k1(u(L))`` and a damper force ``-k2(u_t(L))``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional
import warnings

import numpy as np
from scipy import integrate

from . import hermite
from .quadrature import QuadratureGrid

ScalarMap = Callable[[float], float]

#: slack used by every sampled admissibility check
CHECK_TOL = 1e-12


class DimensionError(ValueError):
    """State vectors do not match the mesh they are evaluated on."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature of the spring law did not converge."""


@dataclass(frozen=True)
class BeamParams:
    rho: float = 1.0
    Lambda: float = 1.0
    L: float = 1.0
    m: float = 1.0
    J: float = 1.0

    def with_(self, **changes) -> "BeamParams":
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return {"rho": self.rho, "Lambda": self.Lambda, "L": self.L, "m": self.m, "J": self.J}


@dataclass(frozen=True)
class NonlinearLaws:
    """Spring law k1 and damper law k2 together with their derivatives.

    ``K1`` is the antiderivative of k1 vanishing at 0; when omitted it is
    computed by adaptive quadrature.  ``K_bound`` and ``delta`` are the
    constants of the quadratic lower bound |k2(z)| >= K z^2 on (-delta, delta).
    """

    k1: ScalarMap
    dk1: ScalarMap
    k2: ScalarMap
    dk2: ScalarMap
    K1: Optional[ScalarMap] = None
    K_bound: float = 0.5
    delta: float = 0.5
    sample_grid: tuple = (-2.0, 2.0, 10_000)
    name: str = "custom"


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple = ()

    @property
    def passed(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.passed

    def describe(self) -> str:
        if self.passed:
            return "ok"
        return "; ".join(f"{name}: worst at {where!r} value {value:.6g}"
                         for name, where, value in self.violations)


@dataclass(frozen=True, eq=False)
class BeamState:
    """Hermite DOFs of displacement ``q`` and velocity ``qdot`` on a clamped mesh.

    ``nodes`` holds all node coordinates including x=0.  Both DOF vectors
    exclude the clamped node, so their length is ``2 * n_elements`` with the
    tip value and tip slope in the last two entries.
    """

    nodes: np.ndarray
    q: np.ndarray
    qdot: np.ndarray

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        q = np.array(self.q, dtype=float)
        qdot = np.array(self.qdot, dtype=float)
        n = 2 * (len(nodes) - 1)
        if len(nodes) < 2 or q.shape != (n,) or qdot.shape != (n,):
            raise DimensionError(
                f"mesh with {len(nodes)} nodes needs DOF vectors of length {n}, "
                f"got {q.shape} and {qdot.shape}")
        for arr in (nodes, q, qdot):
            arr.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "qdot", qdot)

    @classmethod
    def zero(cls, nodes) -> "BeamState":
        n = 2 * (len(nodes) - 1)
        return cls(nodes, np.zeros(n), np.zeros(n))

    @property
    def n_elements(self) -> int:
        return len(self.nodes) - 1

    @property
    def L(self) -> float:
        return float(self.nodes[-1])

    @property
    def tip_value(self) -> float:
        return float(self.q[-2])

    @property
    def tip_slope(self) -> float:
        return float(self.q[-1])

    @property
    def tip_velocity(self) -> float:
        return float(self.qdot[-2])

    @property
    def tip_slope_rate(self) -> float:
        return float(self.qdot[-1])

    def xi(self, params: BeamParams) -> float:
        return params.J * self.tip_slope_rate

    def psi(self, params: BeamParams) -> float:
        return params.m * self.tip_velocity

    def u(self, x, d=0):
        return hermite.evaluate(self.nodes, self.q, x, d)

    def v(self, x, d=0):
        return hermite.evaluate(self.nodes, self.qdot, x, d)

    def same_mesh(self, other: "BeamState") -> bool:
        return self.nodes.shape == other.nodes.shape and np.array_equal(self.nodes, other.nodes)


def _check(name, mask, points, values, report):
    if np.any(mask):
        i = int(np.argmax(np.where(mask, np.abs(values), -np.inf)))
        report.append((name, float(points[i]), float(values[i])))


def validate_params(p: BeamParams) -> ValidationReport:
    bad = [(name, name, float(value)) for name, value in p.as_dict().items()
           if not (np.isfinite(value) and value > 0)]
    return ValidationReport(tuple(bad))


def validate_laws(laws: NonlinearLaws) -> ValidationReport:
    lo, hi, count = laws.sample_grid
    if count < 1 or not laws.delta > 0:
        raise ValueError("sample grid must be nonempty and delta positive")
    z = np.linspace(lo, hi, int(count))
    out = []

    K1 = np.array([antiderivative_K1(laws, zi) for zi in z])
    _check("spring potential nonnegative", K1 < -CHECK_TOL, z, K1, out)

    dk2 = np.array([laws.dk2(zi) for zi in z])
    _check("damper monotone", dk2 < -CHECK_TOL, z, dk2, out)
    k2_zero = float(laws.k2(0.0))
    if abs(k2_zero) > CHECK_TOL:
        out.append(("damper vanishes at zero", 0.0, k2_zero))

    near = z[np.abs(z) < laws.delta]
    if near.size:
        k2 = np.array([laws.k2(zi) for zi in near])
        gap = np.abs(k2) - laws.K_bound * near**2
        _check("damper quadratic bound", gap < -CHECK_TOL, near, gap, out)
    return ValidationReport(tuple(out))


def antiderivative_K1(laws: NonlinearLaws, z: float) -> float:
    """Spring potential K1(z) = int_0^z k1(s) ds."""
    if laws.K1 is not None:
        return float(laws.K1(z))
    if z == 0:
        return 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        value, abserr, info, *rest = integrate.quad(laws.k1, 0.0, z, epsrel=1e-10, epsabs=0.0,
                                                    limit=200, full_output=True)
    if rest:
        raise QuadratureError(f"integral of k1 over [0, {z}] did not converge: {rest[0]}")
    if not np.isfinite(value):
        raise QuadratureError(f"integral of k1 over [0, {z}] is not finite")
    return float(value)


def _gauss_on_mesh(nodes, order):
    return QuadratureGrid.on_mesh(nodes, order)


def energy_V(s: BeamState, p: BeamParams, laws: NonlinearLaws, order: int = 4) -> float:
    """Total energy: bending + beam kinetic + payload kinetic + spring potential.

    Integrals use `order` Gauss points per element, which is exact for the
    cubic fields from order 4 upward.
    """
    if abs(s.L - p.L) > 1e-12 * p.L:
        raise DimensionError(f"state mesh spans [0, {s.L}] but L = {p.L}")
    g = _gauss_on_mesh(s.nodes, order)
    bending = 0.5 * p.Lambda * g.integrate(s.u(g.x, 2) ** 2)
    kinetic = 0.5 * p.rho * g.integrate(s.v(g.x) ** 2)
    tip = 0.5 * p.m * s.tip_velocity**2 + 0.5 * p.J * s.tip_slope_rate**2
    return bending + kinetic + tip + antiderivative_K1(laws, s.tip_value)


def inner_H(s1: BeamState, s2: BeamState, p: BeamParams, order: int = 4) -> float:
    if not s1.same_mesh(s2):
        raise DimensionError("states live on different meshes")
    g = _gauss_on_mesh(s1.nodes, order)
    bend = g.integrate(s1.u(g.x, 2) * s2.u(g.x, 2))
    kin = g.integrate(s1.v(g.x) * s2.v(g.x))
    return (0.5 * p.Lambda * bend + 0.5 * p.rho * kin
            + s1.xi(p) * s2.xi(p) / (2 * p.J) + s1.psi(p) * s2.psi(p) / (2 * p.m))


def dissipation_rate(s: BeamState, p: BeamParams, laws: NonlinearLaws) -> float:
    """Energy rate -k2(v(L)) v(L) with v(L) = psi/m."""
    vL = s.psi(p) / p.m
    return -float(laws.k2(vL)) * vL
