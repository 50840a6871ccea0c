"""Transcendental eigenproblems of the tip-loaded clamped beam.

Two boundary-value problems share the clamped end and the field equation
rho*mu^2*u + Lambda*u'''' = 0 with mu^2 = -(Lambda/rho) p^4:

* operator ``"B"``: u'''(L) = 0 and J mu^2 u'(L) + Lambda u''(L) = 0,
* operator ``"A"``: m mu^2 u(L) - Lambda u'''(L) = 0 and the same rotary row.

Mode shapes are C1 (cosh px - cos px) + C2 (sinh px - sin px).  They are
evaluated in the equivalent form

    g e^{p(x-L)} + d e^{-px} - C1 cos px - C2 sin px

whose coefficients stay O(1) for large pL, so no cosh/sinh cancellation
occurs.
"""

from __future__ import annotations

from dataclasses import dataclass
import math
from typing import Optional

import numpy as np

from .model import BeamParams
from .quadrature import QuadratureGrid

OPERATORS = ("A", "B")

#: pL above which trigonometric-hyperbolic products are divided by cosh(pL)
FACTOR_THRESHOLD = 30.0
#: relative characteristic residual required by build_mode
ROOT_TOL = 1e-8


class SpectralError(RuntimeError):
    pass


class BracketExhaustion(SpectralError):
    """The root scan hit its cap before finding the requested number of roots."""


class ExceptionalMismatch(ValueError):
    pass


@dataclass(frozen=True)
class Mode:
    """Normalized eigenpair of operator A or B.

    ``C1``/``C2`` are the shape coefficients before applying ``norm``;
    ``grow``/``decay`` are the matching coefficients of e^{p(x-L)} and
    e^{-px}.  ``uL`` and ``duL`` are the normalized tip value and slope.
    """

    operator: str
    index: int
    p: float
    mu_abs: float
    C1: float
    C2: float
    grow: float
    decay: float
    norm: float
    uL: float
    duL: float
    L: float
    nodal: bool = False

    @property
    def omega(self) -> float:
        return self.mu_abs


@dataclass(frozen=True)
class ExceptionalSet:
    entries: tuple  # ((ell, J_ell), ...)

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    @property
    def values(self) -> np.ndarray:
        return np.array([J for _, J in self.entries])


def _check_operator(which):
    if which not in OPERATORS:
        raise ValueError(f"operator must be one of {OPERATORS}, got {which!r}")


def _hyp(pL):
    """cosh, sinh, 1 and e^{-pL}, all divided by cosh(pL) once pL > 30."""
    if pL > FACTOR_THRESHOLD:
        e2 = math.exp(-2.0 * pL)
        sigma = 2.0 * math.exp(-pL) / (1.0 + e2)
        return 1.0, math.tanh(pL), sigma, sigma * math.exp(-pL)
    return math.cosh(pL), math.sinh(pL), 1.0, math.exp(-pL)


def _mu2(p, params):
    return -params.Lambda * p**4 / params.rho


def _char_terms(which, p, params):
    if not p > 0:
        raise ValueError(f"wavenumber must be positive, got {p}")
    pL = p * params.L
    ch, sh, one, _ = _hyp(pL)
    c, s = math.cos(pL), math.sin(pL)
    mu2, Lam = _mu2(p, params), params.Lambda
    J, m = params.J, params.m
    if which == "B":
        # det of the shear-free row and the rotary row, expanded into monomials
        return (-2 * J * mu2 * sh * c, -2 * J * mu2 * s * ch, -2 * p * Lam * one, -2 * p * Lam * ch * c)
    _check_operator(which)
    return (2 * m * J * mu2**2 * p * one, -2 * m * J * mu2**2 * p * ch * c,
            2 * m * mu2 * p**2 * Lam * ch * s, -2 * m * mu2 * p**2 * Lam * sh * c,
            2 * Lam * p**4 * J * mu2 * sh * c, 2 * Lam * p**4 * J * mu2 * s * ch,
            2 * Lam**2 * p**5 * one, 2 * Lam**2 * p**5 * ch * c)


def char_B(p: float, params: BeamParams) -> float:
    """Determinant of the boundary system of B, zero at its eigen-wavenumbers.

    Equal to det[[sinh pL - sin pL, cosh pL + cos pL], [rotary row]] expanded
    with cosh^2 - sinh^2 = 1.  For pL > 30 the value is divided by cosh pL.
    """
    return math.fsum(_char_terms("B", p, params))


def char_A(p: float, params: BeamParams) -> float:
    """Determinant of the boundary system of A (tip-mass row, rotary row).

    Columns are the clamped shape functions cosh - cos and sinh - sin; the
    same rescaling by cosh pL as in `char_B` applies for pL > 30.
    """
    return math.fsum(_char_terms("A", p, params))


def char(which: str, p: float, params: BeamParams) -> float:
    return math.fsum(_char_terms(which, p, params))


def relative_char(which: str, p: float, params: BeamParams) -> float:
    """|char| divided by the sum of magnitudes of its expanded monomials."""
    terms = _char_terms(which, p, params)
    scale = math.fsum(abs(t) for t in terms)
    return abs(math.fsum(terms)) / scale if scale > 0 else 0.0


# --- root search -------------------------------------------------------------

def _scan(f, p_lo, p_hi, h):
    """Sign-change brackets of f on a uniform grid over [p_lo, p_hi]."""
    n = max(2, int(math.ceil((p_hi - p_lo) / h)) + 1)
    grid = np.linspace(p_lo, p_hi, n)
    vals = np.array([f(p) for p in grid])
    sgn = np.sign(vals)
    out = []
    for i in range(n - 1):
        if sgn[i] == 0:
            out.append((grid[i], grid[i]))
        elif sgn[i] * sgn[i + 1] < 0:
            out.append((grid[i], grid[i + 1]))
    if sgn[-1] == 0:
        out.append((grid[-1], grid[-1]))
    return out


def _bisect(f, lo, hi, max_iter=200):
    if lo == hi:
        return lo
    flo = f(lo)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fm = f(mid)
        if fm == 0:
            return mid
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return lo if abs(flo) <= abs(f(hi)) else hi


def find_roots(which: str, params: BeamParams, count: int, p_cap: Optional[float] = None,
               max_refine: int = 6) -> list:
    """The `count` smallest positive zeros of char_A or char_B."""
    _check_operator(which)
    if count < 1:
        raise ValueError("count must be at least 1")
    L = params.L
    h = math.pi / (8 * L)
    if p_cap is None:
        p_cap = 2 * math.pi * (count + 4) / L
    f = lambda p: char(which, p, params)
    p0 = 1e-6 / L

    # extend the scan window until enough brackets are found
    hi = min(p_cap, math.pi * (count + 2) / L)
    while True:
        br = _scan(f, p0, hi, h)
        if len(br) >= count or hi >= p_cap:
            break
        hi = min(p_cap, 2 * hi)
    if len(br) < count:
        raise BracketExhaustion(
            f"operator {which}: found {len(br)} of {count} roots below p = {p_cap:.6g} "
            f"(pL cap {p_cap * L:.6g}); raise p_cap")

    # refine until halving the step no longer reveals new sign changes
    top = br[count - 1][1]
    for _ in range(max_refine):
        finer = _scan(f, p0, top, h / 2)
        if len(finer) == len(_scan(f, p0, top, h)):
            break
        h /= 2
        br = finer + [b for b in br if b[0] >= top]
    else:
        raise SpectralError(f"operator {which}: bracket refinement did not stabilize")
    return [_bisect(f, lo, hi_) for lo, hi_ in br[:count]]


# --- mode construction -------------------------------------------------------

def _rows(which, p, params):
    """Boundary rows (a, b) for (C1, C2) with b - a in cancellation-free form.

    All entries carry the same 1/cosh(pL) factor as `_hyp`.
    """
    pL = p * params.L
    ch, sh, one, em = _hyp(pL)
    scale = one  # cos/sin need the same factor
    c, s = math.cos(pL) * scale, math.sin(pL) * scale
    mu2, Lam = _mu2(p, params), params.Lambda
    J, m = params.J, params.m
    shear = (sh - s, ch + c, em + c + s)
    rot = (J * mu2 * (sh + s) + p * Lam * (ch + c),
           J * mu2 * (ch - c) + p * Lam * (sh + s),
           J * mu2 * (em - c - s) + p * Lam * (s - c - em))
    tip = (m * mu2 * (ch - c) - Lam * p**3 * (sh - s),
           m * mu2 * (sh - s) - Lam * p**3 * (ch + c),
           m * mu2 * (c - s - em) - Lam * p**3 * (em + c + s))
    weights = {"shear": 1.0, "rot": abs(J * mu2) + p * Lam, "tip": abs(m * mu2) + Lam * p**3}
    return {"shear": shear, "rot": rot, "tip": tip}, weights


def _shape_from_row(row, pL):
    a, b, diff = row
    C1, C2 = b, -a
    # any 1/cosh(pL) factor in the row cancels the growth of e^{pL}
    grow = diff * math.exp(pL) / 2
    decay = (b + a) / 2
    return C1, C2, grow, decay


def _raw_eval(p, C1, C2, grow, decay, L, x, d):
    x = np.asarray(x, dtype=float)
    phase = d * math.pi / 2
    return p**d * (grow * np.exp(p * (x - L)) + decay * (-1) ** d * np.exp(-p * x)
                   - C1 * np.cos(p * x + phase) - C2 * np.sin(p * x + phase))


def _mass_weights(which, params):
    return params.J, (params.m if which == "A" else 0.0)


def _finish_mode(which, index, p, C1, C2, grow, decay, params, grid, nodal=False):
    L = params.L
    if grid is None:
        grid = QuadratureGrid.for_wavenumber(L, p)
    scale = max(abs(C1), abs(C2))
    C1, C2, grow, decay = (c / scale for c in (C1, C2, grow, decay))
    ev = lambda x, d: _raw_eval(p, C1, C2, grow, decay, L, x, d)
    uL, duL = float(ev(L, 0)), float(ev(L, 1))
    if nodal:
        uL = 0.0
    # deterministic sign: u'(L) > 0, else first nonzero tip quantity
    for val in (duL, uL, float(ev(L, 2)), float(ev(L, 3))):
        if abs(val) > 1e-14:
            sign = math.copysign(1.0, val)
            break
    else:
        sign = 1.0
    omega = math.sqrt(params.Lambda / params.rho) * p**2
    J, m = _mass_weights(which, params)
    bend = grid.integrate(ev(grid.x, 2) ** 2)
    mass = grid.integrate(ev(grid.x, 0) ** 2)
    norm2 = 0.5 * params.Lambda * bend + 0.5 * omega**2 * (params.rho * mass + J * duL**2 + m * uL**2)
    norm = 1.0 / math.sqrt(norm2)
    C1, C2, grow, decay = (sign * c for c in (C1, C2, grow, decay))
    return Mode(which, index, p, omega, C1, C2, grow, decay, norm,
                sign * norm * uL, sign * norm * duL, L, nodal)


def build_mode(p: float, params: BeamParams, which: str = "B", index: int = 0,
               grid: Optional[QuadratureGrid] = None, check: bool = True) -> Mode:
    """Normalized mode at a root p of the characteristic function.

    For B-modes C2 follows from C1 = 1 through the u'''(L) = 0 row; A-modes
    use whichever of their two rows is better conditioned.
    """
    _check_operator(which)
    if check:
        r = relative_char(which, p, params)
        if r > ROOT_TOL:
            raise SpectralError(f"p = {p!r} is not a root of char_{which} (relative residual {r:.3g})")
    rows, weights = _rows(which, p, params)
    if which == "B":
        row = rows["shear"]
    else:
        row = max(("rot", "tip"), key=lambda k: math.hypot(*rows[k][:2]) / weights[k])
        row = rows[row]
    C1, C2, grow, decay = _shape_from_row(row, p * params.L)
    return _finish_mode(which, index, p, C1, C2, grow, decay, params, grid)


def find_modes(which: str, params: BeamParams, count: int,
               grid: Optional[QuadratureGrid] = None, p_cap: Optional[float] = None) -> list:
    roots = find_roots(which, params, count, p_cap=p_cap)
    if grid is None:
        grid = QuadratureGrid.for_wavenumber(params.L, roots[-1])
    return [build_mode(p, params, which, index=i + 1, grid=grid) for i, p in enumerate(roots)]


def mode_eval(mode: Mode, x, d: int = 0):
    """d-th derivative (0..4) of the normalized mode shape at x in [0, L]."""
    xa = np.asarray(x, dtype=float)
    tol = 1e-12 * mode.L
    if np.any(xa < -tol) or np.any(xa > mode.L + tol):
        raise ValueError(f"x must lie in [0, {mode.L}]")
    xa = np.clip(xa, 0.0, mode.L)
    val = mode.norm * _raw_eval(mode.p, mode.C1, mode.C2, mode.grow, mode.decay, mode.L, xa, d)
    if mode.nodal and d == 0:
        val = np.where(xa == mode.L, 0.0, val)
    return float(val) if np.ndim(val) == 0 else val


# --- exceptional set ---------------------------------------------------------

def j_exceptional(ell: int, params: BeamParams) -> float:
    """Rotary inertia for which the ell-th nodal mode exists."""
    if ell < 1:
        raise ValueError("ell must be a positive integer")
    x = ell * math.pi
    base = params.rho * (params.L / x) ** 3
    if x < FACTOR_THRESHOLD:
        return base * ((-1) ** ell + math.cosh(x)) / math.sinh(x)
    t = math.tanh(x / 2)
    return base * (t if ell % 2 else 1.0 / t)


def exceptional_set(params: BeamParams, ell_max: int) -> ExceptionalSet:
    if ell_max < 1:
        raise ValueError("ell_max must be at least 1")
    return ExceptionalSet(tuple((ell, j_exceptional(ell, params)) for ell in range(1, ell_max + 1)))


def is_exceptional(J: float, params: BeamParams, rel_tol: float = 1e-10, ell_max: int = 50) -> Optional[int]:
    """Return ell if J matches J_ell within `rel_tol`, otherwise None."""
    if not rel_tol > 0:
        raise ValueError("rel_tol must be positive")
    Js = exceptional_set(params, ell_max + 1).values
    half_gap = 0.5 * np.min((Js[:-1] - Js[1:]) / Js[:-1])
    if rel_tol > half_gap:
        raise ValueError(f"rel_tol {rel_tol:g} exceeds half the smallest relative gap {half_gap:.3g} "
                         f"of J_1..J_{ell_max}")
    rel = np.abs(J - Js[:ell_max]) / Js[:ell_max]
    hits = np.flatnonzero(rel <= rel_tol)
    return int(hits[0]) + 1 if hits.size else None


def nodal_mode(ell: int, params: BeamParams, grid: Optional[QuadratureGrid] = None,
               rel_tol: float = 1e-10) -> Mode:
    """The B-mode with a node at the tip, which exists only for J = J_ell."""
    J_ell = j_exceptional(ell, params)
    if abs(params.J - J_ell) > rel_tol * J_ell:
        Js = exceptional_set(params, max(ell, 50)).values
        k = int(np.argmin(np.abs(np.log(Js / params.J))))
        raise ExceptionalMismatch(
            f"J = {params.J!r} does not equal J_{ell} = {J_ell!r}; "
            f"nearest exceptional value is J_{k + 1} = {Js[k]!r}")
    x = ell * math.pi
    p = x / params.L
    sgn = (-1) ** ell
    em = math.exp(-x)
    # C2 = -sinh(x) / (cosh(x) + (-1)^ell), evaluated without overflow
    C2 = -(1 - em * em) / (1 + em * em + 2 * sgn * em)
    grow = 1.0 / (em + sgn)
    decay = (1 - C2) / 2
    index = len(find_roots_below("B", params, p)) + 1
    return _finish_mode("B", index, p, 1.0, C2, grow, decay, params, grid, nodal=True)


def find_roots_below(which: str, params: BeamParams, p_max: float) -> list:
    """Brackets of roots strictly below p_max (excluding a root at p_max itself)."""
    f = lambda p: char(which, p, params)
    top = p_max * (1 - 1e-7)
    h = math.pi / (16 * params.L)
    return _scan(f, 1e-6 / params.L, top, h)


# --- checks ------------------------------------------------------------------

def gram_matrix(modes, params: BeamParams, grid: Optional[QuadratureGrid] = None) -> np.ndarray:
    """Inner products of the state-space eigenvectors of the given modes.

    For B-modes this is the product on (u, v, xi); A-modes add the payload
    translation term.  Positive-index representatives are used.
    """
    if not modes:
        return np.zeros((0, 0))
    which = modes[0].operator
    if grid is None:
        grid = QuadratureGrid.for_wavenumber(params.L, max(md.p for md in modes))
    J, m = _mass_weights(which, params)
    U2 = np.array([mode_eval(md, grid.x, 2) for md in modes])
    U0 = np.array([mode_eval(md, grid.x, 0) for md in modes])
    w = grid.w
    S = (U2 * w) @ U2.T
    Mm = (U0 * w) @ U0.T
    duL = np.array([md.duL for md in modes])
    uL = np.array([md.uL for md in modes])
    om = np.array([md.mu_abs for md in modes])
    mass = params.rho * Mm + J * np.outer(duL, duL) + m * np.outer(uL, uL)
    return 0.5 * params.Lambda * S + 0.5 * np.outer(om, om) * mass


def eigen_residual(mode: Mode, params: BeamParams, grid: Optional[QuadratureGrid] = None) -> float:
    """Largest relative violation of the field equation and boundary rows."""
    L, p = params.L, mode.p
    if grid is None:
        grid = QuadratureGrid.for_wavenumber(L, p)
    mu2 = -(mode.mu_abs**2)
    u = lambda x, d: mode_eval(mode, x, d)
    field_a = params.rho * mu2 * u(grid.x, 0)
    field_b = params.Lambda * u(grid.x, 4)
    num = math.sqrt(grid.integrate((field_a + field_b) ** 2))
    den = math.sqrt(grid.integrate(field_a**2)) + math.sqrt(grid.integrate(field_b**2))
    res_field = num / den

    # coefficient magnitude sets the scale of each boundary derivative
    size = mode.norm * (abs(mode.grow) + abs(mode.decay) + abs(mode.C1) + abs(mode.C2))
    uL, u1, u2, u3 = (u(L, d) for d in range(4))
    rot = abs(params.J * mu2 * u1 + params.Lambda * u2) / (
        size * (abs(params.J * mu2) * p + params.Lambda * p**2))
    if mode.operator == "B":
        end = abs(u3) / (size * p**3)
    else:
        end = abs(params.m * mu2 * uL - params.Lambda * u3) / (
            size * (abs(params.m * mu2) + params.Lambda * p**3))
    return max(res_field, rot, end)
