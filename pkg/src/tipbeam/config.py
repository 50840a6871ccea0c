"""Run configuration: INI parsing, serialization and initial-state construction.

A configuration file has the sections ``[beam]``, ``[laws]``, ``[initial]``,
``[discretization]``, ``[analysis]`` and ``[output]``.  Example::

    [beam]
    rho = 1
    Lambda = 1
    L = 1
    m = 1
    J = exceptional:1

    [laws]
    spring = linear_cubic
    damper = linear

    [initial]
    modal = B:2:0.6:0.8, A:1:0.3:0

    [discretization]
    n_elements = 64
    dt = 5e-4
    periods = 55

The rotary inertia may be a number or ``exceptional:<ell>``, which resolves to
J_ell for the other beam parameters.  Modal terms read
``operator:index:u_amplitude:v_amplitude``; the displacement receives
``u_amplitude`` times the normalized mode shape and the velocity receives
``v_amplitude`` times the same shape.  The horizon is either ``T`` or
``periods``, counted in periods of the slowest A-mode.
"""

from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass, field, fields
import hashlib
import math
from pathlib import Path
from typing import Optional

import numpy as np

from . import fem, laws as catalogue, spectral
from .asymptotics import Thresholds
from .model import BeamParams, NonlinearLaws

CLOSED_FORMS = ("quadratic", "tip_load")


class ConfigError(ValueError):
    """Configuration text cannot be turned into a run."""


@dataclass(frozen=True)
class LawsSpec:
    spring: str = "linear_cubic"
    damper: str = "linear"
    k: float = 1.0
    k3: float = 1.0
    c: float = 1.0
    c3: float = 1.0
    scale: float = 1.0
    K_bound: float = 0.5
    delta: float = 0.5

    def build(self) -> NonlinearLaws:
        return catalogue.make_laws(self.spring, self.damper, k=self.k, k3=self.k3, c=self.c,
                                   c3=self.c3, scale=self.scale, K_bound=self.K_bound,
                                   delta=self.delta)


@dataclass(frozen=True)
class ModalTerm:
    operator: str
    index: int
    u_amplitude: float
    v_amplitude: float = 0.0

    def text(self) -> str:
        return f"{self.operator}:{self.index}:{self.u_amplitude!r}:{self.v_amplitude!r}"


@dataclass(frozen=True)
class InitialSpec:
    modal: tuple = ()
    closed_form: Optional[str] = None
    u_amplitude: float = 0.0
    v_amplitude: float = 0.0


@dataclass(frozen=True)
class RunConfig:
    params: BeamParams
    laws: LawsSpec = LawsSpec()
    initial: InitialSpec = InitialSpec()
    n_elements: int = 64
    dt: float = 1e-3
    T: Optional[float] = None
    periods: Optional[float] = None
    stride: int = 10
    thresholds: Thresholds = Thresholds()
    output: str = "runs/default"
    J_text: Optional[str] = field(default=None, compare=False)

    def horizon(self) -> float:
        if self.T is not None:
            return self.T
        period = 2 * math.pi / spectral.find_modes("A", self.params, 1)[0].omega
        return self.periods * period

    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        beam = {k: repr(float(v)) for k, v in self.params.as_dict().items()}
        cp["beam"] = beam
        cp["laws"] = {k: (v if isinstance(v, str) else repr(float(v)))
                      for k, v in asdict(self.laws).items()}
        init = {}
        if self.initial.modal:
            init["modal"] = ", ".join(t.text() for t in self.initial.modal)
        if self.initial.closed_form is not None:
            init["closed_form"] = self.initial.closed_form
            init["u_amplitude"] = repr(self.initial.u_amplitude)
            init["v_amplitude"] = repr(self.initial.v_amplitude)
        cp["initial"] = init
        disc = {"n_elements": str(self.n_elements), "dt": repr(self.dt), "stride": str(self.stride)}
        if self.T is not None:
            disc["T"] = repr(self.T)
        if self.periods is not None:
            disc["periods"] = repr(self.periods)
        cp["discretization"] = disc
        cp["analysis"] = {k: repr(float(v)) for k, v in asdict(self.thresholds).items()}
        cp["output"] = {"directory": self.output}
        lines = []
        for name in cp.sections():
            lines.append(f"[{name}]")
            lines.extend(f"{k} = {v}" for k, v in cp[name].items())
            lines.append("")
        return "\n".join(lines)

    def digest(self) -> str:
        """SHA-256 of the canonical serialization, ignoring the output directory."""
        canonical = self.to_ini().rsplit("[output]", 1)[0]
        return hashlib.sha256(canonical.encode()).hexdigest()


def _number(section, key, default=None, kind=float):
    if key not in section:
        if default is None:
            raise ConfigError(f"[{section.name}] is missing '{key}'")
        return default
    text = section[key].strip()
    try:
        value = kind(text)
    except ValueError:
        raise ConfigError(f"[{section.name}] {key} = {text!r} is not a valid {kind.__name__}") from None
    return value


def _resolve_J(text: str, others: dict) -> float:
    text = text.strip()
    if text.startswith("exceptional:"):
        try:
            ell = int(text.split(":", 1)[1])
        except ValueError:
            raise ConfigError(f"[beam] J = {text!r}: expected exceptional:<integer>") from None
        if ell < 1:
            raise ConfigError("[beam] J: exceptional index must be at least 1")
        return float(spectral.j_exceptional(ell, BeamParams(J=1.0, **others)))
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"[beam] J = {text!r} is neither a number nor exceptional:<ell>") from None


def _parse_modal(text: str) -> tuple:
    terms = []
    for chunk in filter(None, (c.strip() for c in text.split(","))):
        parts = chunk.split(":")
        if len(parts) not in (3, 4) or parts[0] not in spectral.OPERATORS:
            raise ConfigError(f"[initial] modal term {chunk!r}: expected op:index:u_amp[:v_amp]")
        try:
            index = int(parts[1])
            amps = [float(p) for p in parts[2:]]
        except ValueError:
            raise ConfigError(f"[initial] modal term {chunk!r} has a non-numeric field") from None
        if index < 1:
            raise ConfigError(f"[initial] modal term {chunk!r}: mode indices start at 1")
        terms.append(ModalTerm(parts[0], index, *amps))
    return tuple(terms)


def parse_config(text: str, source: str = "<string>") -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    for name in ("beam", "discretization"):
        if not cp.has_section(name):
            raise ConfigError(f"{source}: missing section [{name}]")

    beam = cp["beam"]
    others = {k: _number(beam, k, 1.0) for k in ("rho", "Lambda", "L", "m")}
    J_text = beam.get("J", "1.0")
    params = BeamParams(J=_resolve_J(J_text, others), **others)

    laws_sec = cp["laws"] if cp.has_section("laws") else {}
    default = LawsSpec()
    spec = {}
    for f in fields(LawsSpec):
        if f.name in ("spring", "damper"):
            spec[f.name] = laws_sec.get(f.name, getattr(default, f.name)).strip()
        elif laws_sec:
            spec[f.name] = _number(laws_sec, f.name, getattr(default, f.name))
    laws = LawsSpec(**spec)
    if laws.spring not in catalogue.SPRINGS:
        raise ConfigError(f"[laws] unknown spring {laws.spring!r}; choose from {catalogue.SPRINGS}")
    if laws.damper not in catalogue.DAMPERS:
        raise ConfigError(f"[laws] unknown damper {laws.damper!r}; choose from {catalogue.DAMPERS}")

    initial = InitialSpec()
    if cp.has_section("initial"):
        sec = cp["initial"]
        modal = _parse_modal(sec.get("modal", ""))
        closed = sec.get("closed_form")
        if closed is not None:
            closed = closed.strip()
            if closed not in CLOSED_FORMS:
                raise ConfigError(f"[initial] unknown closed form {closed!r}; choose from {CLOSED_FORMS}")
        initial = InitialSpec(modal, closed, _number(sec, "u_amplitude", 0.0),
                              _number(sec, "v_amplitude", 0.0))

    disc = cp["discretization"]
    n_elements = _number(disc, "n_elements", 64, int)
    dt = _number(disc, "dt")
    T = _number(disc, "T") if "T" in disc else None
    periods = _number(disc, "periods") if "periods" in disc else None
    if (T is None) == (periods is None):
        raise ConfigError("[discretization] give exactly one of 'T' and 'periods'")
    stride = _number(disc, "stride", 10, int)
    if n_elements < 1 or stride < 1 or not dt > 0 or not (T or periods or 0) > 0:
        raise ConfigError("[discretization] n_elements, stride, dt and the horizon must be positive")

    thresholds = Thresholds()
    if cp.has_section("analysis"):
        sec = cp["analysis"]
        thresholds = Thresholds(**{f.name: _number(sec, f.name, getattr(thresholds, f.name))
                                   for f in fields(Thresholds)})
    output = cp["output"].get("directory", "runs/default") if cp.has_section("output") else "runs/default"
    return RunConfig(params, laws, initial, n_elements, dt, T, periods, stride, thresholds,
                     output.strip(), J_text.strip())


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text, str(path))


def _closed_form(name: str, L: float):
    if name == "quadratic":
        return (lambda x: (x / L) ** 2), (lambda x: 2 * x / L**2)
    # static deflection under a unit tip load, scaled to unit tip value
    return (lambda x: x**2 * (3 * L - x) / (2 * L**3)), (lambda x: 3 * x * (2 * L - x) / (2 * L**3))


def initial_dofs(cfg: RunConfig, disc: fem.DiscreteOperator):
    """Displacement and velocity DOF vectors described by ``cfg.initial``."""
    q = np.zeros(disc.ndof)
    v = np.zeros(disc.ndof)
    by_operator = {}
    for term in cfg.initial.modal:
        by_operator[term.operator] = max(by_operator.get(term.operator, 0), term.index)
    modes = {op: spectral.find_modes(op, cfg.params, n) for op, n in by_operator.items()}
    for term in cfg.initial.modal:
        mode = modes[term.operator][term.index - 1]
        shape = fem.interpolate(lambda x: spectral.mode_eval(mode, x, 0),
                                lambda x: spectral.mode_eval(mode, x, 1), disc)
        q += term.u_amplitude * shape
        v += term.v_amplitude * shape
    if cfg.initial.closed_form is not None:
        u, du = _closed_form(cfg.initial.closed_form, cfg.params.L)
        shape = fem.interpolate(u, du, disc)
        q += cfg.initial.u_amplitude * shape
        v += cfg.initial.v_amplitude * shape
    return q, v
