"""Catalogue of boundary feedback laws selectable by name."""

from __future__ import annotations

import math

from .model import NonlinearLaws

SPRINGS = ("zero", "linear", "cubic", "linear_cubic")
DAMPERS = ("zero", "linear", "cubic", "linear_cubic", "arctan")


def _polynomial(c1: float, c3: float):
    f = lambda z: c1 * z + c3 * z**3
    df = lambda z: c1 + 3 * c3 * z**2
    F = lambda z: 0.5 * c1 * z**2 + 0.25 * c3 * z**4
    return f, df, F


def spring(kind: str, k: float = 1.0, k3: float = 1.0):
    """Return (k1, dk1, K1) for a catalogue spring."""
    coeffs = {"zero": (0.0, 0.0), "linear": (k, 0.0), "cubic": (0.0, k3), "linear_cubic": (k, k3)}
    if kind not in coeffs:
        raise KeyError(f"unknown spring law {kind!r}; choose from {SPRINGS}")
    return _polynomial(*coeffs[kind])


def damper(kind: str, c: float = 1.0, c3: float = 1.0, scale: float = 1.0):
    """Return (k2, dk2) for a catalogue damper.

    ``arctan`` is the saturating law c*scale*atan(z/scale), which is linear
    with slope c near 0 and bounded by c*scale*pi/2.
    """
    if kind == "arctan":
        return (lambda z: c * scale * math.atan(z / scale),
                lambda z: c / (1.0 + (z / scale) ** 2))
    coeffs = {"zero": (0.0, 0.0), "linear": (c, 0.0), "cubic": (0.0, c3), "linear_cubic": (c, c3)}
    if kind not in coeffs:
        raise KeyError(f"unknown damper law {kind!r}; choose from {DAMPERS}")
    f, df, _ = _polynomial(*coeffs[kind])
    return f, df


def make_laws(spring_kind: str = "linear_cubic", damper_kind: str = "linear", *,
              k: float = 1.0, k3: float = 1.0, c: float = 1.0, c3: float = 1.0,
              scale: float = 1.0, K_bound: float = 0.5, delta: float = 0.5,
              sample_grid=(-2.0, 2.0, 10_000)) -> NonlinearLaws:
    k1, dk1, K1 = spring(spring_kind, k, k3)
    k2, dk2 = damper(damper_kind, c, c3, scale)
    return NonlinearLaws(k1, dk1, k2, dk2, K1=K1, K_bound=K_bound, delta=delta,
                         sample_grid=tuple(sample_grid), name=f"{spring_kind}/{damper_kind}")
