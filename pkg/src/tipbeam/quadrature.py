"""Composite Gauss-Legendre rules on [0, L]."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
import math

import numpy as np

#: minimum quadrature points per wavelength 2*pi/p
POINTS_PER_WAVELENGTH = 40


@dataclass(frozen=True)
class QuadratureGrid:
    """Gauss-Legendre rule of fixed order on every panel between `breaks`."""

    breaks: tuple
    order: int = 16

    @classmethod
    def uniform(cls, L: float, panels: int, order: int = 16) -> "QuadratureGrid":
        return cls(tuple(np.linspace(0.0, L, panels + 1)), order)

    @classmethod
    def for_wavenumber(cls, L: float, p_max: float, order: int = 16, min_panels: int = 64) -> "QuadratureGrid":
        """Uniform grid with at least 40 points per wavelength for wavenumbers up to `p_max`."""
        needed = POINTS_PER_WAVELENGTH * p_max * L / (2.0 * math.pi)
        panels = max(min_panels, math.ceil(needed / order))
        return cls.uniform(L, panels, order)

    @classmethod
    def on_mesh(cls, nodes, order: int = 16, subdivide: int = 1) -> "QuadratureGrid":
        """Panels aligned with mesh elements, each optionally split `subdivide` times."""
        nodes = np.asarray(nodes, dtype=float)
        if subdivide > 1:
            t = np.linspace(0.0, 1.0, subdivide + 1)[:-1]
            inner = nodes[:-1, None] + np.diff(nodes)[:, None] * t[None, :]
            nodes = np.append(inner.ravel(), nodes[-1])
        return cls(tuple(nodes), order)

    @property
    def L(self) -> float:
        return self.breaks[-1]

    @cached_property
    def _rule(self):
        b = np.asarray(self.breaks)
        g, gw = np.polynomial.legendre.leggauss(self.order)
        a, h = b[:-1, None], np.diff(b)[:, None]
        x = (a + 0.5 * h * (g[None, :] + 1.0)).ravel()
        w = (0.5 * h * gw[None, :]).ravel()
        return x, w

    @property
    def x(self) -> np.ndarray:
        return self._rule[0]

    @property
    def w(self) -> np.ndarray:
        return self._rule[1]

    def integrate(self, values) -> float:
        return float(np.dot(self.w, values))
