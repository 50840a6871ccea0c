"""Cubic Hermite shape functions and field evaluation on a clamped mesh.

DOF layout per node is (value, slope).  The clamped node x=0 carries no DOFs,
so a reduced vector of length 2*n_elements holds nodes 1..n.
"""

from __future__ import annotations

import numpy as np


def shape(s, h, d=0):
    """Element shape functions (4, len(s)) at local coordinate s in [0, 1].

    `d` is the derivative order with respect to the physical coordinate.
    """
    s = np.asarray(s, dtype=float)
    one = np.ones_like(s)
    if d == 0:
        return np.array([1 - 3 * s**2 + 2 * s**3, h * (s - 2 * s**2 + s**3),
                         3 * s**2 - 2 * s**3, h * (-s**2 + s**3)])
    if d == 1:
        return np.array([(-6 * s + 6 * s**2) / h, 1 - 4 * s + 3 * s**2,
                         (6 * s - 6 * s**2) / h, -2 * s + 3 * s**2])
    if d == 2:
        return np.array([(-6 + 12 * s) / h**2, (-4 + 6 * s) / h,
                         (6 - 12 * s) / h**2, (-2 + 6 * s) / h])
    if d == 3:
        return np.array([12 / h**3 * one, 6 / h**2 * one, -12 / h**3 * one, 6 / h**2 * one])
    raise ValueError(f"derivative order {d} not supported for cubic elements")


def full_dofs(reduced):
    return np.concatenate(([0.0, 0.0], np.asarray(reduced, dtype=float)))


def locate(nodes, x):
    """Element index and local coordinate for each point in x."""
    nodes = np.asarray(nodes)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    idx = np.clip(np.searchsorted(nodes, x, side="right") - 1, 0, len(nodes) - 2)
    h = nodes[idx + 1] - nodes[idx]
    return idx, (x - nodes[idx]) / h, h


def evaluate(nodes, reduced, x, d=0):
    """Evaluate the d-th derivative of the Hermite field at points x."""
    u = full_dofs(reduced)
    idx, s, h = locate(nodes, x)
    N = shape(s, h, d)
    local = np.stack([u[2 * idx], u[2 * idx + 1], u[2 * idx + 2], u[2 * idx + 3]])
    return np.sum(N * local, axis=0)
