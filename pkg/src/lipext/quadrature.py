"""Tensor-product Gauss-Legendre rules."""

from __future__ import annotations

import numpy as np
from numpy.polynomial.legendre import leggauss


def gauss_legendre(a, b, q):
    """q-node Gauss-Legendre rule on [a, b]. Returns (nodes, weights)."""
    if q < 1:
        raise ValueError("need at least one node")
    x, w = leggauss(q)
    return 0.5 * (b - a) * x + 0.5 * (a + b), 0.5 * (b - a) * w


def tensor_rule(bounds, q):
    """Tensor Gauss-Legendre rule with q nodes per axis.

    bounds: sequence of (a_i, b_i) pairs, one per axis.
    Returns nodes (N, n) and weights (N,), N = q^n.
    """
    axes, waxes = [], []
    for a, b in bounds:
        x, w = gauss_legendre(a, b, q)
        axes.append(x)
        waxes.append(w)
    grids = np.meshgrid(*axes, indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=-1)
    weights = waxes[0]
    for w in waxes[1:]:
        weights = np.outer(weights, w).ravel()
    return nodes, weights


def midpoint_grid(bounds, resolution):
    """Midpoint rule grid. Returns nodes (N, n) and the cell volume."""
    axes = []
    vol = 1.0
    for a, b in bounds:
        h = (b - a) / resolution
        axes.append(a + h * (np.arange(resolution) + 0.5))
        vol *= h
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=-1), vol
