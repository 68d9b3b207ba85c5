"""Small shared helpers: multi-indices, array coercion, smooth steps."""

from __future__ import annotations

import itertools
import math

import numpy as np


def as_points(x, n):
    """Coerce a point or an (m, n) batch of points to a 2-d float array.

    Returns (array, was_scalar) where was_scalar tells callers to unwrap
    single-point results back to scalars.
    """
    a = np.asarray(x, dtype=float)
    if a.ndim == 1:
        if a.shape[0] != n:
            raise ValueError(f"expected a point in R^{n}, got shape {a.shape}")
        return a[None, :], True
    if a.ndim != 2 or a.shape[1] != n:
        raise ValueError(f"expected (m, {n}) points, got shape {a.shape}")
    return a, False


def multi_indices(n, max_order):
    """All multi-indices alpha in N_0^n with |alpha| <= max_order,
    sorted by total order then lexicographically."""
    out = []
    for order in range(max_order + 1):
        block = sorted(
            a for a in itertools.product(range(order + 1), repeat=n) if sum(a) == order
        )
        out.extend(block)
    return [tuple(a) for a in out]


def multi_binom(alpha, beta):
    """Product of per-axis binomial coefficients C(alpha_i, beta_i)."""
    return math.prod(math.comb(a, b) for a, b in zip(alpha, beta))


def sub_indices(alpha):
    """All beta with beta <= alpha componentwise."""
    ranges = [range(a + 1) for a in alpha]
    return [tuple(b) for b in itertools.product(*ranges)]


def eval_monomial(X, alpha):
    """X: (m, n) points, alpha: multi-index. Returns (m,) of prod x_i^alpha_i."""
    X = np.asarray(X, dtype=float)
    out = np.ones(X.shape[0])
    for i, a in enumerate(alpha):
        if a:
            out = out * X[:, i] ** a
    return out


def smooth_transition(t):
    """C-infinity transition: 1 for t <= 1, 0 for t >= 2, monotone between.

    Built from the exp(-1/s) glue; returns exactly 1.0 / 0.0 on the flats.
    """
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    lo = t <= 1.0
    hi = t >= 2.0
    mid = ~(lo | hi)
    out[lo] = 1.0
    out[hi] = 0.0
    if np.any(mid):
        tm = t[mid]
        a = np.exp(-1.0 / (2.0 - tm))
        b = np.exp(-1.0 / (tm - 1.0))
        out[mid] = a / (a + b)
    return out


def smoothstep01(t):
    """C^3 polynomial smoothstep on [0, 1] (septic), clamped outside."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    t4 = t ** 4
    return t4 * (35.0 - 84.0 * t + 70.0 * t * t - 20.0 * t ** 3)


def smoothstep01_d1(t):
    """First derivative of smoothstep01 (zero outside [0, 1])."""
    t = np.asarray(t, dtype=float)
    inside = (t > 0.0) & (t < 1.0)
    tc = np.clip(t, 0.0, 1.0)
    d = 140.0 * tc ** 3 - 420.0 * tc ** 4 + 420.0 * tc ** 5 - 140.0 * tc ** 6
    return np.where(inside, d, 0.0)
