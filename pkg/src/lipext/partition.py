"""Dyadic partition of unity over the exterior layers, and atlas cutoffs.

Two modes for the dyadic family:

* composition (default): psi_k(x) = theta(2^k rho_n(x)) with
  theta(t) = chi(t) - chi(2t) and chi the standard smooth 1-to-0 transition.
  The sum telescopes exactly and at most two indices are active anywhere.

* mollified: layer indicators convolved (in the rho_n variable) with a
  compactly supported bump at scale 2^(-k-3)/(M+1), renormalized by the local
  sum. At most three indices can be active. Offered for cross-validation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import GeometryError
from .util import as_points, smooth_transition

MODES = ("composition", "mollified")

# antiderivative of the C^5 bump (1-u^2)^6 on [-1, 1], normalized to [0, 1]
_BUMP_POLY = np.polynomial.Polynomial([1.0, 0, -1.0]) ** 6
_BUMP_INT = _BUMP_POLY.integ()


def _bump_cdf(u):
    u = np.clip(np.asarray(u, dtype=float), -1.0, 1.0)
    lo = _BUMP_INT(-1.0)
    return (_BUMP_INT(u) - lo) / (_BUMP_INT(1.0) - lo)


def theta(t):
    """Smooth profile supported in (1/2, 2), telescoping under dyadic shifts."""
    t = np.asarray(t, dtype=float)
    return smooth_transition(t) - smooth_transition(2.0 * t)


@dataclass(frozen=True)
class DyadicPartition:
    dom: object  # SubgraphDomain
    mode: str = "composition"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown partition mode {self.mode!r}")

    @property
    def max_active(self):
        return 2 if self.mode == "composition" else 3

    def _mollified_weight(self, k, rho):
        # mass of the smoothing bump over layer k, as a function of rho
        w = 2.0 ** (-k - 3.0) / (self.dom.M + 1.0)
        lo = 2.0 ** (-k - 1.0)
        hi = 2.0 ** (-k * 1.0)
        # the difference can round to a few -ulp when both CDFs saturate
        return np.maximum(_bump_cdf((rho - lo) / w) - _bump_cdf((rho - hi) / w), 0.0)

    def _candidates(self, rho):
        # indices k that can be active at the given exterior distances
        t = -np.log2(rho)
        k0 = np.ceil(t - 1.0).astype(int)
        if self.mode == "composition":
            return np.stack([k0, k0 + 1], axis=1)
        return np.stack([k0 - 1, k0, k0 + 1], axis=1)

    def psi(self, k, x):
        """psi_k at x; identically zero off the exterior set."""
        X, scalar = as_points(x, self.dom.n)
        rho = self.dom.signed_distance(X)
        out = np.zeros(X.shape[0])
        pos = rho > 0
        if np.any(pos):
            out[pos] = self._psi_from_rho(np.asarray(k), rho[pos])
        return float(out[0]) if scalar else out

    def _psi_from_rho(self, k, rho):
        if self.mode == "composition":
            return theta(2.0 ** (k * 1.0) * rho)
        cand = self._candidates(rho)
        weights = self._mollified_weight(cand.astype(float), rho[:, None])
        total = weights.sum(axis=1)
        own = self._mollified_weight(np.asarray(k, dtype=float), rho)
        return np.where(total > 0, own / np.where(total > 0, total, 1.0), 0.0)

    def active_layers(self, x):
        """Indices with psi_k(x) != 0, for a single exterior point."""
        X, _ = as_points(x, self.dom.n)
        if X.shape[0] != 1:
            raise ValueError("active_layers takes a single point; use active_table for batches")
        rho = self.dom.signed_distance(X)
        if rho[0] <= 0:
            raise GeometryError("active_layers requires a point in the exterior set")
        karr, psi = self.active_table(rho)
        return [int(k) for k, p in zip(karr[0], psi[0]) if p != 0.0]

    def active_table(self, rho):
        """Vectorized active layers for positive distances.

        Returns (karr, psi) of shape (m, max_active); inactive slots carry
        psi = 0 (their k values are still valid candidates).
        """
        rho = np.asarray(rho, dtype=float)
        if np.any(rho <= 0):
            raise GeometryError("active_table requires strictly positive distances")
        cand = self._candidates(rho)
        if self.mode == "composition":
            psi = theta(2.0 ** cand.astype(float) * rho[:, None])
        else:
            weights = self._mollified_weight(cand.astype(float), rho[:, None])
            total = weights.sum(axis=1, keepdims=True)
            psi = np.where(total > 0, weights / np.where(total > 0, total, 1.0), 0.0)
        return cand, psi

    def sum_at(self, x):
        """Sum over k of psi_k(x): 1 on the exterior set, 0 elsewhere."""
        X, scalar = as_points(x, self.dom.n)
        rho = self.dom.signed_distance(X)
        out = np.zeros(X.shape[0])
        pos = rho > 0
        if np.any(pos):
            _, psi = self.active_table(rho[pos])
            out[pos] = psi.sum(axis=1)
        return float(out[0]) if scalar else out


@dataclass(frozen=True)
class AtlasCutoffs:
    """Square-normalized tensor bumps: sum of psi_j^2 = 1 on the covered set.

    Raw bump eta_j equals 1 on the d-shrunk chart cuboid and vanishes outside
    the d/2-shrunk one; psi_j = eta_j / sqrt(sum eta_i^2).
    """

    atlas: object
    margin: float = field(default=None)

    def __post_init__(self):
        m = self.atlas.d if self.margin is None else self.margin
        if not 0 < m <= self.atlas.d:
            raise ValueError("smoothing margin must lie in (0, d]")
        object.__setattr__(self, "margin", float(m))

    def raw_bump(self, j, x):
        """eta_j: tensor smooth transition in the chart frame."""
        ch = self.atlas.charts[j]
        Y = ch.to_frame(np.atleast_2d(np.asarray(x, dtype=float)))
        d_half = 0.5 * self.atlas.d
        out = np.ones(Y.shape[0])
        for i, (a, b) in enumerate(ch.box):
            # ramp from 0 at face depth d/2 up to 1 at depth (d + margin)/2
            depth = np.minimum(Y[:, i] - a, b - Y[:, i])
            out *= smooth_transition(2.0 - (depth - d_half) / (0.5 * self.margin))
        return out

    def cutoff(self, j, x):
        X, scalar = as_points(x, self.atlas.n)
        total = np.zeros(X.shape[0])
        for i in range(self.atlas.s):
            total += self.raw_bump(i, X) ** 2
        own = self.raw_bump(j, X)
        out = np.where(total > 0, own / np.sqrt(np.where(total > 0, total, 1.0)), 0.0)
        return float(out[0]) if scalar else out

    def cutoff_table(self, x):
        """(m, s) array of all normalized cutoffs at once."""
        X, _ = as_points(x, self.atlas.n)
        raw = np.stack([self.raw_bump(j, X) for j in range(self.atlas.s)], axis=1)
        total = (raw**2).sum(axis=1, keepdims=True)
        return np.where(total > 0, raw / np.sqrt(np.where(total > 0, total, 1.0)), 0.0)
