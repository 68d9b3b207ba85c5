"""Mollification kernel with prescribed support, unit mass and vanishing
moments.

The kernel is omega(z) = q(z) * beta(z) where beta is a fixed tensor-product
bump supported on the box [-a, a]^(n-1) x [1/2, 3/4], which sits strictly
inside the admissible cap {|z| <= 1, z_n >= 1/2}. The polynomial factor q is
solved from the moment conditions on a tensor Gauss-Legendre rule.

The bump profile is the polynomial (1 - u^2)^6, so every moment integrand is
a polynomial and the build rule integrates it exactly; moment residuals are
at rounding level for any quadrature order >= 16 (n <= 3, l <= 3).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .quadrature import tensor_rule
from .util import as_points, eval_monomial, multi_indices

BUMP_POWER = 6
ZN_LO, ZN_HI = 0.5, 0.75
COND_LIMIT = 1e10


class KernelBuildError(RuntimeError):
    pass


def _bump(u):
    u = np.asarray(u, dtype=float)
    return np.where(np.abs(u) < 1.0, (1.0 - np.clip(u, -1.0, 1.0) ** 2) ** BUMP_POWER, 0.0)


def _lateral_halfwidth(n):
    if n == 1:
        return None
    return float(np.sqrt((1.0 - ZN_HI**2) / (n - 1)) * 0.999)


def support_box(n):
    """Axis-aligned bounding box of the kernel support."""
    a = _lateral_halfwidth(n)
    return tuple((-a, a) for _ in range(n - 1)) + ((ZN_LO, ZN_HI),)


@dataclass(frozen=True)
class Mollifier:
    n: int
    l: int
    coeffs: np.ndarray  # polynomial factor in the centered-scaled basis
    basis: tuple  # multi-indices of the basis
    center: np.ndarray
    scale: np.ndarray
    build_quadrature: int

    def eval(self, z):
        """omega(z); exactly zero outside the support box (hence outside the
        cap {|z| <= 1, z_n >= 1/2})."""
        Z, scalar = as_points(z, self.n)
        U = (Z - self.center) / self.scale
        q = np.zeros(Z.shape[0])
        for c, alpha in zip(self.coeffs, self.basis):
            q += c * eval_monomial(U, alpha)
        beta = _bump((Z[:, -1] - 0.5 * (ZN_LO + ZN_HI)) / (0.5 * (ZN_HI - ZN_LO)))
        a = _lateral_halfwidth(self.n)
        for i in range(self.n - 1):
            beta = beta * _bump(Z[:, i] / a)
        out = q * beta
        return float(out[0]) if scalar else out

    def moment(self, alpha, quadrature_order=None):
        """Tensor-quadrature approximation of the alpha-moment of omega."""
        q = quadrature_order or self.build_quadrature
        nodes, weights = tensor_rule(support_box(self.n), q)
        return float(np.sum(weights * self.eval(nodes) * eval_monomial(nodes, alpha)))

    def moment_residuals(self, quadrature_order=None):
        """Residuals |moment - target| for all |alpha| <= l."""
        out = {}
        for alpha in multi_indices(self.n, self.l):
            target = 1.0 if sum(alpha) == 0 else 0.0
            out[alpha] = abs(self.moment(alpha, quadrature_order) - target)
        return out

    def report(self):
        """JSON-friendly audit record: coefficients plus moment residuals at
        the build order and at an independent doubled order."""
        return {
            "n": self.n,
            "l": self.l,
            "build_quadrature": self.build_quadrature,
            "coefficients": {
                "".join(map(str, a)): float(c) for a, c in zip(self.basis, self.coeffs)
            },
            "moment_residuals_build": {
                "".join(map(str, a)): float(r) for a, r in self.moment_residuals().items()
            },
            "moment_residuals_doubled": {
                "".join(map(str, a)): float(r)
                for a, r in self.moment_residuals(2 * self.build_quadrature).items()
            },
        }


def build_mollifier(n, l, quadrature_order=32):
    """Solve the square moment system for the polynomial factor.

    The Gram matrix G[alpha, gamma] = int z^alpha q_gamma(z) beta(z) dz is
    assembled with the build rule and solved against the unit-mass right-hand
    side. A badly conditioned system aborts the build.
    """
    if not 1 <= n <= 3:
        raise KernelBuildError(f"dimension must be 1..3, got {n}")
    if not 0 <= l <= 3:
        raise KernelBuildError(f"moment order must be 0..3, got {l}")
    basis = tuple(multi_indices(n, l))
    a = _lateral_halfwidth(n)
    center = np.array([0.0] * (n - 1) + [0.5 * (ZN_LO + ZN_HI)])
    scale = np.array([a] * (n - 1) + [0.5 * (ZN_HI - ZN_LO)]) if n > 1 else np.array(
        [0.5 * (ZN_HI - ZN_LO)]
    )
    nodes, weights = tensor_rule(support_box(n), quadrature_order)
    beta = _bump((nodes[:, -1] - center[-1]) / scale[-1])
    for i in range(n - 1):
        beta = beta * _bump(nodes[:, i] / a)
    U = (nodes - center) / scale
    qmat = np.stack([eval_monomial(U, g) for g in basis], axis=1)
    zmono = np.stack([eval_monomial(nodes, al) for al in basis], axis=1)
    G = (weights[:, None] * beta[:, None] * zmono).T @ qmat
    cond = np.linalg.cond(G)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise KernelBuildError(
            f"moment system badly conditioned (cond ~ {cond:.3g}) for n={n}, l={l}"
        )
    rhs = np.zeros(len(basis))
    rhs[0] = 1.0
    coeffs = np.linalg.solve(G, rhs)
    return Mollifier(
        n=n,
        l=l,
        coeffs=coeffs,
        basis=basis,
        center=center,
        scale=scale,
        build_quadrature=quadrature_order,
    )
