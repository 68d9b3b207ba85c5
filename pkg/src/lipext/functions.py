"""Test functions with analytic derivatives, and the built-in families used
by the experiment harness."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from numpy.polynomial import Polynomial
from numpy.polynomial.hermite import hermval

from .util import as_points, multi_binom, sub_indices


@dataclass(frozen=True)
class SupportHint:
    """Optional region information about the support of a test function.

    box: (n, 2) array; the support is contained in this axis-aligned box.
    rho_bound: the support lies in {|rho_n| < rho_bound} for the domain the
    function is paired with (used to short-circuit far-field evaluation).
    """

    box: Optional[np.ndarray] = None
    rho_bound: Optional[float] = None


@dataclass(frozen=True)
class TestFunction:
    __test__ = False  # keep pytest collection away despite the name

    value: Callable[[np.ndarray], np.ndarray]
    n: int
    derivative: Optional[Callable[[tuple, np.ndarray], np.ndarray]] = None
    support_hint: Optional[SupportHint] = None
    name: str = "f"

    def __call__(self, x):
        X, scalar = as_points(x, self.n)
        out = np.asarray(self.value(X), dtype=float)
        return float(out[0]) if scalar else out

    def d(self, alpha, x):
        if self.derivative is None:
            raise ValueError(f"{self.name} has no analytic derivative")
        X, scalar = as_points(x, self.n)
        alpha = tuple(int(a) for a in alpha)
        if all(a == 0 for a in alpha):
            out = np.asarray(self.value(X), dtype=float)
        else:
            out = np.asarray(self.derivative(alpha, X), dtype=float)
        return float(out[0]) if scalar else out

    @property
    def has_derivative(self):
        return self.derivative is not None


def product(f, g, name=None):
    """Pointwise product; derivatives by the Leibniz rule when both factors
    have them."""
    if f.n != g.n:
        raise ValueError("factor dimensions differ")

    def val(X):
        return np.asarray(f.value(X)) * np.asarray(g.value(X))

    deriv = None
    if f.has_derivative and g.has_derivative:

        def deriv(alpha, X):
            out = np.zeros(X.shape[0])
            for beta in sub_indices(alpha):
                rest = tuple(a - b for a, b in zip(alpha, beta))
                out += multi_binom(alpha, beta) * f.d(beta, X) * g.d(rest, X)
            return out

    hint = g.support_hint or f.support_hint
    return TestFunction(
        value=val,
        n=f.n,
        derivative=deriv,
        support_hint=hint,
        name=name or f"{f.name}*{g.name}",
    )


def constant_function(n, c=1.0, name=None):
    def deriv(alpha, X):
        return np.zeros(X.shape[0])

    return TestFunction(
        value=lambda X: np.full(X.shape[0], float(c)),
        n=n,
        derivative=deriv,
        name=name or f"const{c:g}",
    )


def monomial_function(alpha):
    """x^alpha with exact derivatives."""
    alpha = tuple(int(a) for a in alpha)
    n = len(alpha)

    def val(X):
        out = np.ones(X.shape[0])
        for i, a in enumerate(alpha):
            if a:
                out = out * X[:, i] ** a
        return out

    def deriv(beta, X):
        out = np.ones(X.shape[0])
        for i, (a, b) in enumerate(zip(alpha, beta)):
            if b > a:
                return np.zeros(X.shape[0])
            coef = 1.0
            for j in range(b):
                coef *= a - j
            out = out * coef * (X[:, i] ** (a - b) if a > b else 1.0)
        return out

    name = "x^" + "".join(map(str, alpha)) if any(alpha) else "1"
    return TestFunction(value=val, n=n, derivative=deriv, name=name)


def gaussian_function(center, width=1.0, name=None):
    """Product Gaussian exp(-|x-c|^2 / w^2); derivatives via Hermite polynomials."""
    c = np.asarray(center, dtype=float)
    n = c.shape[0]
    w = float(width)

    def val(X):
        U = (X - c) / w
        return np.exp(-np.sum(U**2, axis=1))

    def deriv(alpha, X):
        U = (X - c) / w
        out = np.exp(-np.sum(U**2, axis=1))
        for i, a in enumerate(alpha):
            if a:
                coefs = [0.0] * a + [1.0]
                out = out * ((-1.0 / w) ** a) * hermval(U[:, i], coefs)
        return out

    return TestFunction(value=val, n=n, derivative=deriv, name=name or "gaussian")


def trig_function(freqs, phases=None, name=None):
    """Separable product of sin(a_i x_i + s_i); derivatives shift the phase."""
    freqs = np.asarray(freqs, dtype=float)
    n = freqs.shape[0]
    phases = np.zeros(n) if phases is None else np.asarray(phases, dtype=float)

    def val(X):
        out = np.ones(X.shape[0])
        for i in range(n):
            out = out * np.sin(freqs[i] * X[:, i] + phases[i])
        return out

    def deriv(alpha, X):
        out = np.ones(X.shape[0])
        for i, a in enumerate(alpha):
            out = out * freqs[i] ** a * np.sin(
                freqs[i] * X[:, i] + phases[i] + a * np.pi / 2.0
            )
        return out

    return TestFunction(value=val, n=n, derivative=deriv, name=name or "trig")


class _AxisWindow:
    """C^3 window on one axis: 0 outside (a, b), 1 on [a+margin, b-margin],
    septic smoothstep ramps in between. Ramps must not overlap."""

    _S = Polynomial([0, 0, 0, 0, 35.0, -84.0, 70.0, -20.0])

    def __init__(self, a, b, margin):
        if not margin > 0 or margin * 2 > (b - a):
            raise ValueError("window margin must be positive and at most half the side")
        self.a, self.b, self.margin = float(a), float(b), float(margin)
        self._dS = [self._S]
        for _ in range(4):
            self._dS.append(self._dS[-1].deriv())

    def eval(self, t, order=0):
        t = np.asarray(t, dtype=float)
        rise = (t > self.a) & (t < self.a + self.margin)
        fall = (t > self.b - self.margin) & (t < self.b)
        flat = (t >= self.a + self.margin) & (t <= self.b - self.margin)
        out = np.zeros_like(t)
        if order == 0:
            out[flat] = 1.0
        p = self._dS[order]
        if np.any(rise):
            out[rise] = p((t[rise] - self.a) / self.margin) / self.margin**order
        if np.any(fall):
            sgn = (-1.0) ** order
            out[fall] = sgn * p((self.b - t[fall]) / self.margin) / self.margin**order
        return out


def box_window(box, margin, name=None):
    """Tensor product of axis windows: smooth cutoff supported in the box."""
    box = np.asarray(box, dtype=float)
    n = box.shape[0]
    axes = [_AxisWindow(a, b, margin) for a, b in box]

    def val(X):
        out = np.ones(X.shape[0])
        for i, ax in enumerate(axes):
            out = out * ax.eval(X[:, i])
        return out

    def deriv(alpha, X):
        out = np.ones(X.shape[0])
        for i, (ax, a) in enumerate(zip(axes, alpha)):
            out = out * ax.eval(X[:, i], order=a)
        return out

    return TestFunction(
        value=val,
        n=n,
        derivative=deriv,
        support_hint=SupportHint(box=box),
        name=name or "window",
    )


def singular_function(x0, exponent, r_plateau, r_support, name=None):
    """|x - x0|^exponent, smoothly truncated outside r_support.

    First-order derivatives are analytic; higher orders are unavailable
    (callers fall back to finite differences).
    """
    x0 = np.asarray(x0, dtype=float)
    n = x0.shape[0]
    kappa = float(exponent)
    if not 0 < r_plateau < r_support:
        raise ValueError("need 0 < r_plateau < r_support")
    margin = r_support - r_plateau
    win = _AxisWindow(-r_support, r_support, margin)

    def _cut(r, order=0):
        # radial window: 1 for r <= r_plateau, 0 for r >= r_support
        return win.eval(r, order=order)

    def val(X):
        r = np.linalg.norm(X - x0, axis=1)
        r_safe = np.where(r > 0, r, 1.0)
        out = np.where(r > 0, r_safe**kappa, np.inf if kappa < 0 else (0.0 if kappa > 0 else 1.0))
        return out * _cut(r)

    def deriv(alpha, X):
        if sum(alpha) != 1:
            raise ValueError("singular family supplies first derivatives only")
        i = list(alpha).index(1)
        r = np.linalg.norm(X - x0, axis=1)
        r_safe = np.where(r > 0, r, 1.0)
        xi = X[:, i] - x0[i]
        radial = kappa * r_safe ** (kappa - 2.0) * _cut(r) + r_safe ** (
            kappa - 1.0
        ) * _cut(r, order=1)
        return np.where(r > 0, radial * xi, 0.0)

    hint = SupportHint(
        box=np.stack([x0 - r_support, x0 + r_support], axis=1)
    )
    return TestFunction(value=val, n=n, derivative=deriv, support_hint=hint, name=name or "singular")
