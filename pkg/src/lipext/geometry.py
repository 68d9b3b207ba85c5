"""Domain geometry: Lipschitz subgraphs, dyadic layers, bounded elementary
domains, atlases of rotated cuboid charts, and the McShane extension.

Conventions: a point is a 1-d array of length n or an (m, n) batch. The last
coordinate is the "vertical" one; a subgraph domain is the set below the graph
of its boundary function.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .util import as_points


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if not self.radius > 0:
            raise GeometryError(f"ball radius must be positive, got {self.radius}")


@dataclass(frozen=True)
class SubgraphDomain:
    """Open set below the graph of a Lipschitz function on R^(n-1).

    phi maps an (m, n-1) array to (m,). M is the user-declared Lipschitz
    bound; it is trusted but can be spot-checked. The reflection constants
    are derived: A = 16(M+1), b = 10A. A can only differ from that value
    through a debug override (used by sabotage tests).
    """

    n: int
    phi: Callable[[np.ndarray], np.ndarray]
    M: float
    A: float = field(default=None)
    b: float = field(default=None)
    name: str = "subgraph"
    debug: bool = False

    def __post_init__(self):
        if not 1 <= self.n <= 3:
            raise GeometryError(f"dimension must be 1..3, got {self.n}")
        if self.M < 0:
            raise GeometryError("Lipschitz bound must be nonnegative")
        a = 16.0 * (self.M + 1.0)
        if self.A is None:
            object.__setattr__(self, "A", a)
        elif self.A != a and not self.debug:
            raise GeometryError("A must equal 16(M+1); use with_constants for debug overrides")
        object.__setattr__(self, "b", 10.0 * self.A)

    def with_constants(self, A):
        """Debug copy with a sabotaged reflection constant."""
        return replace(self, A=float(A), b=None, debug=True)

    def signed_distance(self, x):
        """rho_n(x) = x_n - phi(x-bar): positive above the graph, negative below."""
        X, scalar = as_points(x, self.n)
        rho = X[:, -1] - self.phi(X[:, :-1])
        return float(rho[0]) if scalar else rho

    def contains(self, x):
        """True for points strictly below the graph."""
        rho = self.signed_distance(x)
        return rho < 0

    def layer_index(self, x):
        """The unique k with 2^(-k-1) < rho_n(x) <= 2^(-k); requires rho_n > 0."""
        X, scalar = as_points(x, self.n)
        rho = X[:, -1] - self.phi(X[:, :-1])
        if np.any(rho <= 0):
            raise GeometryError("layer_index requires points strictly above the graph")
        k = np.floor(-np.log2(rho)).astype(int)
        # fix rounding at dyadic boundaries
        for _ in range(2):
            k = np.where(rho > 2.0 ** (-k.astype(float)), k - 1, k)
            k = np.where(rho <= 2.0 ** (-(k + 1).astype(float)), k + 1, k)
        bad = (rho > 2.0 ** (-k.astype(float))) | (rho <= 2.0 ** (-(k + 1).astype(float)))
        if np.any(bad):
            raise GeometryError("layer index search failed to converge")
        return int(k[0]) if scalar else k

    def layer_contains(self, k, x, which):
        """Membership in G_k, its tilde-neighborhood, or the interior band
        Omega_k-tilde, by the defining distance inequalities."""
        X, scalar = as_points(x, self.n)
        rho = X[:, -1] - self.phi(X[:, :-1])
        k = np.asarray(k)
        if which == "Gk":
            res = (2.0 ** (-k - 1.0) < rho) & (rho <= 2.0 ** (-k * 1.0))
        elif which == "GkTilde":
            res = (2.0 ** (-k - 2.0) < rho) & (rho <= 2.0 ** (-k + 1.0))
        elif which == "OmegaKTilde":
            res = (rho < 0) & (2.0 ** (-k - 2.0) < np.abs(rho)) & (
                np.abs(rho) <= self.b * 2.0 ** (-k + 1.0)
            )
        else:
            raise ValueError(f"unknown layer family {which!r}")
        return bool(res[0]) if scalar else res

    def reflected_point(self, x, z, k):
        """(x-bar - 2^-k z-bar, x_n - A 2^-k z_n)."""
        X, xs = as_points(x, self.n)
        Z, zs = as_points(z, self.n)
        if X.shape[0] != Z.shape[0]:
            if X.shape[0] == 1:
                X = np.broadcast_to(X, Z.shape)
            elif Z.shape[0] == 1:
                Z = np.broadcast_to(Z, X.shape)
            else:
                raise ValueError("x and z batches must match")
        scale = 2.0 ** (-np.asarray(k, dtype=float))
        scale = np.broadcast_to(np.atleast_1d(scale), (max(X.shape[0], Z.shape[0]),))
        out = np.empty((X.shape[0], self.n))
        out[:, :-1] = X[:, :-1] - scale[:, None] * Z[:, :-1]
        out[:, -1] = X[:, -1] - self.A * scale * Z[:, -1]
        return out[0] if (xs and zs) else out

    def spot_check_lipschitz(self, bounds, pairs=1000, seed=0):
        """Sample random pairs in the given (n-1)-box and check the declared M.

        Returns the largest observed difference quotient."""
        if self.n == 1:
            return 0.0
        rng = np.random.default_rng(seed)
        lo = np.array([b[0] for b in bounds])
        hi = np.array([b[1] for b in bounds])
        X = rng.uniform(lo, hi, size=(pairs, self.n - 1))
        Y = rng.uniform(lo, hi, size=(pairs, self.n - 1))
        d = np.linalg.norm(X - Y, axis=1)
        ok = d > 0
        q = np.abs(self.phi(X[ok]) - self.phi(Y[ok])) / d[ok]
        return float(q.max()) if q.size else 0.0


def mcshane_extend(phi, bounds, M, grid_points=256):
    """Lipschitz extension F(x) = min over a grid W' of W of phi(y) + M |x-y|.

    The grid infimum agrees with phi at grid points and is M-Lipschitz on all
    of R^(n-1); it upper-bounds the true McShane extension.
    """
    dims = len(bounds)
    if dims == 0:
        c = float(np.asarray(phi(np.zeros((1, 0))))[0])
        return lambda X: np.full(np.asarray(X).shape[0], c)
    axes = [np.linspace(a, b, grid_points) for a, b in bounds]
    if dims == 1:
        # 1-d base: the lower envelope of the cones phi_j + M|x - y_j| splits
        # at x into a left branch min(phi_j - M y_j) + M x and a right branch
        # min(phi_j + M y_j) - M x; prefix/suffix minima make each lookup
        # O(log G) while producing exactly the brute-force minimum.
        y = axes[0]
        phi_y = np.asarray(phi(y[:, None]), dtype=float)
        Mf = float(M)
        left = np.minimum.accumulate(phi_y - Mf * y)
        right = np.minimum.accumulate((phi_y + Mf * y)[::-1])[::-1]

        def F(X, _y=y, _left=left, _right=right, _M=Mf):
            x = np.asarray(X, dtype=float)[:, 0]
            idx = np.searchsorted(_y, x)
            out = np.full(x.shape[0], np.inf)
            has_left = idx > 0
            out[has_left] = _left[idx[has_left] - 1] + _M * x[has_left]
            has_right = idx < _y.shape[0]
            np.minimum(
                out,
                np.where(has_right, _right[np.minimum(idx, _y.shape[0] - 1)], np.inf)
                - _M * x,
                out=out,
            )
            return out

        return F

    grids = np.meshgrid(*axes, indexing="ij")
    Y = np.stack([g.ravel() for g in grids], axis=-1)
    if Y.shape[0] == 0:
        raise GeometryError("empty McShane sample grid")
    phi_y = np.asarray(phi(Y), dtype=float)

    def F(X, _Y=Y, _phi=phi_y, _M=float(M)):
        X = np.asarray(X, dtype=float)
        out = np.empty(X.shape[0])
        step = max(1, int(2e7 // max(_Y.shape[0], 1)))
        for i in range(0, X.shape[0], step):
            blk = X[i : i + step]
            d = np.linalg.norm(blk[:, None, :] - _Y[None, :, :], axis=2)
            out[i : i + step] = np.min(_phi[None, :] + _M * d, axis=1)
        return out

    return F


@dataclass(frozen=True)
class ElementaryDomain:
    """Bounded Lipschitz subgraph over a base box W with a flat floor.

    W_bounds: (n-1) pairs (a_i, b_i); the domain is
    {x-bar in W, floor < x_n < phi(x-bar)} with a_n + d < phi and diam <= D.
    """

    n: int
    W_bounds: tuple
    floor: float
    phi: Callable[[np.ndarray], np.ndarray]
    d: float
    D: float
    M: float
    name: str = "elementary"

    def __post_init__(self):
        if self.d <= 0 or self.D <= 0:
            raise GeometryError("parameters d, D must be positive")

    @property
    def box_bounds(self):
        """Bounding box (n pairs) of the chart cuboid, top at floor + D."""
        return tuple(self.W_bounds) + ((self.floor, self.floor + self.D),)

    def contains(self, x):
        X, scalar = as_points(x, self.n)
        xb = X[:, :-1]
        inside_w = np.ones(X.shape[0], dtype=bool)
        for i, (a, b) in enumerate(self.W_bounds):
            inside_w &= (xb[:, i] > a) & (xb[:, i] < b)
        res = inside_w & (X[:, -1] > self.floor)
        if np.any(inside_w):
            top = np.full(X.shape[0], -np.inf)
            top[inside_w] = self.phi(xb[inside_w])
            res &= X[:, -1] < top
        return bool(res[0]) if scalar else res

    def to_subgraph(self, grid_points=256):
        """Unbounded subgraph domain over the McShane-extended graph."""
        F = mcshane_extend(self.phi, self.W_bounds, self.M, grid_points)
        return SubgraphDomain(n=self.n, phi=F, M=self.M, name=self.name + "-extended")

    def validate(self, samples=2000, seed=0):
        """Sampled invariant checks; returns a list of failure strings."""
        rng = np.random.default_rng(seed)
        failures = []
        if self.n > 1:
            lo = np.array([b[0] for b in self.W_bounds])
            hi = np.array([b[1] for b in self.W_bounds])
            Xb = rng.uniform(lo, hi, size=(samples, self.n - 1))
        else:
            Xb = np.zeros((1, 0))
        ph = np.asarray(self.phi(Xb), dtype=float)
        if np.any(ph <= self.floor + self.d):
            failures.append("floor margin violated: phi <= floor + d at sampled points")
        span = np.sqrt(
            sum((b - a) ** 2 for a, b in self.W_bounds) + float((ph.max() - self.floor) ** 2)
        )
        if span > self.D:
            failures.append(f"sampled diameter {span:.3g} exceeds D={self.D}")
        if self.n > 1:
            sub = SubgraphDomain(self.n, self.phi, self.M)
            q = sub.spot_check_lipschitz(self.W_bounds, pairs=samples, seed=seed)
            if q > self.M * (1 + 1e-9):
                failures.append(f"sampled Lipschitz quotient {q:.3g} exceeds M={self.M}")
        return failures


@dataclass(frozen=True)
class Chart:
    """Rotated cuboid V with isometry lambda(x) = rot @ x + shift mapping V to
    an axis-aligned open box in the chart frame."""

    box: tuple  # n pairs in chart frame
    rot: np.ndarray
    shift: np.ndarray
    kind: str  # "interior" | "boundary"
    phi: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        object.__setattr__(self, "rot", np.asarray(self.rot, dtype=float))
        object.__setattr__(self, "shift", np.asarray(self.shift, dtype=float))
        if self.kind not in ("interior", "boundary"):
            raise GeometryError(f"unknown chart kind {self.kind!r}")
        if self.kind == "boundary" and self.phi is None:
            raise GeometryError("boundary chart requires a graph function")

    def to_frame(self, x):
        X = np.atleast_2d(np.asarray(x, dtype=float))
        return X @ self.rot.T + self.shift

    def from_frame(self, y):
        Y = np.atleast_2d(np.asarray(y, dtype=float))
        return (Y - self.shift) @ self.rot

    def frame_box_contains(self, y, margin=0.0):
        Y = np.atleast_2d(np.asarray(y, dtype=float))
        res = np.ones(Y.shape[0], dtype=bool)
        for i, (a, b) in enumerate(self.box):
            res &= (Y[:, i] > a + margin) & (Y[:, i] < b - margin)
        return res

    def contains(self, x, margin=0.0):
        return self.frame_box_contains(self.to_frame(x), margin)


@dataclass(frozen=True)
class Atlas:
    """Finite family of cuboid charts covering an open set."""

    n: int
    charts: tuple
    d: float
    D: float
    M: float
    name: str = "atlas"

    @property
    def s(self):
        return len(self.charts)

    def chart_map(self, j, x):
        X, scalar = as_points(x, self.n)
        out = self.charts[j].to_frame(X)
        return out[0] if scalar else out

    def chart_unmap(self, j, y):
        Y, scalar = as_points(y, self.n)
        out = self.charts[j].from_frame(Y)
        return out[0] if scalar else out

    def bounding_box(self):
        los, his = [], []
        for ch in self.charts:
            corners = np.array(
                np.meshgrid(*[(a, b) for a, b in ch.box], indexing="ij")
            ).reshape(self.n, -1).T
            world = ch.from_frame(corners)
            los.append(world.min(axis=0))
            his.append(world.max(axis=0))
        return np.stack([np.min(los, axis=0), np.max(his, axis=0)], axis=1)


@dataclass
class AtlasReport:
    multiplicity: int
    failures: list
    chart_kinds: list

    @property
    def valid(self):
        return not self.failures


def validate_atlas(atlas, samples=100_000, seed=0, omega_contains=None):
    """Sampled structural checks for an atlas. Never raises; returns a report.

    omega_contains, when given, is a membership predicate for the open set the
    atlas is supposed to cover; coverage failures are then reported too.
    """
    failures = []
    for j, ch in enumerate(atlas.charts):
        for i, (a, b) in enumerate(ch.box):
            if not b > a + atlas.d:
                failures.append(f"chart {j}: axis {i} side {b - a:.3g} not > d={atlas.d}")
        corners = np.array(
            np.meshgrid(*[(a, b) for a, b in ch.box], indexing="ij")
        ).reshape(atlas.n, -1).T
        diam = np.linalg.norm(corners[:, None, :] - corners[None, :, :], axis=2).max()
        if diam > atlas.D:
            failures.append(f"chart {j}: diameter {diam:.3g} exceeds D={atlas.D}")
        if any(b - a <= 2 * atlas.d for a, b in ch.box):
            failures.append(f"chart {j}: shrunk cuboid (V_j)_d is empty")
        R = ch.rot
        if not np.allclose(R @ R.T, np.eye(atlas.n), atol=1e-12):
            failures.append(f"chart {j}: map is not an isometry")
        if ch.kind == "boundary":
            W = ch.box[:-1]
            rng = np.random.default_rng(seed + j)
            if atlas.n > 1:
                lo = np.array([w[0] for w in W])
                hi = np.array([w[1] for w in W])
                U = rng.uniform(lo, hi, size=(512, atlas.n - 1))
            else:
                U = np.zeros((1, 0))
            ph = np.asarray(ch.phi(U), dtype=float)
            if np.any(ph <= ch.box[-1][0] + atlas.d):
                failures.append(f"chart {j}: graph does not clear the floor margin d")

    bbox = atlas.bounding_box()
    rng = np.random.default_rng(seed)
    P = rng.uniform(bbox[:, 0], bbox[:, 1], size=(samples, atlas.n))
    counts = np.zeros(samples, dtype=int)
    for ch in atlas.charts:
        counts += ch.contains(P)
    mult = int(counts.max()) if samples else 0
    if omega_contains is not None:
        inside = omega_contains(P)
        covered = np.zeros(samples, dtype=bool)
        for ch in atlas.charts:
            covered |= ch.contains(P, margin=atlas.d)
        miss = inside & ~covered
        if np.any(miss):
            failures.append(
                f"coverage: {int(miss.sum())} of {int(inside.sum())} sampled interior "
                "points lie outside every shrunk chart"
            )
    return AtlasReport(multiplicity=mult, failures=failures, chart_kinds=[c.kind for c in atlas.charts])


# ---------------------------------------------------------------------------
# built-in named domains


def _phi_flat(X):
    return np.zeros(np.asarray(X).shape[0])


def _phi_cone(X):
    return np.linalg.norm(np.atleast_2d(X), axis=1)


def _phi_wedge(X):
    return -np.linalg.norm(np.atleast_2d(X), axis=1)


def _phi_sine(X):
    X = np.atleast_2d(X)
    if X.shape[1] == 0:
        return np.zeros(X.shape[0])
    return np.sin(X[:, 0])


def _phi_wavy_top(X):
    X = np.atleast_2d(X)
    if X.shape[1] == 0:
        return np.ones(X.shape[0])
    return 1.0 + 0.2 * np.sin(2.0 * np.pi * X[:, 0])


def unit_square_atlas():
    """Four rotated corner charts covering the open unit square.

    Each chart frame has the corner wedge as the subgraph of sqrt(2) - |u|
    over u in (-1/2, 1/2), with the chart box keeping the two far edges of
    the square outside.
    """
    r2 = np.sqrt(2.0)
    box = ((-0.5, 0.5), (0.51, 1.6))

    def corner_phi(U):
        U = np.atleast_2d(U)
        return r2 - np.abs(U[:, 0])

    charts = []
    for corner, g, tvec in [
        ((1.0, 1.0), (-1, -1), (1, -1)),
        ((0.0, 0.0), (1, 1), (1, -1)),
        ((1.0, 0.0), (-1, 1), (1, 1)),
        ((0.0, 1.0), (1, -1), (1, 1)),
    ]:
        c = np.asarray(corner, dtype=float)
        gv = np.asarray(g, dtype=float) / r2
        tv = np.asarray(tvec, dtype=float) / r2
        rot = np.stack([tv, -gv])
        shift = np.array([-tv @ c, r2 + gv @ c])
        charts.append(Chart(box=box, rot=rot, shift=shift, kind="boundary", phi=corner_phi))
    return Atlas(n=2, charts=tuple(charts), d=0.1, D=2.0, M=1.0, name="unit-square-atlas")


def unit_square_contains(X):
    X = np.atleast_2d(X)
    return np.all((X > 0.0) & (X < 1.0), axis=1)


def named_domain(name, n=2):
    """Built-in domain library used by the experiment harness."""
    if name == "halfspace":
        return SubgraphDomain(n=n, phi=_phi_flat, M=0.0, name="halfspace")
    if name == "cone":
        return SubgraphDomain(n=n, phi=_phi_cone, M=1.0, name="cone")
    if name == "wedge":
        return SubgraphDomain(n=n, phi=_phi_wedge, M=1.0, name="wedge")
    if name == "sine":
        return SubgraphDomain(n=n, phi=_phi_sine, M=1.0, name="sine")
    if name == "square-subgraph":
        return ElementaryDomain(
            n=n,
            W_bounds=tuple((0.0, 1.0) for _ in range(n - 1)),
            floor=0.0,
            phi=_phi_wavy_top,
            d=0.5,
            D=2.0,
            M=1.3,
            name="square-subgraph",
        )
    if name == "unit-square-atlas":
        if n != 2:
            raise GeometryError("the unit-square atlas is two-dimensional")
        return unit_square_atlas()
    raise GeometryError(f"unknown domain {name!r}")
