"""Pointwise evaluation of the extension operator: mollified layer averages
f_k, their dyadic blend over the exterior set, the bounded-elementary
zero-extension path, and the atlas-glued operator for general domains.

All evaluators accept a single point or an (m, n) batch and are pure; the
infinite dyadic sum is an exact finite sum over the active partition slots.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .functions import SupportHint, TestFunction
from .geometry import ElementaryDomain, GeometryError
from .kernel import support_box
from .partition import DyadicPartition
from .quadrature import tensor_rule
from .util import as_points

_CHUNK_ELEMS = 1 << 21  # reflected-point rows x quadrature nodes per chunk


class StencilError(ValueError):
    """A finite-difference stencil straddles the domain boundary."""


_STENCILS = {
    1: ((-1, 1), (-0.5, 0.5)),
    2: ((-1, 0, 1), (1.0, -2.0, 1.0)),
    3: ((-2, -1, 1, 2), (-0.5, 1.0, -1.0, 0.5)),
}


def _tensor_stencil(alpha, h):
    """Offsets (S, n) and coefficients (S,) of the central-difference stencil
    for the mixed derivative D^alpha at step h."""
    n = len(alpha)
    offsets = np.zeros((1, n))
    coeffs = np.ones(1)
    for i, a in enumerate(alpha):
        if a == 0:
            continue
        offs, cfs = _STENCILS[a]
        new_off = []
        new_cf = []
        for o, c in zip(offs, cfs):
            block = offsets.copy()
            block[:, i] += o * h
            new_off.append(block)
            new_cf.append(coeffs * (c / h**a))
        offsets = np.concatenate(new_off, axis=0)
        coeffs = np.concatenate(new_cf)
    return offsets, coeffs


@dataclass(frozen=True)
class ExtensionOperator:
    """Extension across the graph of a Lipschitz subgraph domain."""

    dom: object  # SubgraphDomain
    mollifier: object
    part: DyadicPartition = None
    quad_q: int = 16
    check_reflection: bool = True
    _nodes: np.ndarray = field(default=None, repr=False)
    _womega: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.mollifier.n != self.dom.n:
            raise ValueError("mollifier dimension does not match the domain")
        if self.part is None:
            object.__setattr__(self, "part", DyadicPartition(self.dom))
        if self.part.dom is not self.dom:
            raise ValueError("partition is bound to a different domain")
        nodes, weights = tensor_rule(support_box(self.dom.n), self.quad_q)
        object.__setattr__(self, "_nodes", nodes)
        object.__setattr__(self, "_womega", weights * self.mollifier.eval(nodes))

    @property
    def l(self):
        return self.mollifier.l

    def _fk_rows(self, f, k, X):
        """f_k at (m,) layer indices and (m, n) points, all above the graph."""
        n = self.dom.n
        N = self._nodes.shape[0]
        out = np.empty(X.shape[0])
        step = max(1, _CHUNK_ELEMS // N)
        scale = 2.0 ** (-np.asarray(k, dtype=float))
        for i in range(0, X.shape[0], step):
            Xb = X[i : i + step]
            sb = scale[i : i + step]
            refl = np.empty((Xb.shape[0], N, n))
            refl[:, :, :-1] = Xb[:, None, :-1] - sb[:, None, None] * self._nodes[None, :, :-1]
            refl[:, :, -1] = (
                Xb[:, None, -1] - self.dom.A * sb[:, None] * self._nodes[None, :, -1]
            )
            flat = refl.reshape(-1, n)
            if self.check_reflection:
                rho = self.dom.signed_distance(flat)
                if np.any(rho >= 0):
                    bad = int(np.count_nonzero(rho >= 0))
                    raise GeometryError(
                        f"{bad} reflected quadrature nodes left the domain; "
                        "geometry constants are inconsistent"
                    )
            vals = np.asarray(f(flat), dtype=float).reshape(Xb.shape[0], N)
            out[i : i + step] = vals @ self._womega
        return out

    def f_k_eval(self, f, k, x):
        """Mollified layer average f_k(x)."""
        X, scalar = as_points(x, self.dom.n)
        k = np.broadcast_to(np.atleast_1d(np.asarray(k)), (X.shape[0],))
        out = self._fk_rows(f, k, X)
        return float(out[0]) if scalar else out

    def _exterior_values(self, f, X, rho):
        out = np.zeros(X.shape[0])
        todo = np.ones(X.shape[0], dtype=bool)
        hint = getattr(f, "support_hint", None)
        if hint is not None and hint.rho_bound is not None:
            todo &= rho <= 8.0 * hint.rho_bound
        if not np.any(todo):
            return out
        karr, psi = self.part.active_table(rho[todo])
        idx = np.flatnonzero(todo)
        acc = np.zeros(idx.shape[0])
        for s in range(karr.shape[1]):
            act = psi[:, s] != 0.0
            if not np.any(act):
                continue
            fk = self._fk_rows(f, karr[act, s], X[idx[act]])
            acc[act] += psi[act, s] * fk
        out[idx] = acc
        return out

    def extend(self, f, x):
        """Tf: the function itself below the graph (and on it, by continuity),
        the blended layer averages above."""
        X, scalar = as_points(x, self.dom.n)
        rho = self.dom.signed_distance(X)
        out = np.empty(X.shape[0])
        inside = rho <= 0
        if np.any(inside):
            out[inside] = np.asarray(f(X[inside]), dtype=float)
        if np.any(~inside):
            out[~inside] = self._exterior_values(f, X[~inside], rho[~inside])
        return float(out[0]) if scalar else out

    def derivative_batch(self, f, alpha, x, h, skip_invalid=True):
        """Central finite differences of Tf; analytic inside the domain when
        available. Returns (values, ok); stencils that straddle the boundary
        are marked invalid (or raise when skip_invalid is false)."""
        alpha = tuple(int(a) for a in alpha)
        if sum(alpha) > self.l:
            raise ValueError(f"derivative order {sum(alpha)} exceeds l={self.l}")
        X, scalar = as_points(x, self.dom.n)
        m = X.shape[0]
        if sum(alpha) == 0:
            vals = np.atleast_1d(self.extend(f, X))
            ok = np.ones(m, dtype=bool)
            return (float(vals[0]), True) if scalar else (vals, ok)
        rho = self.dom.signed_distance(X)
        vals = np.zeros(m)
        ok = np.zeros(m, dtype=bool)
        analytic = (rho < 0) & getattr(f, "has_derivative", False)
        if np.any(analytic):
            vals[analytic] = np.atleast_1d(f.d(alpha, X[analytic]))
            ok[analytic] = True
        rest = ~analytic
        if np.any(rest):
            offs, cfs = _tensor_stencil(alpha, h)
            pts = X[rest, None, :] + offs[None, :, :]
            flat = pts.reshape(-1, self.dom.n)
            rho_st = self.dom.signed_distance(flat).reshape(-1, offs.shape[0])
            all_out = np.all(rho_st > 0, axis=1)
            all_in = np.all(rho_st < 0, axis=1)
            valid = all_out | all_in
            if not skip_invalid and not np.all(valid):
                raise StencilError(
                    "finite-difference stencil straddles the boundary; shrink h or skip"
                )
            idx = np.flatnonzero(rest)[valid]
            if idx.size:
                sub = (X[idx, None, :] + offs[None, :, :]).reshape(-1, self.dom.n)
                tv = np.atleast_1d(self.extend(f, sub)).reshape(idx.size, offs.shape[0])
                vals[idx] = tv @ cfs
                ok[idx] = True
        return (float(vals[0]), bool(ok[0])) if scalar else (vals, ok)

    def derivative(self, f, alpha, x, h):
        """Pointwise D^alpha(Tf)(x); raises StencilError on straddling stencils."""
        val, ok = self.derivative_batch(f, alpha, x, h, skip_invalid=False)
        return val

    def audit(self, f, x):
        """Per-point evaluation record for the CLI: distance, active layers,
        partition weights, layer averages, and the extended value."""
        X, _ = as_points(x, self.dom.n)
        rho = self.dom.signed_distance(X)
        slots = self.part.max_active
        karr = np.zeros((X.shape[0], slots), dtype=int)
        psi = np.zeros((X.shape[0], slots))
        fk = np.full((X.shape[0], slots), np.nan)
        pos = rho > 0
        if np.any(pos):
            ka, ps = self.part.active_table(rho[pos])
            karr[pos], psi[pos] = ka, ps
            idx = np.flatnonzero(pos)
            for s in range(slots):
                act = ps[:, s] != 0.0
                if np.any(act):
                    fk[idx[act], s] = self._fk_rows(f, ka[act, s], X[idx[act]])
        tf = np.atleast_1d(self.extend(f, X))
        return {"rho": rho, "k": karr, "psi": psi, "fk": fk, "Tf": tf}


@dataclass(frozen=True)
class BoundedElementaryOperator:
    """Zero-extend from a bounded elementary domain to the subgraph of its
    McShane-extended graph, then extend across that graph."""

    elem: ElementaryDomain
    mollifier: object
    quad_q: int = 16
    partition_mode: str = "composition"
    mcshane_grid: int = 256
    op: ExtensionOperator = field(default=None, repr=False)

    def __post_init__(self):
        sub = self.elem.to_subgraph(self.mcshane_grid)
        part = DyadicPartition(sub, mode=self.partition_mode)
        object.__setattr__(
            self,
            "op",
            ExtensionOperator(dom=sub, mollifier=self.mollifier, part=part, quad_q=self.quad_q),
        )

    @property
    def dom(self):
        return self.op.dom

    def _check_support(self, f):
        hint = getattr(f, "support_hint", None)
        if hint is None or hint.box is None:
            raise GeometryError(
                "zero-extension requires a support_hint box strictly inside the chart box"
            )
        box = np.asarray(hint.box, dtype=float)
        for i, (a, b) in enumerate(self.elem.W_bounds):
            if not (box[i, 0] > a and box[i, 1] < b):
                raise GeometryError(
                    f"support touches lateral face of axis {i}; zero-extension is invalid"
                )
        if not box[-1, 0] > self.elem.floor:
            raise GeometryError("support touches the floor; zero-extension is invalid")

    def zero_extension(self, f):
        """f on the elementary domain, 0 on the rest of the extended subgraph."""
        elem = self.elem

        def val(X):
            out = np.zeros(X.shape[0])
            inside = elem.contains(X)
            if np.any(inside):
                out[inside] = np.asarray(f(X[inside]), dtype=float)
            return out

        deriv = None
        if getattr(f, "has_derivative", False):
            # valid because the support stays strictly inside the domain
            def deriv(alpha, X):
                out = np.zeros(X.shape[0])
                inside = elem.contains(X)
                if np.any(inside):
                    out[inside] = np.atleast_1d(f.d(alpha, X[inside]))
                return out

        hint = getattr(f, "support_hint", None)
        rho_bound = self.elem.D if hint is None else (hint.rho_bound or self.elem.D)
        return TestFunction(
            value=val,
            n=elem.n,
            derivative=deriv,
            support_hint=SupportHint(
                box=None if hint is None else hint.box, rho_bound=rho_bound
            ),
            name=f"{getattr(f, 'name', 'f')}|0",
        )

    def extend(self, f, x):
        self._check_support(f)
        return self.op.extend(self.zero_extension(f), x)

    def derivative_batch(self, f, alpha, x, h, skip_invalid=True):
        self._check_support(f)
        return self.op.derivative_batch(self.zero_extension(f), alpha, x, h, skip_invalid)


@dataclass(frozen=True)
class GeneralExtensionOperator:
    """Atlas-glued operator: weighted sum over charts of per-chart extensions
    of the cut-off function, conjugated by the chart isometries."""

    atlas: object
    mollifier: object
    cutoffs: object = None
    quad_q: int = 16
    partition_mode: str = "composition"
    mcshane_grid: int = 256
    chart_ops: tuple = field(default=None, repr=False)

    def __post_init__(self):
        if self.cutoffs is None:
            from .partition import AtlasCutoffs

            object.__setattr__(self, "cutoffs", AtlasCutoffs(self.atlas))
        ops = []
        for ch in self.atlas.charts:
            if ch.kind == "interior":
                ops.append(None)
                continue
            elem = ElementaryDomain(
                n=self.atlas.n,
                W_bounds=tuple(ch.box[:-1]),
                floor=ch.box[-1][0],
                phi=ch.phi,
                d=self.atlas.d,
                D=self.atlas.D,
                M=self.atlas.M,
            )
            ops.append(
                BoundedElementaryOperator(
                    elem=elem,
                    mollifier=self.mollifier,
                    quad_q=self.quad_q,
                    partition_mode=self.partition_mode,
                    mcshane_grid=self.mcshane_grid,
                )
            )
        object.__setattr__(self, "chart_ops", tuple(ops))

    def _chart_term(self, j, f, X):
        """T_j(f psi_j) at world points X."""
        ch = self.atlas.charts[j]
        cut = self.cutoffs

        def g_world(P):
            return np.asarray(f(P), dtype=float) * cut.cutoff(j, P)

        if self.chart_ops[j] is None:
            # interior chart: plain zero-extension from the cuboid
            out = np.zeros(X.shape[0])
            inside = ch.contains(X)
            if np.any(inside):
                out[inside] = g_world(X[inside])
            return out
        bop = self.chart_ops[j]

        def g_frame_val(Y):
            out = np.zeros(Y.shape[0])
            inside = bop.elem.contains(Y)
            if np.any(inside):
                out[inside] = g_world(ch.from_frame(Y[inside]))
            return out

        # the cutoff keeps the support d/2 clear of every chart face
        m = self.atlas.d / 2.0
        box = np.array([[a + m / 2, b - m / 2] for a, b in ch.box])
        g = TestFunction(
            value=g_frame_val,
            n=self.atlas.n,
            support_hint=SupportHint(box=box, rho_bound=self.atlas.D),
            name=f"chart{j}",
        )
        Y = ch.to_frame(X)
        return np.atleast_1d(bop.op.extend(g, Y))

    def extend(self, f, x):
        X, scalar = as_points(x, self.atlas.n)
        psis = self.cutoffs.cutoff_table(X)
        out = np.zeros(X.shape[0])
        for j in range(self.atlas.s):
            mask = psis[:, j] != 0.0
            if not np.any(mask):
                continue
            out[mask] += psis[mask, j] * self._chart_term(j, f, X[mask])
        return float(out[0]) if scalar else out
