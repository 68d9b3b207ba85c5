"""Experiment harness: invariant suite, delta sweep with frozen baselines,
and the atlas demonstration. All runs are seed-deterministic and reduce to
CSV rows plus a JSON summary; pass/fail derives only from recorded numbers.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .config import ConfigError
from .extension import BoundedElementaryOperator, ExtensionOperator, GeneralExtensionOperator
from .functions import (
    SupportHint,
    TestFunction,
    box_window,
    gaussian_function,
    monomial_function,
    product,
    singular_function,
    trig_function,
)
from .geometry import (
    ElementaryDomain,
    GeometryError,
    SubgraphDomain,
    unit_square_atlas,
    unit_square_contains,
    validate_atlas,
)
from .kernel import build_mollifier, support_box
from .norms import (
    BallGrid,
    BallSampler,
    MorreyParams,
    _reduce,
    effective_delta,
    elementary_region,
    morrey_norm,
    power_weight,
    rn_region,
)
from .partition import DyadicPartition
from .quadrature import tensor_rule
from .util import multi_indices


@dataclass
class ExperimentReport:
    name: str
    rows: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(r.get("ok", True) for r in self.rows)

    def add(self, **row):
        self.rows.append(row)
        return row

    def write(self, out_dir, plots=False):
        os.makedirs(out_dir, exist_ok=True)
        paths = {}
        if self.rows:
            cols = []
            for r in self.rows:
                cols.extend(k for k in r if k not in cols)
            csv_path = os.path.join(out_dir, f"{self.name}.csv")
            with open(csv_path, "w", newline="") as fh:
                w = csv.DictWriter(fh, fieldnames=cols, restval="")
                w.writeheader()
                w.writerows(self.rows)
            paths["csv"] = csv_path
        summary = dict(self.summary, passed=self.passed)
        json_path = os.path.join(out_dir, f"{self.name}.json")
        with open(json_path, "w") as fh:
            json.dump(summary, fh, indent=2, default=_jsonable)
        paths["json"] = json_path
        if plots:
            svg = self._plot(out_dir)
            if svg:
                paths["svg"] = svg
        return paths

    def _plot(self, out_dir):
        try:
            import matplotlib

            matplotlib.use("Agg")
            import matplotlib.pyplot as plt
        except ImportError:
            return None
        series = {}
        for r in self.rows:
            if "delta" not in r or "ratio" not in r:
                continue
            key = (r.get("lam"), r.get("p"))
            series.setdefault(key, []).append((r["delta"], r["ratio"]))
        if not series:
            return None
        fig, ax = plt.subplots()
        for (lam, p), pts in sorted(series.items()):
            pts = sorted(pts)
            ax.plot([d for d, _ in pts], [v for _, v in pts], marker="o", label=f"lam={lam}, p={p}")
        ax.set_xlabel("delta")
        ax.set_ylabel("ratio")
        ax.set_xscale("log")
        ax.legend(fontsize=7)
        path = os.path.join(out_dir, f"{self.name}.svg")
        fig.savefig(path)
        plt.close(fig)
        return path


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj)}")


# ---------------------------------------------------------------------------
# built-in function family


def build_function_family(config, elem):
    """Test functions on a bounded elementary domain, each damped by a smooth
    window so the zero-extension precondition (support strictly inside the
    chart box) holds and analytic derivatives exist everywhere."""
    n = elem.n
    box = np.asarray(elem.box_bounds, dtype=float)
    shrink = 0.08 * (box[:, 1] - box[:, 0])
    wbox = np.stack([box[:, 0] + shrink, box[:, 1] - shrink], axis=1)
    win = box_window(wbox, margin=0.12 * float(np.min(wbox[:, 1] - wbox[:, 0])))
    mid = 0.5 * (box[:, 0] + box[:, 1])
    fam = []
    if "monomials" in config.functions:
        for alpha in multi_indices(n, config.l):
            fam.append(product(monomial_function(alpha), win))
    if "gaussian" in config.functions:
        fam.append(product(gaussian_function(mid, 0.35 * elem.D), win))
    if "trig" in config.functions:
        fam.append(product(trig_function(np.full(n, 2.0), np.full(n, 0.7)), win))
    if "singular" in config.functions:
        # Morrey-critical profile |x - x0|^kappa anchored at a graph point
        xb = mid[:-1].reshape(1, -1)
        x0 = np.append(mid[:-1], float(np.asarray(elem.phi(xb))[0]))
        sing = singular_function(x0, -0.5, r_plateau=0.05 * elem.D, r_support=0.9 * elem.D)
        fam.append(product(sing, win, name="singular*window"))
    return fam


def _interior_points(dom, rng, m, span=4.0, rho_range=(1e-6, 2.0)):
    """Points strictly below the graph at controlled depth."""
    Xb = rng.uniform(-span, span, size=(m, dom.n - 1))
    depth = 10 ** rng.uniform(np.log10(rho_range[0]), np.log10(rho_range[1]), m)
    top = np.asarray(dom.phi(Xb), dtype=float)
    return np.column_stack([Xb, top - depth])


def _exterior_points(dom, rng, m, span=4.0, log2_rho=(-12.0, 3.0)):
    Xb = rng.uniform(-span, span, size=(m, dom.n - 1))
    rho = 2.0 ** rng.uniform(log2_rho[0], log2_rho[1], m)
    top = np.asarray(dom.phi(Xb), dtype=float)
    return np.column_stack([Xb, top + rho])


# ---------------------------------------------------------------------------
# invariant suite


def _suite_domain(config):
    dom = config.make_domain()
    if isinstance(dom, ElementaryDomain):
        dom = dom.to_subgraph()
    if not isinstance(dom, SubgraphDomain):
        raise ConfigError(
            f"the invariant suite needs a subgraph or elementary domain, not {config.domain!r}"
        )
    if config.debug_A is not None:
        dom = dom.with_constants(config.debug_A)
    return dom


def run_invariant_suite(config):
    """Kernel, partition, inclusion, identity, reproduction, locality,
    support-decay, and boundary-consistency checks on the configured domain."""
    rep = ExperimentReport(name="invariants")
    rng = np.random.default_rng(config.seed)
    dom = _suite_domain(config)
    mol = build_mollifier(config.dim, config.l)
    part = DyadicPartition(dom, mode=config.partition_mode)
    op = ExtensionOperator(dom=dom, mollifier=mol, part=part, quad_q=config.quadrature_order)

    res_build = max(mol.moment_residuals().values())
    rep.add(check="kernel_moments_build", value=res_build, threshold=1e-8, ok=res_build <= 1e-8)
    res_dbl = max(mol.moment_residuals(2 * mol.build_quadrature).values())
    rep.add(check="kernel_moments_doubled", value=res_dbl, threshold=1e-4, ok=res_dbl <= 1e-4)

    X = _exterior_points(dom, rng, 10_000, log2_rho=(-20.0, 10.0))
    err = float(np.max(np.abs(part.sum_at(X) - 1.0)))
    rep.add(check="partition_sum", value=err, threshold=1e-12, ok=err <= 1e-12)
    Xi = _interior_points(dom, rng, 2000)
    on_omega = float(np.max(np.abs(part.sum_at(Xi))))
    rep.add(check="partition_zero_on_domain", value=on_omega, threshold=0.0, ok=on_omega == 0.0)
    _, psi = part.active_table(dom.signed_distance(X))
    active = int(np.max(np.count_nonzero(psi, axis=1)))
    rep.add(check="partition_active_count", value=active, threshold=part.max_active,
            ok=active <= part.max_active)

    viol = inclusion_violations(dom, rng, pairs=10_000)
    rep.add(check="inclusion", value=viol, threshold=0, ok=viol == 0)

    f = gaussian_function(np.zeros(dom.n), 1.5)
    try:
        ident = bool(np.array_equal(op.extend(f, Xi), f(Xi)))
        rep.add(check="identity_bit_exact", value=float(ident), threshold=1.0, ok=ident)

        worst = 0.0
        Xr = _exterior_points(dom, rng, 1000)
        for alpha in multi_indices(dom.n, config.l):
            g = monomial_function(alpha)
            gmax = float(np.max(np.abs(g(Xr))))
            e = float(np.max(np.abs(op.extend(g, Xr) - g(Xr)))) / (1.0 + gmax)
            worst = max(worst, e)
        rep.add(check="polynomial_reproduction", value=worst, threshold=1e-6, ok=worst <= 1e-6)

        loc = locality_gap(op, rng, points=200)
        rep.add(check="locality", value=loc, threshold=1e-15, ok=loc <= 1e-15)

        dec = support_decay_max(op, rng, points=200)
        rep.add(check="support_decay", value=dec, threshold=0.0, ok=dec == 0.0)

        bc = boundary_consistency_gap(op, f, rng, points=500)
        rep.add(check="boundary_consistency", value=bc, threshold=1e-3, ok=bc <= 1e-3)
    except GeometryError as exc:
        rep.add(check="reflection_assertion", value=1.0, threshold=0.0, ok=False,
                detail=str(exc))
    rep.summary = {
        "domain": config.domain,
        "debug_A": config.debug_A,
        "checks": {r["check"]: bool(r["ok"]) for r in rep.rows},
    }
    return rep


def inclusion_violations(dom, rng, pairs=100_000):
    """Random (point in G-tilde_k, kernel node) pairs whose reflected point
    leaves the interior band Omega-tilde_k."""
    nodes, _ = tensor_rule(support_box(dom.n), 8)
    m = pairs
    Xb = rng.uniform(-4.0, 4.0, size=(m, dom.n - 1))
    k = rng.integers(-3, 20, size=m)
    # rho anywhere in the admissible band (2^-k-2, 2^-k+1]
    rho = 2.0 ** (-k - 2.0) + rng.uniform(0.0, 1.0, m) * (2.0 ** (-k + 1.0) - 2.0 ** (-k - 2.0))
    top = np.asarray(dom.phi(Xb), dtype=float)
    X = np.column_stack([Xb, top + rho])
    Z = nodes[rng.integers(0, nodes.shape[0], size=m)]
    refl = dom.reflected_point(X, Z, k)
    ok = dom.layer_contains(k, refl, "OmegaKTilde")
    return int(np.count_nonzero(~ok))


def locality_gap(op, rng, points=200):
    """Layer averages of two functions agreeing on Omega-tilde_k must agree."""
    dom = op.dom
    worst = 0.0
    f = trig_function(np.full(dom.n, 1.3))
    for k in (-2, 0, 5, 12):
        Xb = rng.uniform(-3.0, 3.0, size=(points, dom.n - 1))
        rho = 2.0 ** rng.uniform(-k - 2.0, -k + 1.0, points)
        X = np.column_stack([Xb, np.asarray(dom.phi(Xb), dtype=float) + rho])

        def g(P, k=k):
            bump = np.where(dom.layer_contains(k, P, "OmegaKTilde"), 0.0, 1.0)
            return np.asarray(f(P)) + bump

        a = op.f_k_eval(f, k, X)
        b = op.f_k_eval(TestFunction(value=g, n=dom.n), k, X)
        worst = max(worst, float(np.max(np.abs(a - b))))
    return worst


def support_decay_max(op, rng, points=200, D=1.0):
    """|Tf| at rho > 8D for f supported in {|rho| < D}: exact zero, with and
    without the support short-circuit."""
    dom = op.dom

    def band(X):
        r = dom.signed_distance(X)
        return np.where(np.abs(r) < D, np.cos(np.abs(r) * np.pi / (2 * D)) ** 2, 0.0)

    with_hint = TestFunction(value=band, n=dom.n, support_hint=SupportHint(rho_bound=D))
    without = TestFunction(value=band, n=dom.n)
    Xb = rng.uniform(-3.0, 3.0, size=(points, dom.n - 1))
    rho = 8.0 * D + 10 ** rng.uniform(-2, 1, points)
    X = np.column_stack([Xb, np.asarray(dom.phi(Xb), dtype=float) + rho])
    a = np.max(np.abs(op.extend(with_hint, X)))
    b = np.max(np.abs(op.extend(without, X)))
    return float(max(a, b))


def boundary_consistency_gap(op, f, rng, points=500, eps=1e-6):
    """Tf just above the graph versus f on the graph."""
    dom = op.dom
    Xb = rng.uniform(-3.0, 3.0, size=(points, dom.n - 1))
    top = np.asarray(dom.phi(Xb), dtype=float)
    above = np.column_stack([Xb, top + eps])
    at = np.column_stack([Xb, top])
    return float(np.max(np.abs(op.extend(f, above) - f(at))))


# ---------------------------------------------------------------------------
# delta sweep


def run_delta_sweep(config, baseline_path=None):
    """Empirical boundedness constants on the bounded elementary domain.

    For each family member f, multi-index alpha, weight r^lambda, p and
    delta: R = ||D^alpha Tf||_{M(R^n)} / sum_{|beta| <= |alpha|}
    ||D^beta f||_{M(Omega)}. The per-delta max over the family is compared
    against the frozen baseline file (created on first run)."""
    elem = config.make_domain()
    if not isinstance(elem, ElementaryDomain):
        raise ConfigError("the delta sweep needs a bounded elementary domain")
    rep = ExperimentReport(name="delta_sweep")
    mol = build_mollifier(config.dim, config.l)
    bop = BoundedElementaryOperator(
        elem=elem,
        mollifier=mol,
        quad_q=config.quadrature_order,
        partition_mode=config.partition_mode,
    )
    fam = build_function_family(config, elem)
    alphas = multi_indices(elem.n, config.l)

    om_region = elementary_region(elem)
    pad = 0.5 * elem.D
    big = np.asarray(elem.box_bounds, dtype=float) + np.array([-pad, pad])
    tf_region = rn_region(big)
    om_grid = BallGrid(om_region, BallSampler(config.center_count, om_region, config.seed,
                                              samples_per_ball=config.samples_per_ball))
    tf_grid = BallGrid(tf_region, BallSampler(config.center_count, tf_region, config.seed + 1,
                                              samples_per_ball=config.samples_per_ball))

    # one field evaluation per (f, alpha); all (lambda, p, delta) reductions
    # reuse the cached |field| values on the shared ball grids
    cases = []
    for f in fam:
        g0 = bop.zero_extension(f)
        den_vals = {b: om_grid.eval_field(lambda X, b=b: f.d(b, X)) for b in alphas}
        for alpha in alphas:
            if sum(alpha) == 0:
                fn = lambda X: bop.op.extend(g0, X)
            else:
                fn = lambda X, a=alpha: bop.op.derivative_batch(g0, a, X, config.fd_step)
            num_vals = tf_grid.eval_field(fn)
            cases.append((f, alpha, num_vals, den_vals))

    maxima = {}
    for lam in config.weight_lambdas:
        for p in config.p_values:
            for delta in config.delta_grid:
                params = MorreyParams(power_weight(lam), delta, p)
                best = 0.0
                for f, alpha, (nv, nok), den_vals in cases:
                    num = _reduce(tf_grid, nv, nok, params, effective_delta(delta, tf_region))
                    den = 0.0
                    for beta in alphas:
                        if sum(beta) <= sum(alpha):
                            dv, dok = den_vals[beta]
                            den += _reduce(om_grid, dv, dok, params,
                                           effective_delta(delta, om_region)).value
                    if den == 0.0:
                        rep.add(function=f.name, lam=lam, p=p, delta=delta,
                                alpha="".join(map(str, alpha)), numerator=num.value,
                                denominator=0.0, ratio=np.nan, note="skipped: zero denominator",
                                ok=True)
                        continue
                    ratio = num.value / den
                    best = max(best, ratio)
                    rep.add(function=f.name, lam=lam, p=p, delta=delta,
                            alpha="".join(map(str, alpha)), numerator=num.value,
                            denominator=den, ratio=ratio, note="",
                            ok=bool(np.isfinite(ratio)))
                maxima[f"lam{lam:g}_p{p:g}_delta{delta:g}"] = best

    spread_ok = {}
    for lam in config.weight_lambdas:
        for p in config.p_values:
            vals = [maxima[f"lam{lam:g}_p{p:g}_delta{d:g}"] for d in config.delta_grid]
            spread = max(vals) / min(vals) if min(vals) > 0 else np.inf
            spread_ok[f"lam{lam:g}_p{p:g}"] = spread
            rep.add(function="<family max>", lam=lam, p=p, delta="all",
                    alpha="*", numerator=max(vals), denominator=min(vals),
                    ratio=spread, note="delta spread", ok=bool(spread <= 4.0))

    baseline_status = "none"
    if baseline_path is not None:
        if os.path.exists(baseline_path):
            with open(baseline_path) as fh:
                base = json.load(fh)["maxima"]
            baseline_status = "compared"
            for key, val in maxima.items():
                ref = base.get(key)
                ok = ref is not None and abs(val - ref) <= 0.05 * abs(ref)
                rep.add(function="<baseline>", lam="", p="", delta="", alpha=key,
                        numerator=val, denominator=ref if ref is not None else np.nan,
                        ratio=val / ref if ref else np.nan, note="baseline", ok=bool(ok))
        else:
            os.makedirs(os.path.dirname(baseline_path) or ".", exist_ok=True)
            with open(baseline_path, "w") as fh:
                json.dump({"config": {"seed": config.seed, "domain": config.domain},
                           "maxima": maxima}, fh, indent=2, default=_jsonable)
            baseline_status = "frozen"
    rep.summary = {
        "maxima": maxima,
        "delta_spread": spread_ok,
        "baseline": baseline_status,
        "seed": config.seed,
    }
    return rep


# ---------------------------------------------------------------------------
# atlas demo


def run_atlas_demo(config):
    """Identity, reproduction, single-chart agreement, and a sample ratio
    through the atlas-glued operator on the built-in unit square."""
    rep = ExperimentReport(name="atlas")
    atlas = unit_square_atlas()
    val = validate_atlas(atlas, samples=50_000, seed=config.seed,
                         omega_contains=unit_square_contains)
    rep.add(check="atlas_valid", value=float(len(val.failures)), threshold=0.0,
            ok=val.valid, detail="; ".join(val.failures))
    if not val.valid:
        rep.summary = {"failures": val.failures}
        return rep
    mol = build_mollifier(2, config.l)
    gop = GeneralExtensionOperator(atlas=atlas, mollifier=mol,
                                   quad_q=config.quadrature_order,
                                   partition_mode=config.partition_mode)
    rng = np.random.default_rng(config.seed)

    one = monomial_function((0, 0))
    P = rng.uniform(0.0, 1.0, size=(800, 2))
    e1 = float(np.max(np.abs(gop.extend(one, P) - 1.0)))
    rep.add(check="constant_identity", value=e1, threshold=1e-10, ok=e1 <= 1e-10)

    polys = [monomial_function(a) for a in multi_indices(2, config.l)]
    B = _near_boundary_points(rng, 400, eps=1e-6)
    worst = 0.0
    for g in polys:
        worst = max(worst, float(np.max(np.abs(gop.extend(g, B) - g(B)))))
    rep.add(check="polynomial_reproduction", value=worst, threshold=1e-5, ok=worst <= 1e-5)

    agree = _single_chart_agreement(gop, rng)
    rep.add(check="single_chart_agreement", value=agree, threshold=1e-6, ok=agree <= 1e-6)

    # a sample empirical ratio through the atlas path
    from .norms import Region

    om = Region(bbox=np.array([[0.0, 1.0], [0.0, 1.0]]),
                indicator=unit_square_contains, name="square")
    big = rn_region(np.array([[-0.5, 1.5], [-0.5, 1.5]]))
    params = MorreyParams(power_weight(1.0), 1.0, 2.0)
    f = product(gaussian_function([0.5, 0.5], 0.4), monomial_function((0, 0)))
    num = morrey_norm(lambda X: gop.extend(f, X), big,
                      params, BallSampler(24, big, config.seed, samples_per_ball=96))
    den = morrey_norm(f, om, params, BallSampler(24, om, config.seed + 1, samples_per_ball=96))
    ratio = num.value / den.value if den.value else np.inf
    rep.add(check="sample_ratio", value=ratio, threshold=np.inf, ok=bool(np.isfinite(ratio)))
    rep.summary = {
        "multiplicity": val.multiplicity,
        "checks": {r["check"]: bool(r["ok"]) for r in rep.rows},
        "sample_ratio": ratio,
    }
    return rep


def _near_boundary_points(rng, m, eps=1e-6):
    """Points just inside and just outside the unit square boundary."""
    t = rng.uniform(0.05, 0.95, m)
    side = rng.integers(0, 4, m)
    off = np.where(rng.uniform(size=m) < 0.5, -eps, eps)
    pts = np.empty((m, 2))
    for i in range(m):
        if side[i] == 0:
            pts[i] = (t[i], 0.0 - off[i])
        elif side[i] == 1:
            pts[i] = (t[i], 1.0 + off[i])
        elif side[i] == 2:
            pts[i] = (0.0 - off[i], t[i])
        else:
            pts[i] = (1.0 + off[i], t[i])
    return pts


def _single_chart_agreement(gop, rng):
    """Compare the glued operator against a direct per-chart computation at
    points where exactly one chart cutoff is active."""
    atlas = gop.atlas
    P = rng.uniform(-0.15, 1.15, size=(4000, 2))
    table = gop.cutoffs.cutoff_table(P)
    active = np.count_nonzero(table > 0, axis=1)
    worst = 0.0
    found = 0
    for j in range(atlas.s):
        mask = (active == 1) & (table[:, j] > 0)
        if not np.any(mask):
            continue
        X = P[mask][:200]
        found += X.shape[0]
        ch = atlas.charts[j]
        bop = gop.chart_ops[j]
        f = gaussian_function([0.4, 0.6], 0.5)

        def g_frame(Y, j=j, ch=ch):
            W = ch.from_frame(Y)
            out = np.zeros(Y.shape[0])
            inside = bop.elem.contains(Y)
            if np.any(inside):
                out[inside] = f(W[inside]) * gop.cutoffs.cutoff(j, W[inside])
            return out

        m = atlas.d / 4.0
        box = np.array([[a + m, b - m] for a, b in ch.box])
        gfun = TestFunction(value=g_frame, n=2,
                            support_hint=SupportHint(box=box, rho_bound=atlas.D))
        direct = np.atleast_1d(bop.op.extend(gfun, ch.to_frame(X)))
        glued = gop.extend(f, X)
        worst = max(worst, float(np.max(np.abs(glued - direct))))
    if found == 0:
        return np.inf
    return worst
