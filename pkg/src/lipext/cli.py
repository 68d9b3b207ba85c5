"""Command-line interface.

Subcommands: build-kernel, check, extend, norms, sweep, atlas.
Exit codes: 0 all checks passed, 1 a check failed, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .config import ConfigError, load_config
from .extension import ExtensionOperator
from .functions import (
    constant_function,
    gaussian_function,
    monomial_function,
    singular_function,
    trig_function,
)
from .geometry import ElementaryDomain, GeometryError
from .harness import run_atlas_demo, run_delta_sweep, run_invariant_suite
from .kernel import KernelBuildError, build_mollifier
from .norms import (
    BallSampler,
    MorreyParams,
    ball_region,
    box_region,
    morrey_norm,
    power_weight,
)
from .partition import MODES, DyadicPartition


def _named_function(spec, n):
    if spec == "const":
        return constant_function(n)
    if spec == "gaussian":
        return gaussian_function(np.zeros(n), 1.0)
    if spec == "trig":
        return trig_function(np.full(n, 2.0), np.full(n, 0.5))
    if spec.startswith("monomial:"):
        digits = spec.split(":", 1)[1]
        if len(digits) != n or not digits.isdigit():
            raise ConfigError(f"monomial spec needs {n} digits, got {digits!r}")
        return monomial_function(tuple(int(c) for c in digits))
    if spec == "singular":
        return singular_function(np.zeros(n), -0.5, 0.05, 2.0)
    raise ConfigError(f"unknown function {spec!r}")


def _parse_region(spec):
    kind, _, rest = spec.partition(":")
    vals = [float(v) for v in rest.split(",")] if rest else []
    if kind == "box":
        if len(vals) % 2:
            raise ConfigError("box region needs an even number of coordinates")
        return box_region(np.array(vals).reshape(-1, 2))
    if kind == "ball":
        if len(vals) < 2:
            raise ConfigError("ball region needs center coordinates and a radius")
        return ball_region(vals[:-1], vals[-1])
    raise ConfigError(f"unknown region spec {spec!r} (use box:... or ball:...)")


def _common(parser):
    parser.add_argument("--config", help="TOML experiment configuration")
    parser.add_argument("--seed", type=int, help="random seed override")
    parser.add_argument("--out", default="reports", help="output directory")
    parser.add_argument("--mode", choices=MODES, help="partition mode override")
    parser.add_argument(
        "--debug-constants",
        type=float,
        metavar="A",
        help="sabotage the reflection constant (negative tests)",
    )


def _load(args, **extra):
    overrides = {
        "seed": args.seed,
        "partition_mode": args.mode,
        "debug_A": getattr(args, "debug_constants", None),
        "out_dir": args.out,
    }
    overrides.update(extra)
    return load_config(args.config, overrides)


def build_parser():
    ap = argparse.ArgumentParser(prog="lipext")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-kernel", help="build the mollifier and print its audit report")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--l", type=int, default=1)
    p.add_argument("--quadrature", type=int, default=32)
    _common(p)

    p = sub.add_parser("check", help="run the invariant suite")
    _common(p)

    p = sub.add_parser("extend", help="evaluate the extension at given points")
    p.add_argument("--function", default="gaussian")
    p.add_argument("--x", action="append", required=True,
                   help="point as comma-separated coordinates (repeatable)")
    _common(p)

    p = sub.add_parser("norms", help="estimate a Morrey norm")
    p.add_argument("--function", required=True)
    p.add_argument("--region", required=True, help="box:a,b,c,d or ball:cx,cy,r")
    p.add_argument("--weight", default="2", help="lambda exponent of r^lambda")
    p.add_argument("--delta", default="inf")
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--centers", type=int, default=64)
    _common(p)

    p = sub.add_parser("sweep", help="delta sweep of empirical boundedness ratios")
    p.add_argument("--baseline", default="baselines/delta_sweep.json")
    p.add_argument("--plots", action="store_true")
    _common(p)

    p = sub.add_parser("atlas", help="atlas-glued operator demonstration")
    _common(p)
    return ap


def _cmd_build_kernel(args):
    cfg = _load(args)
    mol = build_mollifier(args.n, args.l, args.quadrature)
    print(json.dumps(mol.report(), indent=2))
    worst = max(mol.moment_residuals().values())
    return 0 if worst <= 1e-8 else 1


def _cmd_check(args):
    cfg = _load(args)
    rep = run_invariant_suite(cfg)
    paths = rep.write(cfg.out_dir)
    for r in rep.rows:
        status = "PASS" if r["ok"] else "FAIL"
        print(f"{status} {r['check']}: value={r['value']:.3g} threshold={r['threshold']:.3g}")
    print(f"report: {paths.get('csv')}")
    return 0 if rep.passed else 1


def _cmd_extend(args):
    cfg = _load(args)
    dom = cfg.make_domain()
    if isinstance(dom, ElementaryDomain):
        dom = dom.to_subgraph()
    if cfg.debug_A is not None:
        dom = dom.with_constants(cfg.debug_A)
    mol = build_mollifier(cfg.dim, cfg.l)
    op = ExtensionOperator(dom=dom, mollifier=mol,
                           part=DyadicPartition(dom, cfg.partition_mode),
                           quad_q=cfg.quadrature_order)
    f = _named_function(args.function, cfg.dim)
    X = np.array([[float(v) for v in x.split(",")] for x in args.x])
    if X.shape[1] != cfg.dim:
        raise ConfigError(f"points must have {cfg.dim} coordinates")
    audit = op.audit(f, X)
    print("x,rho,active_k,psi,Tf")
    for i in range(X.shape[0]):
        ks = [int(k) for k, p in zip(audit["k"][i], audit["psi"][i]) if p != 0]
        ps = [f"{p:.6g}" for p in audit["psi"][i] if p != 0]
        print(
            f"\"{' '.join(map(str, X[i]))}\",{audit['rho'][i]:.6g},"
            f"\"{ks}\",\"{ps}\",{audit['Tf'][i]:.12g}"
        )
    return 0


def _cmd_norms(args):
    cfg = _load(args)
    region = _parse_region(args.region)
    f = _named_function(args.function, region.n)
    delta = np.inf if args.delta.lower() in ("inf", "infinity") else float(args.delta)
    params = MorreyParams(power_weight(float(args.weight)), delta, args.p)
    sampler = BallSampler(args.centers, region, cfg.seed)
    est = morrey_norm(f, region, params, sampler)
    print("value,witness_center,witness_radius,samples")
    center = " ".join(f"{c:.6g}" for c in est.witness.center)
    print(f"{est.value:.12g},\"{center}\",{est.witness.radius:.6g},{est.samples}")
    return 0


def _cmd_sweep(args):
    cfg = _load(args)
    rep = run_delta_sweep(cfg, baseline_path=args.baseline)
    paths = rep.write(cfg.out_dir, plots=args.plots)
    print(json.dumps(rep.summary, indent=2, default=float))
    print(f"report: {paths.get('csv')}")
    return 0 if rep.passed else 1


def _cmd_atlas(args):
    cfg = _load(args)
    rep = run_atlas_demo(cfg)
    rep.write(cfg.out_dir)
    for r in rep.rows:
        status = "PASS" if r["ok"] else "FAIL"
        print(f"{status} {r['check']}: value={r['value']:.3g}")
    return 0 if rep.passed else 1


_COMMANDS = {
    "build-kernel": _cmd_build_kernel,
    "check": _cmd_check,
    "extend": _cmd_extend,
    "norms": _cmd_norms,
    "sweep": _cmd_sweep,
    "atlas": _cmd_atlas,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (GeometryError, KernelBuildError) as exc:
        print(f"check failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
