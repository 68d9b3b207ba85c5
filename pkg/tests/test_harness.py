import json

import numpy as np
import pytest

from lipext.config import ConfigError, load_config
from lipext.harness import (
    build_function_family,
    inclusion_violations,
    run_atlas_demo,
    run_delta_sweep,
    run_invariant_suite,
)
from lipext.geometry import named_domain

_SMALL = {
    "functions": ("monomials", "gaussian"),
    "weight_lambdas": (1.0,),
    "p_values": (2.0,),
    "delta_grid": (0.5, 2.0),
    "center_count": 12,
    "samples_per_ball": 48,
}


def test_invariant_suite_passes_on_named_domains():
    for name in ("halfspace", "cone", "sine"):
        rep = run_invariant_suite(load_config(None, {"domain": name}))
        assert rep.passed, [r for r in rep.rows if not r["ok"]]


def test_invariant_suite_sabotage_fails():
    rep = run_invariant_suite(load_config(None, {"domain": "cone", "debug_A": 1.0}))
    assert not rep.passed
    assert any(r["check"] == "reflection_assertion" for r in rep.rows)


def test_inclusion_violations_zero_for_valid_constants():
    rng = np.random.default_rng(0)
    for name in ("halfspace", "cone", "sine"):
        assert inclusion_violations(named_domain(name), rng, pairs=5000) == 0


def test_inclusion_violations_positive_when_sabotaged():
    rng = np.random.default_rng(0)
    dom = named_domain("cone").with_constants(1.0)
    assert inclusion_violations(dom, rng, pairs=5000) > 0


def test_function_family_supports_sit_inside_the_box():
    cfg = load_config(None, {})
    elem = named_domain("square-subgraph")
    fam = build_function_family(cfg, elem)
    assert len(fam) >= 5
    box = np.asarray(elem.box_bounds, dtype=float)
    for f in fam:
        hint = f.support_hint
        assert hint is not None and hint.box is not None
        assert np.all(hint.box[:, 0] > box[:, 0]) and np.all(hint.box[:, 1] < box[:, 1])
        assert f.has_derivative


def test_sweep_small_config_is_deterministic(tmp_path):
    cfg = load_config(None, _SMALL)
    rep1 = run_delta_sweep(cfg, baseline_path=None)
    rep2 = run_delta_sweep(cfg, baseline_path=None)
    assert rep1.summary["maxima"] == rep2.summary["maxima"]
    assert rep1.passed
    for r in rep1.rows:
        if r["note"] == "":
            assert np.isfinite(r["ratio"])


def test_sweep_baseline_freeze_then_compare(tmp_path):
    cfg = load_config(None, _SMALL)
    base = tmp_path / "base.json"
    rep1 = run_delta_sweep(cfg, baseline_path=str(base))
    assert rep1.summary["baseline"] == "frozen"
    assert base.exists()
    rep2 = run_delta_sweep(cfg, baseline_path=str(base))
    assert rep2.summary["baseline"] == "compared"
    assert rep2.passed


def test_sweep_baseline_mismatch_fails(tmp_path):
    cfg = load_config(None, _SMALL)
    base = tmp_path / "base.json"
    run_delta_sweep(cfg, baseline_path=str(base))
    data = json.loads(base.read_text())
    data["maxima"] = {k: v * 2.0 for k, v in data["maxima"].items()}
    base.write_text(json.dumps(data))
    rep = run_delta_sweep(cfg, baseline_path=str(base))
    assert not rep.passed


def test_sweep_requires_bounded_domain():
    with pytest.raises(ConfigError):
        run_delta_sweep(load_config(None, dict(_SMALL, domain="halfspace")))


def test_report_write_and_columns(tmp_path):
    cfg = load_config(None, _SMALL)
    rep = run_delta_sweep(cfg, baseline_path=None)
    paths = rep.write(str(tmp_path))
    text = (tmp_path / "delta_sweep.csv").read_text()
    header = text.splitlines()[0].split(",")
    assert header[:5] == ["function", "lam", "p", "delta", "alpha"]
    summary = json.loads((tmp_path / "delta_sweep.json").read_text())
    assert summary["passed"] is True
    assert "csv" in paths and "json" in paths


def test_atlas_demo_passes():
    rep = run_atlas_demo(load_config(None, {}))
    assert rep.passed, [r for r in rep.rows if not r["ok"]]
    assert rep.summary["multiplicity"] >= 1


def test_suite_rejects_atlas_domain():
    with pytest.raises(ConfigError):
        run_invariant_suite(load_config(None, {"domain": "unit-square-atlas"}))
