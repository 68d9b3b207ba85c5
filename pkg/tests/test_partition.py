import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lipext.geometry import GeometryError, named_domain, unit_square_atlas
from lipext.partition import AtlasCutoffs, DyadicPartition, theta


def test_theta_support():
    t = np.array([0.49, 0.5, 2.0, 2.01, 10.0, 0.0])
    v = theta(t)
    assert v[0] == 0.0 and v[1] == 0.0
    assert v[3] == 0.0 and v[4] == 0.0 and v[5] == 0.0
    assert theta(np.array([1.0]))[0] > 0.0


@settings(max_examples=300, deadline=None)
@given(st.floats(min_value=-20.0, max_value=10.0, allow_nan=False))
def test_composition_telescopes(log2_rho):
    dom = named_domain("halfspace")
    part = DyadicPartition(dom)
    x = np.array([0.0, 2.0**log2_rho])
    assert abs(part.sum_at(x) - 1.0) <= 1e-12


@pytest.mark.parametrize("mode", ["composition", "mollified"])
def test_sum_is_one_on_exterior_zero_on_domain(mode):
    dom = named_domain("cone")
    part = DyadicPartition(dom, mode=mode)
    rng = np.random.default_rng(0)
    Xb = rng.uniform(-3, 3, size=(2000, 1))
    rho = 2.0 ** rng.uniform(-20, 10, 2000)
    top = dom.phi(Xb)
    above = np.column_stack([Xb, top + rho])
    below = np.column_stack([Xb, top - rho])
    assert np.max(np.abs(part.sum_at(above) - 1.0)) <= 1e-10
    assert np.all(part.sum_at(below) == 0.0)


@pytest.mark.parametrize("mode,limit", [("composition", 2), ("mollified", 3)])
def test_active_count(mode, limit):
    dom = named_domain("halfspace")
    part = DyadicPartition(dom, mode=mode)
    rho = 2.0 ** np.random.default_rng(1).uniform(-15, 8, 5000)
    _, psi = part.active_table(rho)
    assert part.max_active == limit
    assert np.max(np.count_nonzero(psi, axis=1)) <= limit
    assert np.all(psi >= 0.0)


def test_psi_supported_in_gk_tilde():
    dom = named_domain("halfspace")
    part = DyadicPartition(dom)
    for k in (-3, 0, 7):
        # just outside the admissible band for layer k
        for rho in (2.0 ** (-k - 2) * 0.999, 2.0 ** (-k + 1) * 1.001):
            assert part.psi(k, np.array([0.3, rho])) == 0.0
        assert part.psi(k, np.array([0.3, 2.0 ** (-k * 1.0)])) > 0.0


def test_active_layers_single_point():
    dom = named_domain("halfspace")
    part = DyadicPartition(dom)
    ks = part.active_layers(np.array([0.0, 0.3]))
    assert 1 <= len(ks) <= 2
    for k in ks:
        assert part.psi(k, np.array([0.0, 0.3])) > 0.0
    with pytest.raises(GeometryError):
        part.active_layers(np.array([0.0, -0.3]))


def test_unknown_mode_rejected():
    with pytest.raises(ValueError):
        DyadicPartition(named_domain("halfspace"), mode="fourier")


# --- atlas cutoffs


def test_cutoff_squares_sum_to_one_inside():
    atlas = unit_square_atlas()
    cut = AtlasCutoffs(atlas)
    rng = np.random.default_rng(2)
    P = rng.uniform(0.02, 0.98, size=(3000, 2))
    table = cut.cutoff_table(P)
    assert np.max(np.abs((table**2).sum(axis=1) - 1.0)) <= 1e-12


def test_cutoff_supported_in_half_shrunk_chart():
    atlas = unit_square_atlas()
    cut = AtlasCutoffs(atlas)
    rng = np.random.default_rng(3)
    P = rng.uniform(-1.0, 2.0, size=(5000, 2))
    for j, ch in enumerate(atlas.charts):
        vals = cut.cutoff(j, P)
        outside = ~ch.contains(P, margin=atlas.d / 2.0)
        assert np.all(vals[outside] == 0.0)


def test_cutoff_margin_validation():
    atlas = unit_square_atlas()
    with pytest.raises(ValueError):
        AtlasCutoffs(atlas, margin=atlas.d * 2)
    AtlasCutoffs(atlas, margin=atlas.d / 2)  # smaller margins are fine
