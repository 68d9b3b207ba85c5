import json

import numpy as np
import pytest

from lipext.kernel import KernelBuildError, build_mollifier, support_box
from lipext.quadrature import gauss_legendre, midpoint_grid, tensor_rule
from lipext.util import multi_indices


def test_gauss_legendre_exactness():
    x, w = gauss_legendre(0.0, 2.0, 4)
    # exact for polynomials up to degree 7
    for deg in range(8):
        assert np.sum(w * x**deg) == pytest.approx(2.0 ** (deg + 1) / (deg + 1), rel=1e-12)


def test_tensor_rule_volume():
    nodes, weights = tensor_rule([(-1.0, 2.0), (0.0, 0.5)], 6)
    assert nodes.shape == (36, 2)
    assert np.sum(weights) == pytest.approx(1.5)


def test_midpoint_grid_integrates_linear():
    nodes, vol = midpoint_grid([(0.0, 1.0), (0.0, 1.0)], 64)
    assert np.sum(nodes[:, 0] * vol) == pytest.approx(0.5, rel=1e-12)


def test_support_box_inside_unit_cap():
    for n in (1, 2, 3):
        box = support_box(n)
        corners = np.array(np.meshgrid(*box, indexing="ij")).reshape(n, -1).T
        assert np.all(np.linalg.norm(corners, axis=1) <= 1.0)
        assert box[-1][0] >= 0.5


@pytest.mark.parametrize("n,l", [(1, 0), (1, 3), (2, 1), (2, 2), (3, 1)])
def test_moments_vanish(n, l):
    mol = build_mollifier(n, l)
    res = mol.moment_residuals()
    assert max(res.values()) <= 1e-8
    res_dbl = mol.moment_residuals(2 * mol.build_quadrature)
    assert max(res_dbl.values()) <= 1e-4


def test_kernel_vanishes_outside_support():
    mol = build_mollifier(2, 1)
    pts = np.array(
        [
            [0.0, 0.4],  # below the vertical slab
            [0.0, 0.9],  # above it
            [0.9, 0.6],  # outside laterally
            [0.0, 1.2],
        ]
    )
    assert np.all(mol.eval(pts) == 0.0)


def test_kernel_positive_mass_region_exists():
    mol = build_mollifier(2, 2)
    nodes, weights = tensor_rule(support_box(2), 24)
    vals = mol.eval(nodes)
    assert np.sum(weights * vals) == pytest.approx(1.0, abs=1e-10)
    assert np.any(vals > 0)


def test_build_rejects_out_of_range_orders():
    with pytest.raises(KernelBuildError):
        build_mollifier(4, 1)
    with pytest.raises(KernelBuildError):
        build_mollifier(2, 5)


def test_report_is_json_serializable():
    rep = build_mollifier(2, 1).report()
    text = json.dumps(rep)
    assert "moment_residuals_build" in text
    assert rep["n"] == 2 and rep["l"] == 1


def test_multi_indices_order():
    idx = multi_indices(2, 2)
    assert idx[0] == (0, 0)
    assert set(idx) == {(0, 0), (0, 1), (1, 0), (0, 2), (1, 1), (2, 0)}
    orders = [sum(a) for a in idx]
    assert orders == sorted(orders)
