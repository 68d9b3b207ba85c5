import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lipext.functions import (
    box_window,
    constant_function,
    gaussian_function,
    monomial_function,
    product,
    singular_function,
    trig_function,
)

_POINTS = st.tuples(
    st.floats(min_value=-2.0, max_value=2.0, allow_nan=False),
    st.floats(min_value=-2.0, max_value=2.0, allow_nan=False),
)


def _fd(f, alpha, x, h=1e-5):
    """Central-difference reference for a first or pure-second derivative."""
    x = np.asarray(x, dtype=float)
    i = int(np.argmax(alpha))
    e = np.zeros_like(x)
    e[i] = h
    if sum(alpha) == 1:
        return (f(x + e) - f(x - e)) / (2 * h)
    return (f(x + e) - 2 * f(x) + f(x - e)) / h**2


@pytest.mark.parametrize(
    "factory",
    [
        lambda: gaussian_function([0.2, -0.1], 0.8),
        lambda: trig_function([1.5, 2.5], [0.3, 0.0]),
        lambda: monomial_function((2, 1)),
        lambda: product(monomial_function((1, 0)), gaussian_function([0.0, 0.0], 1.0)),
        lambda: box_window(np.array([[-1.5, 1.5], [-1.5, 1.5]]), margin=0.5),
    ],
)
@pytest.mark.parametrize("alpha", [(1, 0), (0, 1), (2, 0), (0, 2)])
def test_analytic_derivatives_match_finite_differences(factory, alpha):
    f = factory()
    rng = np.random.default_rng(7)
    for x in rng.uniform(-0.9, 0.9, size=(20, 2)):
        ref = _fd(f, alpha, x)
        assert f.d(alpha, x) == pytest.approx(ref, rel=2e-4, abs=2e-4)


def test_singular_first_derivatives():
    f = singular_function([0.0, 0.0], -0.5, r_plateau=0.5, r_support=1.5)
    rng = np.random.default_rng(8)
    for x in rng.uniform(0.1, 0.9, size=(20, 2)):
        for alpha in [(1, 0), (0, 1)]:
            assert f.d(alpha, x) == pytest.approx(_fd(f, alpha, x), rel=1e-3, abs=1e-5)
    with pytest.raises(ValueError):
        f.d((2, 0), np.array([0.3, 0.3]))


def test_singular_support_and_value():
    f = singular_function([1.0, 0.0], -0.5, r_plateau=0.2, r_support=0.5)
    assert f(np.array([1.1, 0.0])) == pytest.approx(0.1**-0.5)
    assert f(np.array([2.0, 0.0])) == 0.0
    assert np.isinf(f(np.array([1.0, 0.0])))


@settings(max_examples=100, deadline=None)
@given(_POINTS)
def test_window_range_and_support(p):
    w = box_window(np.array([[-1.0, 1.0], [-1.0, 1.0]]), margin=0.3)
    x = np.array(p)
    v = w(x)
    assert 0.0 <= v <= 1.0
    if np.any(np.abs(x) >= 1.0):
        assert v == 0.0
    if np.all(np.abs(x) <= 0.7):
        assert v == 1.0


def test_constant_function_derivatives_vanish():
    c = constant_function(3, 4.5)
    X = np.zeros((5, 3))
    assert np.all(c(X) == 4.5)
    assert np.all(c.d((1, 0, 0), X) == 0.0)


def test_product_requires_matching_dims():
    with pytest.raises(ValueError):
        product(constant_function(2), constant_function(3))


def test_monomial_name_and_exact_derivative():
    g = monomial_function((3, 2))
    x = np.array([2.0, 3.0])
    assert g(x) == pytest.approx(8 * 9)
    assert g.d((1, 1), x) == pytest.approx(3 * 4 * 2 * 3)
    assert g.d((4, 0), x) == 0.0
