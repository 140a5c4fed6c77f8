import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import roots_jacobi

from serolatent.quadrature import build_quadrature, jacobi_rules


def beta_moment(alpha, beta, k):
    """E[T^k] for T ~ Beta(alpha, beta)."""
    out = 1.0
    for j in range(k):
        out *= (alpha + j) / (alpha + beta + j)
    return out


def test_uniform_weights_sum_to_one():
    rule = build_quadrature(1.0, 1.0, 8)
    assert rule.kind == "gauss-jacobi"
    assert abs(rule.weights.sum() - 1.0) < 1e-12


def test_symmetric_kernel_mean():
    rule = build_quadrature(2.0, 2.0, 16)
    assert abs(rule.integrate(lambda t: t) - 0.5) < 1e-12


def test_low_transmission_kernel_mean():
    rule = build_quadrature(0.5, 3.0, 32)
    assert abs(rule.integrate(lambda t: t) - 0.5 / 3.5) < 1e-10


@pytest.mark.parametrize("alpha,beta,n", [(0.5, 0.5, 32), (3.0, 0.5, 16), (2.0, 7.5, 24), (0.3, 4.0, 8)])
def test_matches_scipy_roots_jacobi(alpha, beta, n):
    # scipy weight (1-x)^a (1+x)^b on [-1, 1]; t = (1 + x) / 2
    x, w = roots_jacobi(n, beta - 1.0, alpha - 1.0)
    rule = build_quadrature(alpha, beta, n)
    np.testing.assert_allclose(rule.nodes, (1.0 + x) / 2.0, rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(rule.weights, w / w.sum(), rtol=1e-10, atol=1e-16)


@settings(max_examples=60, deadline=None)
@given(
    alpha=st.floats(0.05, 50.0),
    beta=st.floats(0.05, 50.0),
    n=st.integers(4, 40),
)
def test_polynomial_exactness(alpha, beta, n):
    rule = build_quadrature(alpha, beta, n)
    assert np.all((rule.nodes > 0) & (rule.nodes < 1))
    assert np.all(rule.weights >= 0)
    assert abs(rule.weights.sum() - 1.0) < 1e-12
    for k in (1, 2, n, 2 * n - 1):
        exact = beta_moment(alpha, beta, k)
        assert abs(rule.integrate(lambda t: t**k) - exact) <= 1e-9 * max(exact, 1e-300) + 1e-14


def test_batch_rules_match_single():
    a = np.array([0.5, 2.0, 3.0])
    b = np.array([0.5, 2.0, 0.5])
    nodes, weights = jacobi_rules(a, b, 12)
    for g in range(3):
        rule = build_quadrature(a[g], b[g], 12)
        np.testing.assert_array_equal(nodes[g], rule.nodes)
        np.testing.assert_array_equal(weights[g], rule.weights)


def test_cached():
    assert build_quadrature(1.7, 0.4, 20) is build_quadrature(1.7, 0.4, 20)


@pytest.mark.parametrize("alpha,beta,exc", [
    (2e4, 1.0, FloatingPointError),
    (1.0, 1e5, FloatingPointError),
    (np.nan, 1.0, FloatingPointError),
    (1.0, np.inf, FloatingPointError),
    (0.0, 1.0, ValueError),
    (1.0, -2.0, ValueError),
])
def test_invalid_shapes(alpha, beta, exc):
    with pytest.raises(exc):
        build_quadrature(alpha, beta)
    with pytest.raises(exc):
        jacobi_rules([1.0, alpha], [1.0, beta])


def test_too_few_nodes():
    with pytest.raises(ValueError):
        build_quadrature(1.0, 1.0, 3)
