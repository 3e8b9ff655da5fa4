import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from prodshap.quadrature import BudgetError, gauss_legendre_rule, monomial_exactness_defect


def test_one_point_rule_is_midpoint():
    r = gauss_legendre_rule(1)
    assert r.nodes.tolist() == [0.5]
    assert r.weights.tolist() == [1.0]


def test_two_point_rule_closed_form():
    # roots of 6t^2 - 6t + 1
    r = gauss_legendre_rule(2)
    s = 1 / math.sqrt(3)
    np.testing.assert_allclose(r.nodes, [(1 - s) / 2, (1 + s) / 2], rtol=0, atol=1e-15)
    np.testing.assert_allclose(r.weights, [0.5, 0.5], rtol=0, atol=1e-15)


def test_three_point_rule_integrates_t5():
    r = gauss_legendre_rule(3)
    assert abs(r.integrate(lambda t: t ** 5) - 1 / 6) <= 1e-14


def test_defect_constant_is_zero():
    for m in (1, 4, 17, 200):
        assert monomial_exactness_defect(gauss_legendre_rule(m), 0) <= 1e-14


def test_defect_two_point():
    r = gauss_legendre_rule(2)
    assert monomial_exactness_defect(r, 3) <= 1e-14
    # sum w t^4 = 7/36 for the 2-point rule, versus 1/5
    d4 = monomial_exactness_defect(r, 4)
    assert d4 > 0
    assert d4 == pytest.approx(abs(7 / 36 - 1 / 5), abs=1e-15)


@pytest.mark.parametrize("m", range(1, 51))
def test_exact_up_to_degree_2m_minus_1(m):
    r = gauss_legendre_rule(m)
    assert max(monomial_exactness_defect(r, k) for k in range(2 * m)) <= 1e-12


def test_matches_numpy_leggauss():
    # leggauss edge weights drift by ~1e-8 relative at m=1000; compare absolutely
    for m in (5, 64, 333, 1000):
        x, w = np.polynomial.legendre.leggauss(m)
        r = gauss_legendre_rule(m)
        np.testing.assert_allclose(r.nodes, (x + 1) / 2, rtol=0, atol=1e-14)
        np.testing.assert_allclose(r.weights, w / 2, rtol=0, atol=1e-13)


@pytest.mark.parametrize("m", [7, 40, 333])
def test_matches_high_precision_rule(m):
    mp = pytest.importorskip("mpmath")
    with mp.workdps(40):
        r = gauss_legendre_rule(m)
        for k in (0, 1, m // 2, m - 1):
            z = mp.mpf(2 * float(r.nodes[k]) - 1)
            for _ in range(6):
                p, pm1 = mp.legendre(m, z), mp.legendre(m - 1, z)
                z -= p / (m * (z * p - pm1) / (z * z - 1))
            dp = m * (z * mp.legendre(m, z) - mp.legendre(m - 1, z)) / (z * z - 1)
            w = 1 / ((1 - z * z) * dp * dp)
            assert abs(float(r.nodes[k]) - float((z + 1) / 2)) <= 2.5e-16  # one ulp near 1
            assert abs(float((r.weights[k] - w) / w)) <= 1e-11


def test_structural_invariants_up_to_1000():
    for m in range(1, 1001):
        r = gauss_legendre_rule(m)
        assert r.nodes.shape == r.weights.shape == (m,)
        assert np.all((r.nodes > 0) & (r.nodes < 1))
        assert np.all(r.weights > 0)
        assert np.all(np.diff(r.nodes) > 0)
        assert abs(math.fsum(r.weights) - 1) <= 1e-14
        assert np.max(np.abs(r.nodes + r.nodes[::-1] - 1)) <= 1e-14
        assert np.max(np.abs(r.weights - r.weights[::-1])) <= 1e-14


def test_deterministic_and_memoized():
    from prodshap import quadrature

    a = gauss_legendre_rule(37)
    b = quadrature._compute(37)
    assert gauss_legendre_rule(37) is a
    assert a.nodes.tobytes() == b.nodes.tobytes()
    assert a.weights.tobytes() == b.weights.tobytes()


def test_rule_arrays_are_read_only():
    r = gauss_legendre_rule(4)
    with pytest.raises(ValueError):
        r.nodes[0] = 0.0


@pytest.mark.parametrize("bad", [0, -3, 2.5, True, 100_001])
def test_invalid_orders(bad):
    with pytest.raises(BudgetError):
        gauss_legendre_rule(bad)


def test_custom_cap():
    with pytest.raises(BudgetError):
        gauss_legendre_rule(11, max_order=10)


@settings(max_examples=40, deadline=None)
@given(m=st.integers(1, 60), a=st.floats(-3, 3), b=st.floats(-3, 3).filter(lambda v: abs(v) > 1e-3))
def test_integrates_random_polynomials(m, a, b):
    # (a + b t)^n with n = 2m-1 integrates to ((a+b)^(n+1) - a^(n+1)) / ((n+1) b)
    n = 2 * m - 1
    exact = ((a + b) ** (n + 1) - a ** (n + 1)) / ((n + 1) * b)
    got = gauss_legendre_rule(m).integrate(lambda t: (a + b * t) ** n)
    scale = max(1.0, abs(a) + abs(b)) ** n / abs(b)
    assert abs(got - exact) <= 1e-12 * scale
