import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import exact_product_game_shapley, product_game_shapley
from prodshap.game import (
    DimensionError,
    InputError,
    ProductGame,
    default_budget,
    exact_budget,
    log_efficiency_gap,
    shapley_bruteforce,
    shapley_logspace_node,
    shapley_quadrature,
    shapley_quadrature_log,
    shapley_weight,
    shapley_weighted_sum,
)
from prodshap.quadrature import gauss_legendre_rule

R1 = gauss_legendre_rule(1)


@pytest.mark.parametrize("u, phi", [([2.0], [1.0]), ([2.0, 3.0], [2.0, 3.0]), ([-1.0, 2.0], [-3.0, 0.0])])
def test_bruteforce_small(u, phi):
    out = shapley_bruteforce(ProductGame(u))
    np.testing.assert_allclose(out.phi, phi, rtol=0, atol=1e-14)
    assert out.exact


def test_quadrature_two_players_one_node():
    out = shapley_quadrature(ProductGame([2.0, 3.0]), R1)
    np.testing.assert_allclose(out.phi, [2.0, 3.0], rtol=0, atol=1e-14)
    np.testing.assert_allclose(out.phi, shapley_bruteforce(ProductGame([2.0, 3.0])).phi, rtol=0, atol=1e-14)
    assert out.exact and out.budget == 1


def test_quadrature_negative_factor_one_node():
    # T = 0 at tau = 0.5 for u = -1: the single-zero path
    out = shapley_quadrature(ProductGame([-1.0, 2.0]), R1)
    np.testing.assert_allclose(out.phi, [-3.0, 0.0], rtol=0, atol=1e-15)


@pytest.mark.parametrize("d", [1, 2, 7, 40])
def test_null_game(d):
    for m in (1, 3, 20):
        out = shapley_quadrature(ProductGame(np.ones(d)), gauss_legendre_rule(m))
        assert np.all(out.phi == 0.0)


def test_logspace_node_examples():
    p = shapley_logspace_node(ProductGame([2.0, 3.0]), 0.5)
    # T = [1.5, 2.0]
    assert p.log_magnitude == pytest.approx(math.log(3.0), abs=1e-15)
    assert (p.sign, p.zero_count, p.zero_index) == (1, 0, None)

    p = shapley_logspace_node(ProductGame([-1.0, 2.0]), 0.5)
    assert (p.sign, p.zero_count, p.zero_index) == (0, 1, 0)
    assert p.log_magnitude == pytest.approx(math.log(1.5), abs=1e-15)
    assert p.leave_one_out(0, 0.0) == pytest.approx(1.5)
    assert p.leave_one_out(1, 1.5) == 0.0

    for tau in (0.1, 0.5, 0.93):
        p = shapley_logspace_node(ProductGame([1.0, 1.0, 1.0]), tau)
        assert (p.log_magnitude, p.sign, p.zero_count) == (0.0, 1, 0)


def test_logspace_node_two_zeros_and_tiny():
    p = shapley_logspace_node(ProductGame([-1.0, -1.0, 3.0]), 0.5)
    assert p.zero_count == 2 and p.sign == 0 and p.zero_index is None
    assert p.leave_one_out(0, 0.0) == 0.0
    # values near zero are not thresholded
    p = shapley_logspace_node(ProductGame([1 - 1e-300 / 0.5, 2.0]), 0.5)
    assert p.zero_count == 0


def test_logspace_node_rejects_endpoints():
    with pytest.raises(ValueError):
        shapley_logspace_node(ProductGame([2.0]), 0.0)


def test_weighted_sum_examples():
    g23, gm = ProductGame([2.0, 3.0]), ProductGame([-1.0, 2.0])
    np.testing.assert_allclose(shapley_weighted_sum([(1.0, g23)], R1).phi, [2.0, 3.0], atol=1e-14)
    np.testing.assert_allclose(shapley_weighted_sum([(2.0, g23), (-1.0, g23)], R1).phi, [2.0, 3.0], atol=1e-14)
    np.testing.assert_allclose(shapley_weighted_sum([(0.5, g23), (0.5, gm)], R1).phi, [-0.5, 1.5], atol=1e-14)
    with pytest.raises(DimensionError):
        shapley_weighted_sum([(1.0, g23), (1.0, ProductGame([2.0]))], R1)
    with pytest.raises(InputError):
        shapley_weighted_sum([], R1)


def test_default_budget():
    assert default_budget(10, 400) == 5
    assert default_budget(5000, 400) == 400
    assert default_budget(1, 400) == 1
    assert exact_budget(7) == 4


def test_shapley_weight():
    assert shapley_weight(0, 1) == 1.0
    assert shapley_weight(1, 3) == pytest.approx(1 / 6, rel=1e-15)
    r = gauss_legendre_rule(2)
    assert abs(r.integrate(lambda t: t * (1 - t)) - shapley_weight(1, 3)) <= 1e-12
    with pytest.raises(ValueError):
        shapley_weight(3, 3)
    # log-gamma: no factorial overflow; mid-size weights at d=5000 underflow to 0 honestly
    assert shapley_weight(0, 5000) == pytest.approx(1 / 5000, rel=1e-12)
    assert shapley_weight(2500, 5000) == 0.0


def test_beta_identity():
    for d in range(1, 21):
        r = gauss_legendre_rule(exact_budget(d))
        for s in range(d):
            mu = float(Fraction(math.factorial(s) * math.factorial(d - s - 1), math.factorial(d)))
            assert abs(r.integrate(lambda t: t ** s * (1 - t) ** (d - s - 1)) - mu) <= 1e-12
            assert shapley_weight(s, d) == pytest.approx(mu, rel=1e-13)


def test_invalid_games():
    with pytest.raises(InputError):
        ProductGame([])
    with pytest.raises(InputError):
        ProductGame([1.0, np.nan])
    with pytest.raises(DimensionError):
        shapley_bruteforce(ProductGame(np.ones(26)))


def test_oracle_equivalence_random_games():
    rng = np.random.default_rng(7)
    for _ in range(100):
        d = int(rng.integers(1, 13))
        u = rng.uniform(-2, 3, d)
        got = shapley_quadrature(ProductGame(u), gauss_legendre_rule(exact_budget(d))).phi
        np.testing.assert_allclose(got, product_game_shapley(u), rtol=0, atol=1e-10)
        np.testing.assert_allclose(shapley_bruteforce(ProductGame(u)).phi, product_game_shapley(u),
                                   rtol=0, atol=1e-12)


def test_geometric_decay_d50():
    rng = np.random.default_rng(11)
    u = rng.uniform(-2, 3, 50)
    exact = np.array([float(v) for v in exact_product_game_shapley(u)])
    errs = [np.max(np.abs(shapley_quadrature(ProductGame(u), gauss_legendre_rule(m)).phi - exact))
            for m in (2, 3, 5, 8, 12, 18, 25)]
    floor = 1e-12 * max(1.0, np.max(np.abs(exact)))
    for a, b in zip(errs[1:], errs[2:]):
        assert b <= max(a, floor)
    assert errs[-1] <= 1e-10 * max(1.0, np.max(np.abs(exact)))
    assert errs[0] > 100 * errs[-1]


def test_efficiency_exact_regime():
    rng = np.random.default_rng(5)
    for d in (3, 30, 200):
        u = rng.uniform(-2, 3, d)
        phi = shapley_quadrature(ProductGame(u), gauss_legendre_rule(exact_budget(d))).phi
        total = float(np.prod(u)) - 1
        assert abs(math.fsum(phi) - total) <= 1e-10 * max(1.0, abs(float(np.prod(u))))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=1, max_size=12), st.randoms(use_true_random=False))
def test_symmetry_bitwise(u, rnd):
    u = np.array(u)
    perm = list(range(len(u)))
    rnd.shuffle(perm)
    rule = gauss_legendre_rule(exact_budget(len(u)))
    a = shapley_quadrature(ProductGame(u), rule).phi
    b = shapley_quadrature(ProductGame(u[perm]), rule).phi
    assert a[perm].tobytes() == b.tobytes()


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=1, max_size=10), st.integers(0, 9))
def test_null_player_exact_zero(u, k):
    u = np.array(u)
    k %= len(u)
    u[k] = 1.0
    phi = shapley_quadrature(ProductGame(u), gauss_legendre_rule(3)).phi
    assert phi[k] == 0.0


@settings(max_examples=60, deadline=None)
@given(st.lists(st.sampled_from([-1.0, 0.0, 1.0, 3.0, -0.5, 2.0]), min_size=1, max_size=10))
def test_zero_node_factors_match_bruteforce(u):
    # -1 puts T exactly at zero on the middle node of odd rules
    for m in (exact_budget(len(u)), exact_budget(len(u)) + 1):
        rule = gauss_legendre_rule(m)
        np.testing.assert_allclose(shapley_quadrature(ProductGame(u), rule).phi, product_game_shapley(u),
                                   rtol=0, atol=1e-12)


def test_log_path_matches_linear():
    rng = np.random.default_rng(2)
    for _ in range(20):
        d = int(rng.integers(1, 13))
        u = rng.uniform(-2, 3, d)
        rule = gauss_legendre_rule(exact_budget(d))
        la = shapley_quadrature_log(ProductGame(u), rule)
        np.testing.assert_allclose(la.to_linear(), product_game_shapley(u), rtol=1e-12, atol=1e-14)
        assert log_efficiency_gap(ProductGame(u), la) <= 1e-10


def test_log_path_beyond_double_range():
    rng = np.random.default_rng(0)
    u = np.where(rng.random(5000) < 0.75, 2.0, 0.5)
    game = ProductGame(u)
    with np.errstate(over="ignore"):
        assert not np.isfinite(np.prod(u))
    la = shapley_quadrature_log(game, gauss_legendre_rule(default_budget(5000)))
    assert np.all(np.isfinite(la.log_abs))
    assert log_efficiency_gap(game, la) <= 1e-9


def test_log_path_underflow_side():
    rng = np.random.default_rng(1)
    u = np.where(rng.random(5000) < 0.25, 2.0, 0.5)
    assert np.prod(u) == 0.0
    game = ProductGame(u)
    la = shapley_quadrature_log(game, gauss_legendre_rule(400))
    assert np.all(np.isfinite(la.log_abs))
    assert log_efficiency_gap(game, la) <= 1e-9


def test_log_gap_with_zero_factor():
    game = ProductGame([0.0, 2.0, 3.0])
    la = shapley_quadrature_log(game, gauss_legendre_rule(2))
    # sum(phi) + 1 = prod(u) = 0
    assert log_efficiency_gap(game, la) <= 1e-14
