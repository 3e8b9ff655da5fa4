"""Shapley values of a product game v(S) = prod(u[S]) from a one-dimensional integral."""

# %%
import numpy as np

from prodshap import (
    ProductGame,
    exact_budget,
    gauss_legendre_rule,
    log_efficiency_gap,
    shapley_bruteforce,
    shapley_quadrature,
    shapley_quadrature_log,
)

# two players: v({1}) = 2, v({2}) = 3, v({1, 2}) = 6
game = ProductGame([2.0, 3.0])
print("enumeration:", shapley_bruteforce(game).phi)
print("one node:   ", shapley_quadrature(game, gauss_legendre_rule(1)).phi)

# %%
# ceil(d/2) nodes reproduce enumeration; fewer nodes converge geometrically
rng = np.random.default_rng(0)
game = ProductGame(rng.uniform(-2, 3, 20))
ref = shapley_bruteforce(game).phi
print("d = 20, exact at m =", exact_budget(20))
for m in (1, 2, 3, 5, 8, 10):
    err = np.max(np.abs(shapley_quadrature(game, gauss_legendre_rule(m)).phi - ref))
    print(f"  m={m:2d}  max error {err:.1e}")

# %%
# efficiency: sum(phi) = prod(u) - 1
phi = shapley_quadrature(game, gauss_legendre_rule(10)).phi
print("sum(phi) =", phi.sum(), " prod(u) - 1 =", np.prod(game.factors) - 1)

# %%
# d = 5000: prod(u) ~ 2**2500 overflows, so phi is kept as log|phi| and sign
u = np.where(rng.random(5000) < 0.75, 2.0, 0.5)
big = ProductGame(u)
la = shapley_quadrature_log(big, gauss_legendre_rule(400))
print("log|prod u| =", np.log(u).sum())
print("log|phi| range:", la.log_abs.min(), la.log_abs.max())
print("relative efficiency gap:", log_efficiency_gap(big, la))
