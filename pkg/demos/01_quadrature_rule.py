"""Gauss-Legendre rules on [0, 1] and the polynomial degree they integrate exactly."""

# %%
import numpy as np

from prodshap import gauss_legendre_rule, monomial_exactness_defect

# an m-point rule: ascending nodes inside (0, 1), positive weights summing to 1
rule = gauss_legendre_rule(4)
print("nodes  ", rule.nodes)
print("weights", rule.weights)
print("sum of weights - 1:", rule.weights.sum() - 1)

# %%
# exact up to degree 2m - 1, then the defect jumps
for k in range(0, 10):
    print(f"k={k}: |sum w t^k - 1/(k+1)| = {monomial_exactness_defect(rule, k):.1e}")

# %%
# large orders stay symmetric: t_q + t_(m+1-q) = 1, w_q = w_(m+1-q)
big = gauss_legendre_rule(2000)
print("max node asymmetry  ", np.max(np.abs(big.nodes + big.nodes[::-1] - 1)))
print("max weight asymmetry", np.max(np.abs(big.weights - big.weights[::-1])))
