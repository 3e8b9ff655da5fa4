"""Path-dependent attributions for decision-tree ensembles in one traversal per tree."""

# %%
import numpy as np

from prodshap import explain_ensemble, explain_tree_dfs, explain_tree_direct, gauss_legendre_rule, tree_value
from prodshap.game import enumerate_values, shapley_from_values
from prodshap.synthetic import random_ensemble, random_tree
from prodshap.tree import efficiency_violation, tree_budget

rng = np.random.default_rng(2)
tree = random_tree(rng, d=6, n_leaves=40, max_depth=8)
x = rng.standard_normal(6)
eta, depth = tree.path_dimension
print(f"{len(tree.leaves)} leaves, depth {depth}, at most {eta} distinct features per path")

# %%
# the budget depends on distinct features per path, not on depth
rule = gauss_legendre_rule(tree_budget(tree))
dfs = explain_tree_dfs(tree, x, rule).phi
direct = explain_tree_direct(tree, x, rule).phi
ref = shapley_from_values(enumerate_values(lambda s: tree_value(tree, x, s), 6))
print("dfs   ", np.round(dfs, 6))
print("|dfs - direct|      ", np.max(np.abs(dfs - direct)))
print("|dfs - enumeration| ", np.max(np.abs(dfs - ref)))

# %%
# a deep ensemble: 10 trees, 5000 leaves, paths up to 50 splits
trees = random_ensemble(rng, d=100, total_leaves=5000, n_trees=10, max_depth=50)
X = rng.standard_normal((20, 100))
attr = explain_ensemble(trees, X)
print("per-tree budgets:", attr.meta["budgets"])
print("max |E[f] + sum(phi) - f(x)| over 20 rows:", efficiency_violation(trees, X, attr.phi))
