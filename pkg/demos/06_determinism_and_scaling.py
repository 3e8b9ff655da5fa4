"""Worker count never changes the result; cost grows linearly in leaves and training rows."""

# %%
import numpy as np

from prodshap import KernelSpec, ProductKernelModel, explain_ensemble, explain_kernel, set_threads
from prodshap.harness import doubling_ratios, median_time
from prodshap.parallel import max_threads, tree_sum
from prodshap.quadrature import gauss_legendre_rule
from prodshap.synthetic import random_ensemble, random_tree
from prodshap.tree import explain_tree_dfs

rng = np.random.default_rng(4)

# fixed-shape reduction: chunks of 4096 summed in order, chunk totals paired as a tree
v = np.full(10**6, np.log1p(1e-9))
print("sum identical for 1 and 4 workers:", tree_sum(v, threads=1).tobytes() == tree_sum(v, threads=4).tobytes())

# %%
trees = random_ensemble(rng, 30, 2000, 8, max_depth=30)
X = rng.standard_normal((10, 30))
runs = []
for n in sorted({1, 2, max_threads()}):
    set_threads(n)
    runs.append(explain_ensemble(trees, X).phi.tobytes())
set_threads(None)
print("phi bitwise identical across thread counts:", all(r == runs[0] for r in runs))

# %%
# one traversal per tree: doubling leaves roughly doubles time
rule = gauss_legendre_rule(8)
times = []
for leaves in (1000, 2000, 4000):
    t = random_tree(rng, 20, leaves)
    times.append(median_time(lambda: explain_tree_dfs(t, X[:, :20], rule)))
print("leaf doubling ratios:", np.round(doubling_ratios(times), 2))

# %%
# one product game per training row: doubling n roughly doubles time
times = []
x = rng.standard_normal(100)
for n in (400, 800, 1600):
    m = ProductKernelModel(rng.standard_normal(n), rng.standard_normal((n, 100)), KernelSpec("rbf", [3.0]))
    times.append(median_time(lambda: explain_kernel(m, x, 50)))
print("row doubling ratios:", np.round(doubling_ratios(times), 2))
