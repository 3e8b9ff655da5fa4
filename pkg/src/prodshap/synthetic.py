"""Seeded generators for synthetic models, instances and games."""

from __future__ import annotations

import numpy as np

from .game import ProductGame
from .kernel import KernelSpec, ProductKernelModel
from .tree import TreeModel


def random_tree(rng: np.random.Generator, d: int, n_leaves: int, max_depth: int = 50,
                p_range=(0.1, 0.9), value_range=(-10.0, 10.0), deep_bias: float = 0.5) -> TreeModel:
    """Grow a random binary tree to ``n_leaves`` leaves (fewer if ``max_depth`` binds).

    Each step splits a leaf of depth below ``max_depth``: with probability
    ``deep_bias`` the most recently created one (which grows long paths),
    otherwise one chosen uniformly. Split features are uniform over ``d``,
    thresholds standard normal, left fractions uniform on ``p_range`` and
    leaf values uniform on ``value_range``.
    """
    nodes: list[dict] = [{}]
    depth = [0]
    open_ = [0] if max_depth > 0 else []
    leaves = 1
    while leaves < n_leaves and open_:
        pos = len(open_) - 1 if rng.random() < deep_bias else int(rng.integers(len(open_)))
        k = open_[pos]
        open_[pos] = open_[-1]
        open_.pop()
        lo, hi = len(nodes), len(nodes) + 1
        nodes[k] = {"feature": int(rng.integers(d)), "threshold": float(rng.standard_normal()),
                    "left": lo, "right": hi, "left_fraction": float(rng.uniform(*p_range))}
        nodes.extend(({}, {}))
        depth.extend((depth[k] + 1, depth[k] + 1))
        if depth[k] + 1 < max_depth:
            open_.extend((lo, hi))
        leaves += 1
    for nd in nodes:
        if not nd:
            nd["value"] = float(rng.uniform(*value_range))
    return TreeModel.from_nodes(nodes, d)


def random_ensemble(rng: np.random.Generator, d: int, total_leaves: int, n_trees: int,
                    max_depth: int = 50, **kw) -> list[TreeModel]:
    """``n_trees`` random trees whose leaf counts sum to ``total_leaves``."""
    per = [total_leaves // n_trees + (1 if t < total_leaves % n_trees else 0) for t in range(n_trees)]
    return [random_tree(rng, d, max(1, k), max_depth, **kw) for k in per]


def regression_data(rng: np.random.Generator, n: int, d: int, noise: float = 0.1):
    """Standardized linear-regression data with ``d // 4`` informative features."""
    X = rng.standard_normal((n, d))
    coef = np.zeros(d)
    k = max(1, d // 4)
    coef[rng.choice(d, k, replace=False)] = rng.uniform(0, 100, k)
    y = X @ coef + noise * rng.standard_normal(n)
    y = (y - y.mean()) / y.std()
    return X, y


def kernel_ridge_model(rng: np.random.Generator, n: int, d: int, lengthscale: float | None = None,
                       ridge: float = 1e-2) -> ProductKernelModel:
    """RBF kernel ridge regressor fitted on :func:`regression_data`.

    The default lengthscale is ``sqrt(d)``, which keeps the full kernel away
    from 0 for standardized inputs.
    """
    X, y = regression_data(rng, n, d)
    ls = float(np.sqrt(d)) if lengthscale is None else float(lengthscale)
    spec = KernelSpec("rbf", lengthscales=np.full(d, ls))
    sq = ((X[:, None, :] - X[None, :, :]) ** 2).sum(-1)
    K = np.exp(-sq / (2 * ls * ls))
    alpha = np.linalg.solve(K + ridge * np.eye(n), y)
    return ProductKernelModel(alpha, X, spec, meta={"ridge": ridge})


def random_kernel_model(rng: np.random.Generator, n: int, d: int, ls_range=(0.3, 3.0)) -> ProductKernelModel:
    """Random coefficients and training rows with per-feature lengthscales on ``ls_range``."""
    return ProductKernelModel(rng.standard_normal(n), rng.standard_normal((n, d)),
                              KernelSpec("rbf", lengthscales=rng.uniform(*ls_range, d)))


def random_game(rng: np.random.Generator, d: int, low: float = -2.0, high: float = 3.0) -> ProductGame:
    return ProductGame(rng.uniform(low, high, d))
