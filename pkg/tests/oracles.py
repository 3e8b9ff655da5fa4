"""Reference computations that share no code with the package.

Everything here is either exhaustive enumeration or exact rational
arithmetic, so it can serve as ground truth for the estimators.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np


def shapley_weights(d: int) -> np.ndarray:
    """``s! (d-s-1)! / d!`` from exact integer factorials."""
    return np.array([float(Fraction(math.factorial(s) * math.factorial(d - s - 1), math.factorial(d)))
                     for s in range(d)])


def popcount(masks: np.ndarray) -> np.ndarray:
    out = np.zeros_like(masks)
    m = masks.copy()
    while np.any(m):
        out += m & 1
        m >>= 1
    return out


def shapley_from_table(v: np.ndarray) -> np.ndarray:
    """Shapley vector from ``v[mask]`` over all ``2**d`` coalitions."""
    d = int(len(v)).bit_length() - 1
    masks = np.arange(1 << d)
    size = popcount(masks)
    mu = shapley_weights(d)
    phi = np.empty(d)
    for i in range(d):
        S = masks[(masks >> i) & 1 == 0]
        phi[i] = math.fsum(mu[size[S]] * (v[S | (1 << i)] - v[S]))
    return phi


def product_table(u) -> np.ndarray:
    """``prod(u[S])`` for every mask, bit j <-> u[j]."""
    v = np.ones(1)
    for x in u:
        v = np.concatenate([v, v * x])
    return v


def product_game_shapley(u) -> np.ndarray:
    return shapley_from_table(product_table(np.asarray(u, dtype=float)))


def exact_product_game_shapley(u) -> list[Fraction]:
    """Exact Shapley vector of a product game via elementary symmetric polynomials.

    ``phi_i = (u_i - 1) * sum_s mu(s) e_s(u_{-i})`` in rational arithmetic on
    the exact binary values of ``u``; usable for d in the hundreds.
    """
    u = [Fraction(float(x)) for x in u]
    d = len(u)
    mu = [Fraction(math.factorial(s) * math.factorial(d - s - 1), math.factorial(d)) for s in range(d)]
    out = []
    for i in range(d):
        e = [Fraction(1)] + [Fraction(0)] * (d - 1)
        for j, x in enumerate(u):
            if j == i:
                continue
            for s in range(d - 1, 0, -1):
                e[s] += e[s - 1] * x
        out.append((u[i] - 1) * sum(m * es for m, es in zip(mu, e)))
    return out


def random_tree_nodes(rng: np.random.Generator, d: int, depth: int, stop: float = 0.3) -> list[dict]:
    """Recursive random tree as a node list (root at index 0)."""
    nodes: list = []

    def grow(k: int) -> int:
        idx = len(nodes)
        nodes.append(None)
        if k == depth or (k > 0 and rng.random() < stop):
            nodes[idx] = {"value": float(rng.uniform(-10, 10))}
            return idx
        j = int(rng.integers(d))
        t = float(rng.normal())
        p = float(rng.uniform(0.1, 0.9))
        lo = grow(k + 1)
        hi = grow(k + 1)
        nodes[idx] = {"feature": j, "threshold": t, "left": lo, "right": hi, "left_fraction": p}
        return idx

    grow(0)
    return nodes


def leaf_paths(nodes: list[dict], root: int = 0):
    """(value, [(feature, threshold, goes_left, p_edge)]) for each leaf."""
    out = []

    def walk(k, path):
        nd = nodes[k]
        if "value" in nd:
            out.append((nd["value"], path))
            return
        p = nd["left_fraction"]
        walk(nd["left"], path + [(nd["feature"], nd["threshold"], True, p)])
        walk(nd["right"], path + [(nd["feature"], nd["threshold"], False, 1 - p)])

    walk(root, [])
    return out


def tree_table(nodes: list[dict], d: int, x) -> np.ndarray:
    """Value ``v(S)`` of the path-dependent extended tree for every mask."""
    total = np.zeros(1 << d)
    for value, path in leaf_paths(nodes):
        weight = math.prod(p for *_, p in path)
        q = np.ones(d)
        for j, thr, left, p in path:
            follows = (x[j] <= thr) == left
            q[j] *= (1.0 / p) if follows else 0.0
        total += value * weight * product_table(q)
    return total


def tree_predict(nodes: list[dict], x) -> float:
    k = 0
    while "value" not in nodes[k]:
        nd = nodes[k]
        k = nd["left"] if x[nd["feature"]] <= nd["threshold"] else nd["right"]
    return nodes[k]["value"]


def kernel_table(alpha, train, lengthscales, x) -> np.ndarray:
    """``sum_i alpha_i prod_{j in S} exp(-(x_j - X_ij)^2 / (2 l_j^2))`` for every mask."""
    K = np.exp(-((x[None, :] - train) ** 2) / (2 * np.asarray(lengthscales) ** 2))
    return sum(a * product_table(row) for a, row in zip(alpha, K))
