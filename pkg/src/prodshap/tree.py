"""Shapley attribution for decision trees under the path-dependent value function.

Splits on features in the coalition follow the instance; splits on absent
features are averaged with the branch fractions. Every leaf then contributes
a product game over the features on its path, with edge factor ``1/p`` for
followed edges and 0 otherwise.

Two evaluators are provided: :func:`explain_tree_direct` enumerates leaves
(an oracle), :func:`explain_tree_dfs` is a single depth-first pass that
reindexes the leaf sum by edges and runs in time linear in the tree size.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .game import Attribution, DimensionError, InputError, exact_budget
from .parallel import map_ordered
from .quadrature import QuadratureRule, gauss_legendre_rule


class TreeError(InputError):
    """Malformed tree structure."""


class Edge(NamedTuple):
    parent: int
    left: bool


class PathDimension(NamedTuple):
    eta: int  # max distinct split features on a root-to-leaf path
    depth: int  # max root-to-leaf edge count


class Leaf(NamedTuple):
    node: int
    value: float
    edges: tuple  # (feature, threshold, goes_left, p) from root down


@dataclass(frozen=True, eq=False)
class TreeModel:
    """Binary decision tree in flat-array form.

    Internal node ``k`` splits on ``feature[k]``: ``x <= threshold[k]`` goes to
    ``left[k]``, which carries the training fraction ``left_fraction[k]``; the
    right edge carries the rest. Leaves have ``feature == -1`` and a ``value``.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    left_fraction: np.ndarray
    value: np.ndarray
    feature_count: int
    root: int = 0

    def __post_init__(self):
        self._validate()

    @classmethod
    def from_nodes(cls, nodes: Sequence[dict], feature_count: int, root: int = 0) -> "TreeModel":
        n = len(nodes)
        if n == 0:
            raise TreeError("tree has no nodes")
        feat = np.full(n, -1, dtype=np.int64)
        thr = np.full(n, np.nan)
        lft = np.full(n, -1, dtype=np.int64)
        rgt = np.full(n, -1, dtype=np.int64)
        frac = np.full(n, np.nan)
        val = np.full(n, np.nan)
        for k, nd in enumerate(nodes):
            if "children" in nd and len(nd["children"]) != 2:
                raise TreeError(f"node {k} has {len(nd['children'])} children; only binary splits are supported")
            if "value" in nd and "feature" not in nd:
                val[k] = float(nd["value"])
                continue
            try:
                feat[k] = int(nd["feature"])
                thr[k] = float(nd["threshold"])
                lft[k], rgt[k] = (int(nd["left"]), int(nd["right"])) if "left" in nd else map(int, nd["children"])
                frac[k] = float(nd["left_fraction"])
            except (KeyError, TypeError, ValueError) as exc:
                raise TreeError(f"node {k} is neither a valid leaf nor a valid split: {exc}") from None
        return cls(feat, thr, lft, rgt, frac, val, int(feature_count), int(root))

    def to_nodes(self) -> list[dict]:
        out = []
        for k in range(self.n_nodes):
            if self.feature[k] < 0:
                out.append({"value": float(self.value[k])})
            else:
                out.append({"feature": int(self.feature[k]), "threshold": float(self.threshold[k]),
                            "left": int(self.left[k]), "right": int(self.right[k]),
                            "left_fraction": float(self.left_fraction[k])})
        return out

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    def is_leaf(self, k: int) -> bool:
        return self.feature[k] < 0

    def _validate(self):
        n = self.n_nodes
        if self.feature_count < 1:
            raise TreeError("feature_count must be positive")
        if not 0 <= self.root < n:
            raise TreeError(f"root {self.root} out of range")
        parents = np.zeros(n, dtype=np.int64)
        for k in range(n):
            if self.feature[k] < 0:
                if not math.isfinite(self.value[k]):
                    raise TreeError(f"leaf {k} has a non-finite value")
                continue
            if self.feature[k] >= self.feature_count:
                raise TreeError(f"node {k} splits on feature {self.feature[k]} >= feature_count")
            if not math.isfinite(self.threshold[k]):
                raise TreeError(f"node {k} has a non-finite threshold")
            p = self.left_fraction[k]
            if not 0.0 < p < 1.0:
                raise TreeError(f"node {k} has left_fraction {p}; need 0 < p < 1")
            for c in (self.left[k], self.right[k]):
                if not 0 <= c < n:
                    raise TreeError(f"node {k} has child {c} out of range")
                parents[c] += 1
        if parents[self.root] != 0:
            raise TreeError("root has a parent")
        bad = np.flatnonzero(parents[np.arange(n) != self.root] != 1)
        if bad.size:
            others = np.flatnonzero(np.arange(n) != self.root)
            raise TreeError(f"node {others[bad[0]]} does not have exactly one parent")
        seen = 0
        stack = [self.root]
        while stack:
            k = stack.pop()
            seen += 1
            if seen > n:
                raise TreeError("tree contains a cycle")
            if self.feature[k] >= 0:
                stack.extend((int(self.left[k]), int(self.right[k])))
        if seen != n:
            raise TreeError("some nodes are unreachable from the root")

    @cached_property
    def leaves(self) -> list[Leaf]:
        out = []
        stack = [(self.root, ())]
        while stack:
            k, path = stack.pop()
            if self.feature[k] < 0:
                out.append(Leaf(k, float(self.value[k]), path))
                continue
            j, t, p = int(self.feature[k]), float(self.threshold[k]), float(self.left_fraction[k])
            stack.append((int(self.right[k]), path + ((j, t, False, 1.0 - p),)))
            stack.append((int(self.left[k]), path + ((j, t, True, p),)))
        return out

    @cached_property
    def path_dimension(self) -> PathDimension:
        eta = max(len({e[0] for e in lf.edges}) for lf in self.leaves)
        depth = max(len(lf.edges) for lf in self.leaves)
        return PathDimension(eta, depth)

    def predict(self, x) -> float:
        x = check_instance(x, self.feature_count)
        k = self.root
        while self.feature[k] >= 0:
            k = self.left[k] if x[self.feature[k]] <= self.threshold[k] else self.right[k]
        return float(self.value[k])

    def expected_value(self) -> float:
        return math.fsum(lf.value * math.prod(e[3] for e in lf.edges) for lf in self.leaves)


def check_instance(x, d: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != d:
        raise DimensionError(f"instance has {x.shape[-1]} features, model has {d}")
    if not np.all(np.isfinite(x)):
        raise InputError("instances must be finite (missing values are not supported)")
    return x


def effective_path_dimension(tree: TreeModel) -> PathDimension:
    """Max distinct split features on any root-to-leaf path, and the tree depth."""
    return tree.path_dimension


def tree_budget(tree: TreeModel) -> int:
    return max(1, exact_budget(effective_path_dimension(tree).eta))


def _follows(x: np.ndarray, threshold: float, goes_left: bool):
    return (x <= threshold) if goes_left else (x > threshold)


def edge_factor(tree: TreeModel, edge: Edge, x) -> float:
    """``1/p_e`` if ``x`` follows ``edge`` (ties go left), else 0."""
    x = check_instance(x, tree.feature_count)
    k = edge.parent
    if tree.is_leaf(k):
        raise TreeError(f"node {k} is a leaf and has no outgoing edges")
    p = tree.left_fraction[k] if edge.left else 1.0 - tree.left_fraction[k]
    return 1.0 / p if _follows(x[tree.feature[k]], tree.threshold[k], edge.left) else 0.0


def _leaf_q(lf: Leaf, x: np.ndarray) -> dict[int, float]:
    q: dict[int, float] = {}
    for j, t, goes_left, p in lf.edges:
        c = 1.0 / p if _follows(x[j], t, goes_left) else 0.0
        q[j] = q.get(j, 1.0) * c
    return q


def tree_value(tree: TreeModel, x, subset: Iterable[int]) -> float:
    """Coalition value: ``sum_l v_l * prod(p on path) * prod_{j in subset} q_{j,l}(x)``."""
    x = check_instance(x, tree.feature_count)
    s = set(subset)
    total = []
    for lf in tree.leaves:
        w = lf.value * math.prod(e[3] for e in lf.edges)
        for j, qj in _leaf_q(lf, x).items():
            if j in s:
                w *= qj
        total.append(w)
    return math.fsum(total)


def explain_tree_direct(tree: TreeModel, x, rule: QuadratureRule) -> Attribution:
    """Leaf-by-leaf quadrature: ``phi_i = sum_r w_r sum_l G_l(r) s_r(q_{i,l})``.

    Works in the linear domain; ``O(budget * leaves * eta)``.
    """
    x = check_instance(x, tree.feature_count).reshape(-1)
    tau, w = rule.nodes, rule.weights
    phi = np.zeros(tree.feature_count)
    for lf in tree.leaves:
        q = _leaf_q(lf, x)
        if not q:
            continue
        feats = np.fromiter(q.keys(), dtype=np.int64)
        qv = np.fromiter(q.values(), dtype=np.float64)
        a = (1.0 - tau)[:, None] + tau[:, None] * qv[None, :]  # (m, k)
        g = lf.value * math.prod(e[3] for e in lf.edges) * np.prod(a, axis=1)
        s = (qv[None, :] - 1.0) / a
        phi[feats] += w @ (g[:, None] * s)
    return Attribution(phi, budget=rule.order, exact=rule.order >= exact_budget(_eta(tree)),
                       base_value=tree.expected_value())


def _eta(tree: TreeModel) -> int:
    return effective_path_dimension(tree).eta


class PathState:
    """DFS state over a batch of instances: log path factors and running log products.

    ``log_q[:, j]`` is ``log q_j`` per instance (``-inf`` encodes ``q_j = 0``);
    ``log_b[:, r]`` is ``log(prod p_e * prod_j a_r(q_j))``. Descending an edge
    pushes the old column and row block; backtracking restores the saved
    copies, so the state after a full traversal is bitwise the initial one.
    """

    def __init__(self, n: int, d: int, rule: QuadratureRule):
        self.log_q = np.zeros((n, d))
        self.log_b = np.zeros((n, rule.order))
        self.stack: list[tuple[int, np.ndarray, np.ndarray]] = []

    def push(self, j: int, log_q_new: np.ndarray, log_b_new: np.ndarray):
        self.stack.append((j, self.log_q[:, j].copy(), self.log_b))
        self.log_q[:, j] = log_q_new
        self.log_b = log_b_new

    def pop(self):
        j, old_q, old_b = self.stack.pop()
        self.log_q[:, j] = old_q
        self.log_b = old_b


class _Kernels:
    """``log a_r(q)`` and ``s_r(q)`` from ``log q``, stable for any magnitude of ``q``."""

    def __init__(self, rule: QuadratureRule):
        self.tau = rule.nodes[None, :]
        self.one_m = 1.0 - self.tau
        self.log_one_m = np.log(self.one_m)
        self.s_zero = -1.0 / self.one_m

    def log_a(self, lq: np.ndarray) -> np.ndarray:
        # a = q * (tau + (1 - tau) / q) for q >= 1
        zero = np.isneginf(lq)
        e = np.exp(-np.where(zero, 0.0, lq))[:, None]
        out = lq[:, None] + np.log(self.tau + self.one_m * e)
        return np.where(zero[:, None], self.log_one_m, out) if zero.any() else out

    def s(self, lq: np.ndarray) -> np.ndarray:
        zero = np.isneginf(lq)
        safe = np.where(zero, 0.0, lq)
        e = np.exp(-safe)[:, None]
        out = -np.expm1(-safe)[:, None] / (self.one_m * e + self.tau)
        return np.where(zero[:, None], self.s_zero, out) if zero.any() else out


def _dfs_batch(tree: TreeModel, X: np.ndarray, rule: QuadratureRule, state: PathState | None = None) -> np.ndarray:
    n, d = X.shape
    m = rule.order
    k = _Kernels(rule)
    st = state if state is not None else PathState(n, d, rule)
    acc = np.zeros((d, n, m))
    feat, thr = tree.feature.tolist(), tree.threshold.tolist()
    lft, rgt, frac, val = tree.left.tolist(), tree.right.tolist(), tree.left_fraction.tolist(), tree.value.tolist()

    def visit(u: int) -> np.ndarray:
        if feat[u] < 0:
            return val[u] * np.exp(st.log_b)
        j = feat[u]
        goes = X[:, j] <= thr[u]
        lq_old = st.log_q[:, j].copy()
        la_old = k.log_a(lq_old)
        s_old = k.s(lq_old)
        h_tot = None
        for child, follow, p in ((lft[u], goes, frac[u]), (rgt[u], ~goes, 1.0 - frac[u])):
            lq_new = np.where(follow, lq_old - math.log(p), -np.inf)
            log_b = st.log_b + (math.log(p) + k.log_a(lq_new) - la_old)
            st.push(j, lq_new, log_b)
            h = visit(child)
            st.pop()
            acc[j] += h * (k.s(lq_new) - s_old)
            h_tot = h if h_tot is None else h_tot + h
        return h_tot

    limit = sys.getrecursionlimit()
    need = effective_path_dimension(tree).depth + 100
    if need > limit:
        sys.setrecursionlimit(need)
    try:
        visit(tree.root)
    finally:
        sys.setrecursionlimit(limit)
    phi = np.zeros((n, d))
    w = rule.weights
    for r in range(m):
        phi += w[r] * acc[:, :, r].T
    return phi


def explain_tree_dfs(tree: TreeModel, x, rule: QuadratureRule | None = None) -> Attribution:
    """Single-pass edge-telescoped quadrature over the tree.

    ``x`` may be one instance (shape ``(d,)``) or a batch ``(n, d)``; a batch
    is traversed once with all instances carried in parallel. Work is
    ``O(budget * leaves)`` per instance and memory ``O(budget * depth + d)``.
    With ``rule=None`` the exact budget ``ceil(eta / 2)`` is used.
    """
    x = check_instance(x, tree.feature_count)
    if rule is None:
        rule = gauss_legendre_rule(tree_budget(tree))
    X = x.reshape(-1, tree.feature_count)
    phi = _dfs_batch(tree, X, rule)
    return Attribution(phi[0] if x.ndim == 1 else phi, budget=rule.order,
                       exact=rule.order >= exact_budget(_eta(tree)), base_value=tree.expected_value())


def _check_ensemble(trees: Sequence[TreeModel]) -> int:
    if not trees:
        raise InputError("ensemble is empty")
    d = trees[0].feature_count
    if any(t.feature_count != d for t in trees):
        raise DimensionError("all trees in an ensemble must share feature_count")
    return d


def explain_ensemble(trees: Sequence[TreeModel], x, budget: int | None = None, cap: int | None = None,
                     threads: int | None = None) -> Attribution:
    """Sum of per-tree attributions.

    Each tree uses its own exact budget ``ceil(eta_t / 2)`` (optionally capped
    at ``cap``) unless ``budget`` fixes one order for all trees. Trees may run
    on worker threads; the cross-tree sum is in ascending tree order.
    """
    d = _check_ensemble(trees)
    x = check_instance(x, d)
    X = x.reshape(-1, d)
    orders = []
    for t in trees:
        o = budget if budget is not None else tree_budget(t)
        orders.append(min(o, cap) if cap else o)

    def one(i):
        return _dfs_batch(trees[i], X, gauss_legendre_rule(orders[i]))

    parts = map_ordered(one, range(len(trees)), threads)
    phi = np.zeros_like(X)
    for p in parts:
        phi = phi + p
    exact = all(o >= exact_budget(_eta(t)) for o, t in zip(orders, trees))
    base = math.fsum(t.expected_value() for t in trees)
    return Attribution(phi[0] if x.ndim == 1 else phi, budget=max(orders), exact=exact, base_value=base,
                       meta={"budgets": orders})


def ensemble_predict(trees: Sequence[TreeModel], x) -> float:
    return math.fsum(t.predict(x) for t in trees)


def efficiency_violation(trees: Sequence[TreeModel] | TreeModel, x, phi) -> float:
    """``max_i |E[f] + sum_j phi_ij - f(x_i)|`` over the rows of ``x``."""
    if isinstance(trees, TreeModel):
        trees = [trees]
    d = _check_ensemble(trees)
    X = check_instance(x, d).reshape(-1, d)
    P = np.asarray(phi, dtype=np.float64).reshape(-1, d)
    if P.shape[0] != X.shape[0]:
        raise DimensionError("phi and x have different row counts")
    base = math.fsum(t.expected_value() for t in trees)
    worst = 0.0
    for xi, pi in zip(X, P):
        gap = abs(base + math.fsum(pi) - ensemble_predict(trees, xi)) if np.all(np.isfinite(pi)) else math.inf
        worst = max(worst, gap)
    return worst
