"""Gauss-Legendre rules on [0, 1]."""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np

MAX_ORDER = 100_000
NEWTON_TOL = 1e-15
NEWTON_MAXITER = 100


class BudgetError(ValueError):
    """Quadrature order (budget) outside the accepted range."""


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Nodes ``tau`` (ascending, inside (0, 1)) and positive weights ``w``.

    An ``order``-point rule integrates every polynomial of degree at most
    ``2 * order - 1`` exactly on [0, 1].
    """

    order: int
    nodes: np.ndarray
    weights: np.ndarray

    def __len__(self):
        return self.order

    def integrate(self, fn) -> float:
        return float(np.dot(self.weights, fn(self.nodes)))

    def to_dict(self) -> dict:
        return {"order": self.order, "nodes": self.nodes.tolist(), "weights": self.weights.tolist()}


def _legendre(n: int, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """P_n(x) and P_{n-1}(x) by the three-term recurrence."""
    p0 = np.ones_like(x)
    p1 = x.copy()
    if n == 0:
        return p0, np.zeros_like(x)
    for k in range(2, n + 1):
        p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
    return p1, p0


def _newton_roots(n: int) -> np.ndarray:
    """Positive roots of P_n on [-1, 1], in descending order."""
    half = n // 2
    k = np.arange(1, half + 1)
    # Chebyshev-type seeds, interlaced with the true roots
    theta = np.pi * (4 * k - 1) / (4 * n + 2)
    x = np.cos(theta + 1.0 / (8.0 * n * n * np.tan(theta)))
    for _ in range(NEWTON_MAXITER):
        p, pm1 = _legendre(n, x)
        dp = n * (pm1 - x * p) / (1.0 - x * x)
        step = p / dp
        x = x - step
        if np.max(np.abs(step)) <= NEWTON_TOL:
            break
    else:
        x = _bisect_roots(n, x)
    return x


def _bisect_roots(n: int, guess: np.ndarray) -> np.ndarray:
    """Fallback: bracket each Newton guess and bisect to full precision."""
    out = np.empty_like(guess)
    h = 0.5 * np.pi / (n + 0.5)
    for i, g in enumerate(guess):
        th = math.acos(min(1.0, max(-1.0, g)))
        lo, hi = math.cos(min(math.pi, th + h)), math.cos(max(0.0, th - h))
        flo = _legendre(n, np.array([lo]))[0][0]
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            fm = _legendre(n, np.array([mid]))[0][0]
            if (fm > 0) == (flo > 0):
                lo, flo = mid, fm
            else:
                hi = mid
            if hi - lo <= 2e-16:
                break
        out[i] = 0.5 * (lo + hi)
    return out


def _compute(m: int) -> QuadratureRule:
    if m == 1:
        nodes, weights = np.array([0.5]), np.array([1.0])
    else:
        x = _newton_roots(m)  # positive roots, descending in x, so lower nodes ascend
        p, pm1 = _legendre(m, x)
        dp = m * (pm1 - x * p) / (1.0 - x * x)
        # weight on [0, 1] is half the [-1, 1] weight 2 / ((1 - x^2) P'(x)^2)
        w = 1.0 / ((1.0 - x * x) * dp * dp)
        # (1 - x) / 2 loses relative accuracy for x near 1; use the half-angle form
        lower = np.sin(0.5 * np.arccos(x)) ** 2
        if m % 2:
            _, pm1 = _legendre(m, np.array([0.0]))
            dp0 = m * pm1[0]
            mid_w = np.array([1.0 / (dp0 * dp0)])
            nodes = np.concatenate([lower, [0.5], 1.0 - lower[::-1]])
            weights = np.concatenate([w, mid_w, w[::-1]])
        else:
            nodes = np.concatenate([lower, 1.0 - lower[::-1]])
            weights = np.concatenate([w, w[::-1]])
    nodes.flags.writeable = False
    weights.flags.writeable = False
    return QuadratureRule(m, nodes, weights)


_cache: dict[int, QuadratureRule] = {}
_cache_lock = threading.Lock()


def gauss_legendre_rule(m: int, max_order: int = MAX_ORDER) -> QuadratureRule:
    """Return the ``m``-point Gauss-Legendre rule on [0, 1].

    Rules are memoized per process; repeated calls return the same object.

    Raises
    ------
    BudgetError
        If ``m < 1`` or ``m > max_order``.
    """
    if isinstance(m, bool) or int(m) != m:
        raise BudgetError(f"quadrature order must be an integer, got {m!r}")
    m = int(m)
    if m < 1:
        raise BudgetError(f"quadrature order must be >= 1, got {m}")
    if m > max_order:
        raise BudgetError(f"quadrature order {m} exceeds the cap {max_order}")
    rule = _cache.get(m)
    if rule is None:
        rule = _compute(m)
        with _cache_lock:
            _cache[m] = rule
    return rule


def monomial_exactness_defect(rule: QuadratureRule, k: int) -> float:
    """``|sum_q w_q tau_q**k - 1/(k+1)|``."""
    if k < 0:
        raise ValueError("monomial degree must be nonnegative")
    return abs(math.fsum(rule.weights * rule.nodes ** k) - 1.0 / (k + 1))
