"""Shapley values of product games.

A product game on ``d`` players has coalition value ``v(S) = prod_{j in S} u_j``
with ``v(empty) = 1``. Its Shapley vector is a one-dimensional polynomial
integral, evaluated here with a Gauss-Legendre rule. Leave-one-out products
are formed from one shared product per node, in log space with explicit sign
tracking, so large ``d`` neither overflows nor underflows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .parallel import map_ordered, tree_sum
from .quadrature import QuadratureRule

DEFAULT_CAP = 400
BRUTEFORCE_MAX_D = 25
# elements per (games x nodes x features) block
BLOCK_ELEMS = 1 << 22


class InputError(ValueError):
    """Invalid numeric input (empty, non-finite, malformed)."""


class DimensionError(ValueError):
    """Mismatched or unsupported dimensions."""


@dataclass(frozen=True, eq=False)
class ProductGame:
    """Per-player multiplicative factors ``u``; ``v(S) = prod(u[S])``."""

    factors: np.ndarray

    def __post_init__(self):
        u = np.array(self.factors, dtype=np.float64).reshape(-1)
        if u.size == 0:
            raise InputError("a product game needs at least one player")
        if not np.all(np.isfinite(u)):
            raise InputError("product-game factors must be finite")
        u.flags.writeable = False
        object.__setattr__(self, "factors", u)

    @property
    def d(self) -> int:
        return self.factors.size

    def value(self, subset: Iterable[int]) -> float:
        idx = list(subset)
        return float(np.prod(self.factors[idx])) if idx else 1.0


@dataclass
class Attribution:
    """Shapley vector with the budget that produced it.

    ``exact`` is true when the rule order reaches the exactness threshold
    ``ceil(d / 2)`` (or the computation was exhaustive). ``base_value`` is the
    part of the prediction not attributed to any feature.
    """

    phi: np.ndarray
    budget: int
    exact: bool
    base_value: float = 0.0
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {"phi": np.asarray(self.phi).tolist(), "budget": int(self.budget), "exact": bool(self.exact)}
        if self.base_value or "base_value" in self.meta:
            out["base_value"] = float(self.base_value)
        return out


@dataclass
class LogAttribution:
    """Shapley vector stored as ``sign * exp(log_abs)``, for results beyond double range."""

    log_abs: np.ndarray
    sign: np.ndarray
    budget: int
    exact: bool

    def to_linear(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return self.sign * np.exp(self.log_abs)


@dataclass(frozen=True)
class SignedLogProduct:
    """Product of the node factors ``T_j = (1 - tau) + tau * u_j``.

    ``log_magnitude`` and ``rest_sign`` describe the product over the nonzero
    factors; ``sign`` is the sign of the full product (0 when any factor is 0).
    ``zero_index`` is set only when exactly one factor is zero.
    """

    log_magnitude: float
    sign: int
    zero_count: int
    zero_index: int | None = None
    rest_sign: int = 1

    def leave_one_out(self, i: int, t_i: float) -> float:
        """``prod_{j != i} T_j`` given ``t_i = T_i``."""
        if self.zero_count == 0:
            return self.sign * math.copysign(1.0, t_i) * math.exp(self.log_magnitude - math.log(abs(t_i)))
        if self.zero_count == 1 and i == self.zero_index:
            return self.rest_sign * math.exp(self.log_magnitude)
        return 0.0


def exact_budget(d: int) -> int:
    """Smallest rule order that makes the estimator exact for ``d`` players."""
    return (d + 1) // 2


def default_budget(d: int, cap: int = DEFAULT_CAP) -> int:
    if d < 1 or cap < 1:
        raise ValueError("d and cap must be positive")
    return min(exact_budget(d), cap)


def shapley_weight(s: int, d: int) -> float:
    """Coalition weight ``s! (d-s-1)! / d!``, via log-gamma."""
    if d < 1 or not 0 <= s <= d - 1:
        raise ValueError(f"need 0 <= s <= d-1, got s={s}, d={d}")
    return math.exp(math.lgamma(s + 1) + math.lgamma(d - s) - math.lgamma(d + 1))


def _as_game(game) -> ProductGame:
    return game if isinstance(game, ProductGame) else ProductGame(game)


def _subset_table(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Products and sizes of all 2**k subsets of ``values``, bit j <-> values[j]."""
    prod = np.ones(1)
    size = np.zeros(1, dtype=np.int64)
    for v in values:
        prod = np.concatenate([prod, prod * v])
        size = np.concatenate([size, size + 1])
    return prod, size


def shapley_bruteforce(game) -> Attribution:
    """Exact Shapley vector by summing over every coalition of the other players.

    Raises
    ------
    DimensionError
        If the game has more than 25 players.
    """
    game = _as_game(game)
    d, u = game.d, game.factors
    if d > BRUTEFORCE_MAX_D:
        raise DimensionError(f"brute force is limited to d <= {BRUTEFORCE_MAX_D}, got {d}")
    mu = np.array([shapley_weight(s, d) for s in range(d)])
    phi = np.empty(d)
    for i in range(d):
        prod, size = _subset_table(np.delete(u, i))
        phi[i] = (u[i] - 1.0) * math.fsum(mu[size] * prod)
    return Attribution(phi, budget=0, exact=True)


def shapley_logspace_node(game, tau: float) -> SignedLogProduct:
    """Shared signed log-space product of all node factors at ``tau``."""
    game = _as_game(game)
    if not 0.0 < tau < 1.0:
        raise ValueError("tau must lie in (0, 1)")
    t = (1.0 - tau) + tau * game.factors
    zero = t == 0.0
    zc = int(zero.sum())
    logs = np.sort(np.log(np.abs(t[~zero])))
    log_mag = float(tree_sum(logs)) if logs.size else 0.0
    rest = -1 if int((t < 0).sum()) % 2 else 1
    return SignedLogProduct(
        log_magnitude=log_mag,
        sign=0 if zc else rest,
        zero_count=zc,
        zero_index=int(np.flatnonzero(zero)[0]) if zc == 1 else None,
        rest_sign=rest,
    )


def _node_logs(u: np.ndarray, rule: QuadratureRule):
    """Per-node factor logs for a block of games ``u`` of shape (g, d).

    Returns ``(log|T|, sign T, zero mask, log|P|, rest sign, zero count)``;
    ``log|T|`` is 0 where ``T`` is exactly zero, and ``log|P|`` excludes zeros.
    """
    tau = rule.nodes[:, None]
    t = (1.0 - tau) + tau * u[:, None, :]  # (g, m, d)
    zero = t == 0.0
    with np.errstate(divide="ignore"):
        log_t = np.log(np.abs(t))
    log_t[zero] = 0.0
    neg = t < 0.0
    sgn_t = np.where(neg, -1.0, 1.0)
    # sorted summation keeps the result independent of player order
    log_p = tree_sum(np.sort(log_t, axis=-1), axis=-1)
    rest = np.where(neg.sum(-1) % 2 == 1, -1.0, 1.0)
    zc = zero.sum(-1)
    return log_t, sgn_t, zero, log_p, rest, zc


def _loo_mask(zero: np.ndarray, zc: np.ndarray) -> np.ndarray:
    """Entries whose leave-one-out product can be nonzero."""
    zc = zc[..., None]
    return (zc == 0) | ((zc == 1) & zero)


def _phi_block(u: np.ndarray, rule: QuadratureRule) -> np.ndarray:
    log_t, sgn_t, zero, log_p, rest, zc = _node_logs(u, rule)
    with np.errstate(over="ignore"):
        loo = (rest[..., None] * sgn_t) * np.exp(log_p[..., None] - log_t)
    loo = np.where(_loo_mask(zero, zc), loo, 0.0)
    integral = tree_sum(rule.weights[:, None] * loo, axis=-2)  # sum over nodes, ascending
    with np.errstate(invalid="ignore", over="ignore"):
        return np.where(u == 1.0, 0.0, (u - 1.0) * integral)


def _block_rows(g: int, d: int, m: int) -> int:
    return max(1, min(g, BLOCK_ELEMS // max(1, d * m)))


def shapley_quadrature_batch(u: np.ndarray, rule: QuadratureRule) -> np.ndarray:
    """Estimator for a stack of games ``u`` of shape (g, d); returns (g, d).

    Blocks of games are independent work items; their results are stacked,
    never summed, so the worker count cannot change any output bit.
    """
    u = np.asarray(u, dtype=np.float64)
    if u.ndim != 2:
        raise DimensionError("expected a (games, players) array")
    g, d = u.shape
    step = _block_rows(g, d, rule.order)
    blocks = [u[lo:lo + step] for lo in range(0, g, step)]
    return np.concatenate(map_ordered(lambda b: _phi_block(b, rule), blocks), axis=0)


def shapley_quadrature(game, rule: QuadratureRule) -> Attribution:
    """Quadrature Shapley estimator; exact once ``rule.order >= ceil(d/2)``."""
    game = _as_game(game)
    phi = shapley_quadrature_batch(game.factors[None, :], rule)[0]
    return Attribution(phi, budget=rule.order, exact=rule.order >= exact_budget(game.d))


def shapley_weighted_sum(terms: Sequence[tuple[float, object]], rule: QuadratureRule) -> Attribution:
    """``sum_k alpha_k * phi(game_k)`` by linearity of the Shapley value."""
    if not terms:
        raise InputError("no games to combine")
    alphas = np.array([float(a) for a, _ in terms])
    games = [_as_game(g) for _, g in terms]
    d = games[0].d
    if any(g.d != d for g in games):
        raise DimensionError("all games in a weighted sum must have the same number of players")
    phis = shapley_quadrature_batch(np.stack([g.factors for g in games]), rule)
    phi = tree_sum(alphas[:, None] * phis, axis=0)
    return Attribution(phi, budget=rule.order, exact=rule.order >= exact_budget(d))


def signed_logsumexp(log_abs: np.ndarray, sign: np.ndarray, axis: int = -1) -> tuple[np.ndarray, np.ndarray]:
    """``log|sum s_k exp(a_k)|`` and its sign along ``axis``.

    Terms with ``sign == 0`` or ``log_abs == -inf`` are ignored. An all-empty
    sum returns ``(-inf, 0)``.
    """
    a = np.moveaxis(np.asarray(log_abs, dtype=np.float64), axis, -1)
    s = np.moveaxis(np.asarray(sign, dtype=np.float64), axis, -1)
    live = (s != 0) & np.isfinite(a)
    a = np.where(live, a, -np.inf)
    top = np.max(a, axis=-1)
    safe_top = np.where(np.isfinite(top), top, 0.0)
    scaled = np.where(live, s * np.exp(a - safe_top[..., None]), 0.0)
    total = tree_sum(scaled, axis=-1)
    with np.errstate(divide="ignore"):
        out = np.log(np.abs(total)) + safe_top
    out = np.where(total == 0.0, -np.inf, out)
    return out, np.sign(total)


def shapley_quadrature_log(game, rule: QuadratureRule) -> LogAttribution:
    """Quadrature estimator returning ``log|phi|`` and ``sign(phi)``.

    Every intermediate stays in log space, so the result is finite even when
    ``prod(u)`` and ``phi`` lie far outside the double range.
    """
    game = _as_game(game)
    u = game.factors[None, :]
    log_t, sgn_t, zero, log_p, rest, zc = _node_logs(u, rule)
    log_t, sgn_t, zero, log_p, rest, zc = log_t[0], sgn_t[0], zero[0], log_p[0], rest[0], zc[0]
    with np.errstate(divide="ignore"):
        terms = np.log(rule.weights)[:, None] + log_p[:, None] - log_t  # (m, d)
    sign = rest[:, None] * sgn_t
    sign = np.where(_loo_mask(zero, zc), sign, 0.0)
    log_int, sign_int = signed_logsumexp(terms, sign, axis=0)
    delta = game.factors - 1.0
    with np.errstate(divide="ignore"):
        log_abs = np.log(np.abs(delta)) + log_int
    sgn = np.sign(delta) * sign_int
    log_abs = np.where(sgn == 0, -np.inf, log_abs)
    return LogAttribution(log_abs, sgn, budget=rule.order, exact=rule.order >= exact_budget(game.d))


def log_efficiency_gap(game, attr: LogAttribution) -> float:
    """Efficiency gap ``|sum(phi) + 1 - prod(u)| / max(1, |prod(u)|)``, in log space.

    When ``|prod(u)| >= 1`` this is the relative gap, evaluated as
    ``|expm1(log|sum phi + 1| - log|prod u|)|`` for matching signs. Below 1
    the gap is absolute, since ``sum(phi) + 1`` then cancels to a value that
    double precision cannot resolve relative to its terms.
    """
    game = _as_game(game)
    u = game.factors
    lhs, lhs_sign = signed_logsumexp(np.concatenate([attr.log_abs, [0.0]]), np.concatenate([attr.sign, [1.0]]))
    lhs, lhs_sign = float(lhs), float(lhs_sign)
    nz = u != 0.0
    if nz.all():
        rhs = float(tree_sum(np.sort(np.log(np.abs(u)))))
        rhs_sign = -1.0 if int((u < 0).sum()) % 2 else 1.0
    else:
        rhs, rhs_sign = -math.inf, 0.0
    scale = max(0.0, rhs)
    if scale > 0.0 and lhs_sign == rhs_sign:
        return abs(math.expm1(lhs - rhs))
    with np.errstate(over="ignore"):
        return abs(lhs_sign * math.exp(min(lhs - scale, 700.0)) - rhs_sign * math.exp(rhs - scale))


def enumerate_values(value_fn, d: int) -> np.ndarray:
    """Coalition values ``v[S]`` for every bitmask ``S`` (bit j <-> player j)."""
    if d > BRUTEFORCE_MAX_D:
        raise DimensionError(f"enumeration is limited to d <= {BRUTEFORCE_MAX_D}, got {d}")
    return np.array([value_fn([j for j in range(d) if mask >> j & 1]) for mask in range(1 << d)])


def shapley_from_values(table: np.ndarray) -> np.ndarray:
    """Shapley vector of an arbitrary game given its full table of coalition values."""
    table = np.asarray(table, dtype=np.float64)
    d = int(table.size).bit_length() - 1
    if d < 1 or table.size != 1 << d:
        raise DimensionError("value table length must be 2**d with d >= 1")
    masks = np.arange(1 << d)
    size = np.zeros(1 << d, dtype=np.int64)
    for j in range(d):
        size += (masks >> j) & 1
    mu = np.array([shapley_weight(s, d) for s in range(d)])
    phi = np.empty(d)
    for i in range(d):
        without = masks[((masks >> i) & 1) == 0]
        phi[i] = math.fsum(mu[size[without]] * (table[without | (1 << i)] - table[without]))
    return phi
