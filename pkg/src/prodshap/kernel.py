"""Shapley attribution for product-kernel predictors.

For ``f(x) = b + sum_i alpha_i prod_j k_j(x_j, X_ij)`` the kernel-restricted
value function ``v(S) = sum_i alpha_i prod_{j in S} k_j(x_j, X_ij)`` is a
weighted sum of one product game per training row.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .game import Attribution, DimensionError, InputError, exact_budget, shapley_quadrature_batch
from .parallel import tree_sum
from .quadrature import gauss_legendre_rule

FAMILIES = ("rbf", "laplace", "polynomial-per-dim")


@dataclass(frozen=True, eq=False)
class KernelSpec:
    """Per-feature kernel family.

    ``rbf``: ``exp(-(a - b)**2 / (2 l**2))``; ``laplace``: ``exp(-|a - b| / l)``;
    ``polynomial-per-dim``: ``(a * b + offset) ** degree``.
    """

    family: str = "rbf"
    lengthscales: np.ndarray | None = None
    degree: int = 2
    offset: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InputError(f"unknown kernel family {self.family!r}; expected one of {FAMILIES}")
        if self.family in ("rbf", "laplace"):
            if self.lengthscales is None:
                raise InputError(f"{self.family} kernel needs lengthscales")
            ls = np.array(self.lengthscales, dtype=np.float64).reshape(-1)
            if ls.size == 0 or not np.all(np.isfinite(ls)) or np.any(ls <= 0):
                raise InputError("lengthscales must be finite and strictly positive")
            object.__setattr__(self, "lengthscales", ls)
        elif self.degree < 0:
            raise InputError("polynomial degree must be nonnegative")

    @classmethod
    def rbf_from_gamma(cls, gamma, d: int | None = None) -> "KernelSpec":
        """RBF kernel specification from the ``exp(-gamma * (a - b)**2)`` parameterization."""
        g = np.atleast_1d(np.asarray(gamma, dtype=np.float64))
        if np.any(g <= 0):
            raise InputError("gamma must be strictly positive")
        if d is not None and g.size == 1:
            g = np.full(d, g[0])
        return cls("rbf", lengthscales=1.0 / np.sqrt(2.0 * g))

    def covers(self, d: int) -> bool:
        if self.lengthscales is None:
            return True
        return self.lengthscales.size in (1, d)

    def _ls(self, d: int) -> np.ndarray:
        ls = self.lengthscales
        return np.full(d, ls[0]) if ls.size == 1 else ls

    def factors(self, x: np.ndarray, train: np.ndarray) -> np.ndarray:
        """Matrix ``U[i, j] = k_j(x_j, train[i, j])``."""
        d = train.shape[1]
        if self.family == "polynomial-per-dim":
            return (x[None, :] * train + self.offset) ** self.degree
        diff = x[None, :] - train
        ls = self._ls(d)
        if self.family == "rbf":
            return np.exp(-(diff * diff) / (2.0 * ls * ls))
        return np.exp(-np.abs(diff) / ls)


def kernel_factor(spec: KernelSpec, j: int, a: float, b: float) -> float:
    """Single per-feature factor ``k_j(a, b)``."""
    if spec.family == "polynomial-per-dim":
        return float((a * b + spec.offset) ** spec.degree)
    ls = spec.lengthscales
    ell = ls[0] if ls.size == 1 else ls[j]
    if spec.family == "rbf":
        return float(np.exp(-((a - b) ** 2) / (2.0 * ell * ell)))
    return float(np.exp(-abs(a - b) / ell))


@dataclass(frozen=True, eq=False)
class ProductKernelModel:
    """Fitted predictor ``intercept + sum_i alpha_i k(x, train_i)``."""

    alpha: np.ndarray
    train: np.ndarray
    kernel: KernelSpec
    intercept: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        a = np.array(self.alpha, dtype=np.float64).reshape(-1)
        X = np.array(self.train, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise InputError("training matrix must be a nonempty 2-D array")
        if a.size != X.shape[0]:
            raise DimensionError(f"alpha has {a.size} entries but train has {X.shape[0]} rows")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(X))):
            raise InputError("alpha and train must be finite")
        if not self.kernel.covers(X.shape[1]):
            raise DimensionError("kernel lengthscales do not cover every feature")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "train", X)

    @property
    def n(self) -> int:
        return self.train.shape[0]

    @property
    def d(self) -> int:
        return self.train.shape[1]

    def factors(self, x) -> np.ndarray:
        return self.kernel.factors(self._check_x(x), self.train)

    def predict(self, x) -> float:
        return self.intercept + float(self.alpha @ np.prod(self.factors(x), axis=1))

    def _check_x(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64).reshape(-1)
        if x.size != self.d:
            raise DimensionError(f"instance has {x.size} features, model has {self.d}")
        if not np.all(np.isfinite(x)):
            raise InputError("instance must be finite")
        return x


def kernel_value(model: ProductKernelModel, x, subset: Iterable[int]) -> float:
    """``sum_i alpha_i prod_{j in subset} k_j(x_j, X_ij)``; the empty subset gives ``sum(alpha)``."""
    idx = sorted(set(subset))
    if not idx:
        return float(np.sum(model.alpha))
    u = model.factors(x)[:, idx]
    return float(model.alpha @ np.prod(u, axis=1))


def explain_kernel(model: ProductKernelModel, x, budget: int | None = None) -> Attribution:
    """Shapley vector of ``x`` under the kernel-restricted value function.

    ``phi`` sums to ``v(full) - v(empty)``; the intercept plus ``sum(alpha)``
    is reported as ``base_value``. Cost is ``O(n d budget)``.
    """
    x = model._check_x(x)
    if budget is None:
        budget = exact_budget(model.d)
    rule = gauss_legendre_rule(budget)
    u = model.kernel.factors(x, model.train)
    per_point = shapley_quadrature_batch(u, rule)
    phi = tree_sum(model.alpha[:, None] * per_point, axis=0)
    base = model.intercept + float(np.sum(model.alpha))
    return Attribution(phi, budget=rule.order, exact=rule.order >= exact_budget(model.d),
                       base_value=base, meta={"base_value": base})
