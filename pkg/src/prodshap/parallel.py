"""Deterministic fixed-shape reductions.

Every reduction here combines its inputs along a binary tree whose shape is a
function of the input length only. Worker threads evaluate independent chunks
of that tree, so the result is bitwise identical for any worker count.
"""

from __future__ import annotations

import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")

CHUNK = 4096
THREADS_ENV = "PRODSHAP_THREADS"

_lock = threading.Lock()
_threads: int | None = None


def max_threads() -> int:
    return os.cpu_count() or 1


def set_threads(n: int | None) -> None:
    """Set the process-wide worker count; ``None`` restores the default."""
    global _threads
    if n is not None and n < 1:
        raise ValueError(f"thread count must be >= 1, got {n}")
    with _lock:
        _threads = n


def get_threads() -> int:
    """Worker count: explicit setting, then ``$PRODSHAP_THREADS``, then 1."""
    if _threads is not None:
        return _threads
    env = os.environ.get(THREADS_ENV)
    if env:
        if env.strip().lower() == "max":
            return max_threads()
        return max(1, int(env))
    return 1


def map_ordered(fn: Callable[[T], object], items: Sequence[T], threads: int | None = None) -> list:
    """Apply ``fn`` to every item, returning results in input order."""
    n = get_threads() if threads is None else threads
    if n <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


@dataclass(frozen=True)
class ReductionPlan:
    """Fixed pairing of ``length`` leaves.

    Leaves are grouped into consecutive chunks of ``chunk`` elements, each
    accumulated left to right. Chunk totals are then paired as a balanced
    binary tree: the left half of the chunk list is combined with the right
    half, recursively.
    """

    length: int
    chunk: int = CHUNK
    bounds: tuple[tuple[int, int], ...] = field(init=False, repr=False)

    def __post_init__(self):
        if self.length < 1:
            raise ValueError("reduction length must be positive")
        if self.chunk < 1:
            raise ValueError("chunk size must be positive")
        b = tuple(
            (lo, min(lo + self.chunk, self.length)) for lo in range(0, self.length, self.chunk)
        )
        object.__setattr__(self, "bounds", b)

    @property
    def n_chunks(self) -> int:
        return len(self.bounds)


def _combine_tree(parts: list, op):
    if len(parts) == 1:
        return parts[0]
    mid = (len(parts) + 1) // 2
    return op(_combine_tree(parts[:mid], op), _combine_tree(parts[mid:], op))


def reduce(values: Sequence[T], op: Callable[[T, T], T], plan: ReductionPlan | None = None,
           threads: int | None = None) -> T:
    """Combine ``values`` under the associative ``op`` following ``plan``.

    Performs exactly ``len(values) - 1`` applications of ``op``.
    """
    if plan is None:
        plan = ReductionPlan(len(values))
    if len(values) != plan.length:
        raise ValueError(f"plan covers {plan.length} values, got {len(values)}")

    def run_chunk(bound):
        lo, hi = bound
        acc = values[lo]
        for k in range(lo + 1, hi):
            acc = op(acc, values[k])
        return acc

    parts = map_ordered(run_chunk, plan.bounds, threads)
    return _combine_tree(parts, op)


def tree_sum(a: np.ndarray, axis: int = -1, chunk: int = CHUNK,
             threads: int | None = None) -> np.ndarray:
    """Sum ``a`` along ``axis`` with the same fixed shape as :func:`reduce`.

    Within a chunk the sum is strictly sequential (``cumsum`` semantics);
    chunk totals are paired as a balanced tree.
    """
    a = np.asarray(a, dtype=np.float64)
    a = np.moveaxis(a, axis, -1)
    n = a.shape[-1]
    if n == 0:
        return np.zeros(a.shape[:-1])
    plan = ReductionPlan(n, chunk)

    def run_chunk(bound):
        lo, hi = bound
        return np.cumsum(a[..., lo:hi], axis=-1)[..., -1]

    parts = map_ordered(run_chunk, plan.bounds, threads)
    return _combine_tree(parts, np.add)


def sign_product(signs: Sequence[int]) -> int:
    """Product of values in {-1, 0, +1}; zero is absorbing."""
    return reduce(list(signs), lambda x, y: x * y)
