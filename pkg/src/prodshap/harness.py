"""Convergence sweeps, efficiency verification and per-instance benchmarks."""

from __future__ import annotations

import gc
import math
import statistics
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import __version__
from .game import Attribution, InputError, ProductGame, exact_budget, shapley_quadrature
from .kernel import ProductKernelModel, explain_kernel
from .quadrature import gauss_legendre_rule
from .tree import TreeModel, efficiency_violation, explain_ensemble

DEFAULT_TOLERANCE = 1e-9
DEFAULT_TIMEOUT_S = 300.0


def budget_grid(reference: int, count: int = 10, ceiling: int = 500) -> list[int]:
    """Up to ``count`` geometrically spaced distinct budgets in ``[1, min(ceiling, reference)]``."""
    top = max(1, min(ceiling, reference))
    raw = np.geomspace(1, top, count)
    return sorted({int(round(b)) for b in raw})


@dataclass
class ConvergenceReport:
    d: int
    budgets: list[int]
    mean_error: list[float]
    std_error: list[float]
    reference_budget: int
    reference_exact: bool
    instances: int
    errors: list[list[float]] = field(default_factory=list)  # [budget][instance]
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def rows(self) -> list[tuple]:
        return [(b, m, s) for b, m, s in zip(self.budgets, self.mean_error, self.std_error)]


def _explainer(target) -> tuple[Callable[[np.ndarray | None, int], np.ndarray], int]:
    if isinstance(target, ProductGame):
        return (lambda x, b: shapley_quadrature(target, gauss_legendre_rule(b)).phi), target.d
    if isinstance(target, ProductKernelModel):
        return (lambda x, b: explain_kernel(target, x, b).phi), target.d
    raise InputError(f"cannot sweep budgets for {type(target).__name__}")


def run_convergence(target, budgets: Sequence[int] | None = None, reference_budget: int | None = None,
                    instances=None) -> ConvergenceReport:
    """l2 error of the attribution at each budget against one reference attribution.

    ``target`` is a :class:`ProductGame` (``instances`` ignored) or a
    :class:`ProductKernelModel` explained at each row of ``instances``.
    """
    explain, d = _explainer(target)
    ref_b = exact_budget(d) if reference_budget is None else int(reference_budget)
    budgets = budget_grid(ref_b) if budgets is None else [int(b) for b in budgets]
    if not budgets:
        raise InputError("budgets must be nonempty")
    if any(b2 <= b1 for b1, b2 in zip(budgets, budgets[1:])):
        raise InputError("budgets must be strictly increasing")
    if isinstance(target, ProductGame) or instances is None:
        rows = [None]
    else:
        rows = list(np.atleast_2d(np.asarray(instances, dtype=np.float64)))
    refs = [explain(x, ref_b) for x in rows]
    errs = [[float(np.linalg.norm(explain(x, b) - r)) for x, r in zip(rows, refs)] for b in budgets]
    warn = []
    ref_exact = ref_b >= exact_budget(d)
    if not ref_exact:
        warn.append(f"reference budget {ref_b} is below the exactness threshold {exact_budget(d)}")
    return ConvergenceReport(
        d=d, budgets=list(budgets),
        mean_error=[float(np.mean(e)) for e in errs],
        std_error=[float(np.std(e, ddof=1)) if len(e) > 1 else 0.0 for e in errs],
        reference_budget=ref_b, reference_exact=ref_exact, instances=len(rows), errors=errs, warnings=warn,
    )


@dataclass
class VerifyReport:
    violations: list[float]
    max_violation: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_violation <= self.tolerance

    def to_dict(self) -> dict:
        return {"max_violation": self.max_violation, "tolerance": self.tolerance,
                "passed": self.passed, "violations": self.violations}


def run_verify(trees: Sequence[TreeModel], X, phi=None, tolerance: float = DEFAULT_TOLERANCE,
               budget: int | None = None) -> VerifyReport:
    """Per-row efficiency violation of ``phi`` (computed here when not given)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[0] == 0:
        raise InputError("no instances to verify")
    if phi is None:
        phi = explain_ensemble(trees, X, budget=budget).phi
    phi = np.atleast_2d(np.asarray(phi, dtype=np.float64))
    if phi.shape != X.shape:
        raise InputError(f"phi has shape {phi.shape}, data has shape {X.shape}")
    v = [efficiency_violation(trees, x, p) for x, p in zip(X, phi)]
    return VerifyReport(v, max(v), tolerance)


@dataclass
class BenchRow:
    model: str
    instances: int
    mean_ms: float | None
    std_ms: float | None
    max_violation: float | None
    repeats: int
    deterministic: bool
    timed_out: bool = False

    def as_tuple(self) -> tuple:
        t = "t/o"
        return (self.model, self.instances, t if self.timed_out else self.mean_ms,
                t if self.timed_out else self.std_ms, self.max_violation, self.repeats, self.deterministic)


@dataclass
class BenchReport:
    rows: list[BenchRow]
    config: dict = field(default_factory=dict)
    version: str = __version__

    def to_dict(self) -> dict:
        return {"version": self.version, "config": self.config, "rows": [asdict(r) for r in self.rows]}


def _violation(model, X, phi) -> float:
    if isinstance(model, ProductKernelModel):
        base = explain_base(model)
        return max(abs(base + math.fsum(p) - model.predict(x)) for x, p in zip(X, phi))
    return max(efficiency_violation(model, x, p) for x, p in zip(X, phi))


def explain_base(model: ProductKernelModel) -> float:
    return model.intercept + float(np.sum(model.alpha))


def explain_rows(model, X, budget: int | None = None, cap: int | None = None) -> np.ndarray:
    """Attributions for every row of ``X`` under a tree ensemble or kernel model."""
    if isinstance(model, ProductKernelModel):
        b = budget if budget is not None else min(exact_budget(model.d), cap or exact_budget(model.d))
        return np.stack([explain_kernel(model, x, b).phi for x in X])
    return explain_ensemble(model, X, budget=budget, cap=cap).phi


def run_bench(model, X, repeats: int = 3, name: str = "model", budget: int | None = None,
              cap: int | None = None, timeout_s: float = DEFAULT_TIMEOUT_S) -> BenchReport:
    """Wall-clock milliseconds per instance, mean and sample std over ``repeats``.

    One untimed warm-up pass precedes the timed repeats. The efficiency
    violation is computed from the attribution of the last timed repeat;
    ``deterministic`` records whether every repeat returned identical bits.
    """
    if repeats < 1:
        raise InputError("repeats must be >= 1")
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    n = X.shape[0]
    first = explain_rows(model, X, budget, cap)
    times, same, phi = [], True, first
    timed_out = False
    for _ in range(repeats):
        t0 = time.perf_counter()
        phi = explain_rows(model, X, budget, cap)
        dt = (time.perf_counter() - t0) * 1e3 / n
        times.append(dt)
        same = same and np.array_equal(phi, first)
        if dt > timeout_s * 1e3:
            timed_out = True
            break
    row = BenchRow(
        model=name, instances=n,
        mean_ms=statistics.fmean(times),
        std_ms=statistics.stdev(times) if len(times) > 1 else 0.0,
        max_violation=_violation(model, X, phi), repeats=len(times),
        deterministic=same, timed_out=timed_out,
    )
    cfg = {"repeats": repeats, "budget": budget, "cap": cap, "timeout_s": timeout_s}
    return BenchReport([row], cfg)


def median_time(fn: Callable[[], object], trials: int = 5) -> float:
    """Median wall time of ``fn()`` in seconds.

    The garbage collector is paused while timing, as :mod:`timeit` does.
    """
    out = []
    enabled = gc.isenabled()
    gc.collect()
    gc.disable()
    try:
        for _ in range(trials):
            t0 = time.perf_counter()
            fn()
            out.append(time.perf_counter() - t0)
    finally:
        if enabled:
            gc.enable()
    return statistics.median(out)


def doubling_ratios(times: Sequence[float]) -> list[float]:
    return [b / a for a, b in zip(times, times[1:])]


def attribution_record(attr: Attribution) -> dict:
    out = attr.to_dict()
    out["version"] = __version__
    return out
