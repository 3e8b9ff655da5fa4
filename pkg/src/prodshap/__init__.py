"""Shapley values for product games by Gauss-Legendre quadrature.

Backends cover product-kernel predictors and decision-tree ensembles; a
brute-force enumerator is included for verification.
"""

__version__ = "0.1.0"

from .game import (
    Attribution,
    DimensionError,
    InputError,
    LogAttribution,
    ProductGame,
    SignedLogProduct,
    default_budget,
    exact_budget,
    log_efficiency_gap,
    shapley_bruteforce,
    shapley_from_values,
    shapley_logspace_node,
    shapley_quadrature,
    shapley_quadrature_log,
    shapley_weight,
    shapley_weighted_sum,
)
from .kernel import KernelSpec, ProductKernelModel, explain_kernel, kernel_factor, kernel_value
from .parallel import ReductionPlan, get_threads, reduce, set_threads
from .quadrature import BudgetError, QuadratureRule, gauss_legendre_rule, monomial_exactness_defect
from .tree import (
    Edge,
    PathState,
    TreeModel,
    edge_factor,
    effective_path_dimension,
    efficiency_violation,
    explain_ensemble,
    explain_tree_direct,
    explain_tree_dfs,
    tree_value,
)
