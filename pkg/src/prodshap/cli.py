"""Command-line interface.

Exit codes: 0 success, 1 usage or parse error, 2 verification failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .game import (
    BRUTEFORCE_MAX_D,
    DEFAULT_CAP,
    DimensionError,
    InputError,
    ProductGame,
    default_budget,
    enumerate_values,
    exact_budget,
    log_efficiency_gap,
    shapley_bruteforce,
    shapley_from_values,
    shapley_quadrature,
    shapley_quadrature_log,
)
from .harness import DEFAULT_TIMEOUT_S, DEFAULT_TOLERANCE, run_bench, run_convergence, run_verify
from .io import (
    ParseError,
    dump_kernel_model,
    dump_trees,
    load_kernel_model,
    load_model,
    load_trees,
    read_factors,
    read_matrix,
    to_json,
    write_csv,
)
from .kernel import ProductKernelModel, explain_kernel, kernel_value
from .parallel import THREADS_ENV, max_threads, set_threads
from .quadrature import BudgetError, gauss_legendre_rule
from .synthetic import kernel_ridge_model, random_ensemble, random_game, random_kernel_model
from .tree import explain_ensemble, explain_tree_direct, tree_budget, tree_value

EXIT_OK, EXIT_USAGE, EXIT_FAIL = 0, 1, 2


class UsageError(Exception):
    pass


def _emit(args, obj, rows=None, header=None):
    if getattr(args, "csv", False) and rows is not None:
        sys.stdout.write(write_csv(rows, header))
    else:
        sys.stdout.write(to_json(obj, indent=1) + "\n")


def _config(args) -> dict:
    skip = {"func"}
    return {k: v for k, v in vars(args).items() if k not in skip}


def _squeeze(a: np.ndarray):
    return a[0] if a.ndim == 2 and a.shape[0] == 1 else a


# --- subcommands ------------------------------------------------------------

def cmd_rule(args):
    rule = gauss_legendre_rule(args.order)
    _emit(args, rule.to_dict(), rows=zip(rule.nodes.tolist(), rule.weights.tolist()), header=["node", "weight"])


def cmd_explain_game(args):
    game = ProductGame(read_factors(args.factors))
    budget = args.budget if args.budget is not None else default_budget(game.d, args.cap)
    rule = gauss_legendre_rule(budget)
    out: dict
    if args.log:
        la = shapley_quadrature_log(game, rule)
        out = {"log_abs_phi": la.log_abs, "sign_phi": la.sign, "budget": budget, "exact": la.exact,
               "efficiency_gap": log_efficiency_gap(game, la)}
    else:
        attr = shapley_quadrature(game, rule)
        out = attr.to_dict()
        if args.oracle:
            out["oracle_max_abs_diff"] = _oracle_gap(attr.phi, lambda: shapley_bruteforce(game).phi, game.d)
    _emit(args, out, rows=[(i, p) for i, p in enumerate(np.atleast_1d(out.get("phi", [])))], header=["feature", "phi"])


def _oracle_gap(phi, oracle, d):
    if d > BRUTEFORCE_MAX_D:
        return None
    return float(np.max(np.abs(np.asarray(phi) - oracle())))


def cmd_explain_kernel(args):
    model = load_kernel_model(args.model)
    X = read_matrix(args.x)
    budget = args.budget if args.budget is not None else default_budget(model.d, args.cap)
    attrs = [explain_kernel(model, x, budget) for x in X]
    phi = np.stack([a.phi for a in attrs])
    out = {"phi": _squeeze(phi), "base_value": attrs[0].base_value, "budget": budget, "exact": attrs[0].exact}
    if args.oracle:
        gaps = [_oracle_gap(a.phi, lambda x=x: shapley_from_values(
            enumerate_values(lambda s, x=x: kernel_value(model, x, s), model.d)), model.d) for a, x in zip(attrs, X)]
        out["oracle_max_abs_diff"] = None if None in gaps else max(gaps)
    _emit(args, out, rows=phi.tolist())


def cmd_explain_tree(args):
    trees = load_trees(args.model)
    X = read_matrix(args.x)
    if args.exact and args.budget is not None:
        raise UsageError("--exact and --budget are mutually exclusive")
    if args.direct:
        phi = np.zeros_like(X)
        for t in trees:
            rule = gauss_legendre_rule(args.budget or tree_budget(t))
            phi += np.stack([explain_tree_direct(t, x, rule).phi for x in X])
        budgets = [args.budget or tree_budget(t) for t in trees]
        base = sum(t.expected_value() for t in trees)
    else:
        attr = explain_ensemble(trees, X, budget=args.budget, cap=None if args.exact else args.cap)
        phi, budgets, base = attr.phi, attr.meta["budgets"], attr.base_value
    exact = all(b >= exact_budget(t.path_dimension.eta) for b, t in zip(budgets, trees))
    out = {"phi": _squeeze(phi), "base_value": base, "budget": max(budgets), "exact": exact}
    if args.oracle:
        d = trees[0].feature_count
        gaps = []
        for x, p in zip(X, phi):
            gaps.append(_oracle_gap(p, lambda x=x: shapley_from_values(enumerate_values(
                lambda s, x=x: sum(tree_value(t, x, s) for t in trees), d)), d))
        out["oracle_max_abs_diff"] = None if None in gaps else max(gaps)
    _emit(args, out, rows=phi.tolist())


def cmd_oracle(args):
    if args.factors:
        game = ProductGame(read_factors(args.factors))
        out = shapley_bruteforce(game).to_dict()
        _emit(args, out, rows=[(p,) for p in out["phi"]])
        return
    if not (args.model and args.x):
        raise UsageError("oracle needs --factors, or --model and --x")
    model = load_model(args.model)
    X = read_matrix(args.x)
    if isinstance(model, ProductKernelModel):
        d = model.d
        value = lambda x: (lambda s: kernel_value(model, x, s))  # noqa: E731
    else:
        d = model[0].feature_count
        value = lambda x: (lambda s: sum(tree_value(t, x, s) for t in model))  # noqa: E731
    if d > BRUTEFORCE_MAX_D:
        raise DimensionError(f"brute force is limited to d <= {BRUTEFORCE_MAX_D}")
    phi = np.stack([shapley_from_values(enumerate_values(value(x), d)) for x in X])
    _emit(args, {"phi": _squeeze(phi), "budget": 0, "exact": True}, rows=phi.tolist())


def cmd_verify(args):
    trees = load_trees(args.model)
    X = read_matrix(args.data)
    phi = read_matrix(args.phi) if args.phi else None
    rep = run_verify(trees, X, phi, tolerance=args.tolerance, budget=args.budget)
    out = {"version": __version__, "config": _config(args), **rep.to_dict()}
    _emit(args, out, rows=[(i, v) for i, v in enumerate(rep.violations)], header=["row", "violation"])
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_convergence(args):
    budgets = [int(b) for b in args.budgets.split(",")] if args.budgets else None
    if args.factors:
        target, X = ProductGame(read_factors(args.factors)), None
    elif args.model:
        target = load_kernel_model(args.model)
        if not args.x:
            raise UsageError("--model needs --x")
        X = read_matrix(args.x)
    else:
        rng = np.random.default_rng(args.seed)
        target = kernel_ridge_model(rng, args.n, args.d, lengthscale=args.lengthscale)
        X = rng.standard_normal((args.instances, args.d))
    rep = run_convergence(target, budgets, args.reference, X)
    out = {"version": __version__, "config": _config(args), **rep.to_dict()}
    _emit(args, out, rows=rep.rows(), header=["budget", "mean_l2_error", "std_l2_error"])


def cmd_bench(args):
    model = load_model(args.model)
    X = read_matrix(args.data)
    rep = run_bench(model, X, repeats=args.repeats, name=Path(args.model).stem, budget=args.budget,
                    cap=args.cap, timeout_s=args.timeout_s)
    rep.config = _config(args)
    _emit(args, rep.to_dict(), rows=[r.as_tuple() for r in rep.rows],
          header=["model", "instances", "mean_ms", "std_ms", "max_violation", "repeats", "deterministic"])


def cmd_gen(args):
    rng = np.random.default_rng(args.seed)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if args.kind == "tree":
        trees = random_ensemble(rng, args.d, args.leaves, args.trees, args.depth)
        dump_trees(trees, out_dir / "model.json")
        written.append("model.json")
    elif args.kind in ("kernel", "krr"):
        model = (kernel_ridge_model(rng, args.n, args.d, lengthscale=args.lengthscale) if args.kind == "krr"
                 else random_kernel_model(rng, args.n, args.d))
        dump_kernel_model(model, out_dir / "model.json", out_dir / "train.csv")
        written += ["model.json", "train.csv"]
    else:
        game = random_game(rng, args.d)
        (out_dir / "factors.json").write_text(to_json(game.factors) + "\n")
        written.append("factors.json")
    if args.kind != "game":
        X = rng.standard_normal((args.instances, args.d))
        (out_dir / "data.csv").write_text(write_csv(X.tolist()))
        written.append("data.csv")
    _emit(args, {"version": __version__, "config": _config(args), "seed": args.seed,
                 "files": [str(out_dir / f) for f in written]})


# --- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=str, default=None,
                        help=f"worker threads (integer or 'max'); overrides ${THREADS_ENV}")
    fmt = common.add_mutually_exclusive_group()
    fmt.add_argument("--json", action="store_true", help="JSON output (default)")
    fmt.add_argument("--csv", action="store_true", help="CSV output")

    p = argparse.ArgumentParser(prog="prodshap", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("rule", parents=[common], help="Gauss-Legendre nodes and weights on [0, 1]")
    s.add_argument("--order", type=int, required=True)
    s.set_defaults(func=cmd_rule)

    s = sub.add_parser("explain-game", parents=[common], help="Shapley values of a product game")
    s.add_argument("--factors", required=True, help="JSON array or single-column CSV")
    s.add_argument("--budget", type=int)
    s.add_argument("--cap", type=int, default=DEFAULT_CAP)
    s.add_argument("--oracle", action="store_true", help="cross-check against brute force (d <= 25)")
    s.add_argument("--log", action="store_true", help="report log|phi| and sign(phi)")
    s.set_defaults(func=cmd_explain_game)

    s = sub.add_parser("explain-kernel", parents=[common], help="attribute a product-kernel prediction")
    s.add_argument("--model", required=True)
    s.add_argument("--x", required=True)
    s.add_argument("--budget", type=int)
    s.add_argument("--cap", type=int, default=DEFAULT_CAP)
    s.add_argument("--oracle", action="store_true")
    s.set_defaults(func=cmd_explain_kernel)

    s = sub.add_parser("explain-tree", parents=[common], help="attribute a tree-ensemble prediction")
    s.add_argument("--model", required=True)
    s.add_argument("--x", required=True)
    s.add_argument("--budget", type=int)
    s.add_argument("--exact", action="store_true", help="per-tree exact budget, no cap")
    s.add_argument("--cap", type=int, default=DEFAULT_CAP)
    s.add_argument("--oracle", action="store_true")
    s.add_argument("--direct", action="store_true", help="use the leaf-by-leaf evaluator")
    s.set_defaults(func=cmd_explain_tree)

    s = sub.add_parser("oracle", parents=[common], help="brute-force Shapley values by enumeration")
    s.add_argument("--factors")
    s.add_argument("--model")
    s.add_argument("--x")
    s.set_defaults(func=cmd_oracle)

    s = sub.add_parser("verify", parents=[common], help="efficiency-axiom violation per row")
    s.add_argument("--model", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--phi", help="attributions to check instead of computing them")
    s.add_argument("--budget", type=int)
    s.add_argument("--tolerance", type=float, default=DEFAULT_TOLERANCE)
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("convergence", parents=[common], help="error versus quadrature budget")
    s.add_argument("--factors")
    s.add_argument("--model")
    s.add_argument("--x")
    s.add_argument("--budgets", help="comma-separated, strictly increasing")
    s.add_argument("--reference", type=int)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--d", type=int, default=50)
    s.add_argument("--n", type=int, default=50)
    s.add_argument("--instances", type=int, default=10)
    s.add_argument("--lengthscale", type=float, default=None)
    s.set_defaults(func=cmd_convergence)

    s = sub.add_parser("bench", parents=[common], help="milliseconds per instance")
    s.add_argument("--model", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--repeats", type=int, default=3)
    s.add_argument("--budget", type=int)
    s.add_argument("--cap", type=int, default=None)
    s.add_argument("--timeout-s", type=float, default=DEFAULT_TIMEOUT_S)
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("gen", parents=[common], help="write a seeded synthetic model and data")
    s.add_argument("kind", choices=["tree", "kernel", "krr", "game"])
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--d", type=int, default=10)
    s.add_argument("--n", type=int, default=50, help="training rows (kernel)")
    s.add_argument("--leaves", type=int, default=1000, help="total leaves (tree)")
    s.add_argument("--trees", type=int, default=10)
    s.add_argument("--depth", type=int, default=20)
    s.add_argument("--instances", type=int, default=10)
    s.add_argument("--lengthscale", type=float, default=None)
    s.set_defaults(func=cmd_gen)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    if args.threads:
        set_threads(max_threads() if args.threads == "max" else int(args.threads))
    try:
        rc = args.func(args)
    except (UsageError, InputError, DimensionError, BudgetError, ParseError, ValueError) as exc:
        print(f"prodshap {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    finally:
        set_threads(None)
    return EXIT_OK if rc is None else rc


if __name__ == "__main__":
    sys.exit(main())
