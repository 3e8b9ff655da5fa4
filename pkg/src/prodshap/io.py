"""File formats: model JSON, instance CSV/JSON, and lossless numeric output."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .game import InputError
from .kernel import KernelSpec, ProductKernelModel
from .tree import TreeModel


class ParseError(InputError):
    """Unreadable input file; the message names the file, row and column."""


def fmt(x: float) -> str:
    """17 significant digits: round-trips every double."""
    return format(float(x), ".17g")


def to_json(obj: Any, indent: int | None = None) -> str:
    """JSON text with floats at 17 significant digits and non-finite floats as null."""

    def enc(o, level):
        pad = "" if indent is None else "\n" + " " * (indent * (level + 1))
        end = "" if indent is None else "\n" + " " * (indent * level)
        sep = ", " if indent is None else ","
        if isinstance(o, (bool, np.bool_)):
            return "true" if o else "false"
        if o is None:
            return "null"
        if isinstance(o, (int, np.integer)):
            return str(int(o))
        if isinstance(o, (float, np.floating)):
            return fmt(o) if math.isfinite(o) else "null"
        if isinstance(o, str):
            return json.dumps(o)
        if isinstance(o, np.ndarray):
            o = o.tolist()
        if isinstance(o, dict):
            if not o:
                return "{}"
            items = [pad + json.dumps(str(k)) + ": " + enc(v, level + 1) for k, v in o.items()]
            return "{" + sep.join(items) + end + "}"
        if isinstance(o, (list, tuple)):
            if not o:
                return "[]"
            # numeric vectors stay on one line
            if indent is not None and all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in o):
                return "[" + ", ".join(enc(v, level + 1) for v in o) + "]"
            return "[" + sep.join(pad + enc(v, level + 1) for v in o) + end + "]"
        if hasattr(o, "to_dict"):
            return enc(o.to_dict(), level)
        raise TypeError(f"cannot serialize {type(o).__name__}")

    return enc(obj, 0)


def write_csv(rows: Sequence[Sequence], header: Sequence[str] | None = None) -> str:
    lines = []
    if header:
        lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(fmt(v) if isinstance(v, (float, np.floating)) else str(v) for v in row))
    return "\n".join(lines) + "\n"


def _read_text(path) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"{path}: {exc.strerror}") from None


def read_matrix(path) -> np.ndarray:
    """Rows of reals from headerless CSV, or a JSON array (flat or nested)."""
    text = _read_text(path)
    if not text.strip():
        raise ParseError(f"{path}: file is empty")
    if text.lstrip().startswith("["):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
        try:
            arr = np.array(data, dtype=np.float64)
        except (TypeError, ValueError):
            raise ParseError(f"{path}: JSON must be an array of numbers or of equal-length arrays") from None
        if arr.ndim == 1:
            arr = arr[None, :]
        if arr.ndim != 2 or arr.size == 0:
            raise ParseError(f"{path}: expected a nonempty 1-D or 2-D array")
        return arr
    rows = []
    for r, row in enumerate(csv.reader(text.splitlines()), start=1):
        if not row or all(not c.strip() for c in row):
            continue
        vals = []
        for c, cell in enumerate(row, start=1):
            try:
                vals.append(float(cell))
            except ValueError:
                raise ParseError(f"{path}: row {r} column {c}: cannot parse {cell!r} as a number") from None
        if rows and len(vals) != len(rows[0]):
            raise ParseError(f"{path}: row {r} has {len(vals)} columns, expected {len(rows[0])}")
        rows.append(vals)
    if not rows:
        raise ParseError(f"{path}: no data rows")
    return np.array(rows)


def read_factors(path) -> np.ndarray:
    """Game factors: a JSON array of reals or a single-column CSV."""
    m = read_matrix(path)
    if m.shape[0] == 1:
        return m[0]
    if m.shape[1] == 1:
        return m[:, 0]
    raise ParseError(f"{path}: expected a single row or a single column of factors")


def _load_json(path) -> dict:
    try:
        obj = json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(obj, dict):
        raise ParseError(f"{path}: top level must be an object")
    return obj


def kernel_spec_from_dict(k: dict) -> KernelSpec:
    family = k.get("family", "rbf")
    if family == "rbf" and "gamma" in k and "lengthscales" not in k:
        return KernelSpec.rbf_from_gamma(k["gamma"])
    ls = k.get("lengthscales")
    return KernelSpec(family, lengthscales=ls, degree=int(k.get("degree", 2)), offset=float(k.get("offset", 1.0)))


def load_kernel_model(path) -> ProductKernelModel:
    """Model JSON: ``{"alpha", "intercept", "kernel": {...}, "train": "rows.csv" | [[...]]}``.

    A relative ``train`` path is resolved against the model file's directory.
    """
    obj = _load_json(path)
    for key in ("alpha", "kernel", "train"):
        if key not in obj:
            raise ParseError(f"{path}: missing required key {key!r}")
    train = obj["train"]
    if isinstance(train, str):
        tp = Path(train)
        if not tp.is_absolute():
            tp = Path(path).parent / tp
        train = read_matrix(tp)
    spec = kernel_spec_from_dict(obj["kernel"])
    return ProductKernelModel(obj["alpha"], train, spec, float(obj.get("intercept", 0.0)))


def dump_kernel_model(model: ProductKernelModel, path, train_path=None) -> None:
    """Write the model JSON; with ``train_path`` the training rows go to a separate CSV."""
    k: dict = {"family": model.kernel.family}
    if model.kernel.lengthscales is not None:
        k["lengthscales"] = model.kernel.lengthscales
    else:
        k.update(degree=model.kernel.degree, offset=model.kernel.offset)
    obj = {"alpha": model.alpha, "intercept": model.intercept, "kernel": k}
    if train_path is not None:
        Path(train_path).write_text(write_csv(model.train.tolist()))
        obj["train"] = str(Path(train_path).name if Path(train_path).parent == Path(path).parent else train_path)
    else:
        obj["train"] = model.train
    Path(path).write_text(to_json(obj, indent=1) + "\n")


def load_trees(path) -> list[TreeModel]:
    """Ensemble JSON: ``{"feature_count": d, "trees": [{"root": 0, "nodes": [...]}]}``."""
    obj = _load_json(path)
    if "feature_count" not in obj or "trees" not in obj:
        raise ParseError(f"{path}: need 'feature_count' and 'trees'")
    d = int(obj["feature_count"])
    trees = []
    for t, tree in enumerate(obj["trees"]):
        try:
            trees.append(TreeModel.from_nodes(tree["nodes"], d, int(tree.get("root", 0))))
        except InputError as exc:
            raise ParseError(f"{path}: tree {t}: {exc}") from None
        except (KeyError, TypeError) as exc:
            raise ParseError(f"{path}: tree {t}: malformed ({exc})") from None
    if not trees:
        raise ParseError(f"{path}: no trees")
    return trees


def trees_to_dict(trees: Sequence[TreeModel]) -> dict:
    return {"feature_count": trees[0].feature_count,
            "trees": [{"root": t.root, "nodes": t.to_nodes()} for t in trees]}


def dump_trees(trees: Sequence[TreeModel], path) -> None:
    Path(path).write_text(to_json(trees_to_dict(trees)) + "\n")


def load_model(path):
    """Tree ensemble or kernel model, by the keys present."""
    obj = _load_json(path)
    if "trees" in obj:
        return load_trees(path)
    if "alpha" in obj:
        return load_kernel_model(path)
    raise ParseError(f"{path}: neither a tree-ensemble nor a kernel model")


def tree_from_sklearn(tree_, feature_count: int | None = None) -> TreeModel:
    """Convert a fitted scikit-learn ``tree_`` object (regression, single output).

    ``left_fraction`` is the weighted sample share of the left child, which is
    the cover ratio the path-dependent value function expects.
    """
    left, right = tree_.children_left, tree_.children_right
    cover = tree_.weighted_n_node_samples
    value = np.asarray(tree_.value).reshape(tree_.node_count, -1)[:, 0]
    nodes = []
    for k in range(tree_.node_count):
        if left[k] < 0:
            nodes.append({"value": float(value[k])})
        else:
            nodes.append({"feature": int(tree_.feature[k]), "threshold": float(tree_.threshold[k]),
                          "left": int(left[k]), "right": int(right[k]),
                          "left_fraction": float(cover[left[k]] / cover[k])})
    return TreeModel.from_nodes(nodes, feature_count or int(tree_.n_features))
