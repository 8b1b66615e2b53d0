"""File formats: labeled CSV matrices, Newick trees, JSON reports.

CSV layout: first row headers, first column sample IDs, numeric cells.
Sample alignment across files is by ID join (rows are re-ordered to sorted
IDs), never by row position.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pandas as pd

from .composition import validate_closure
from .errors import SchemaError
from .taxonomy import parse_newick


def read_matrix_csv(path):
    """Read a labeled matrix; returns (values, row_labels, col_labels)."""
    df = pd.read_csv(path, index_col=0, float_precision="round_trip")
    if df.isna().any().any():
        bad = df.index[df.isna().any(axis=1)][0]
        raise SchemaError(f"{path}: missing value in row {bad!r}")
    try:
        values = df.to_numpy(dtype=float)
    except ValueError as exc:
        raise SchemaError(f"{path}: non-numeric cell ({exc})") from None
    ids = [str(i) for i in df.index]
    if len(set(ids)) != len(ids):
        raise SchemaError(f"{path}: duplicate sample IDs")
    return values, ids, [str(c) for c in df.columns]


def write_matrix_csv(path, values, row_labels, col_labels, index_name="sample_id"):
    df = pd.DataFrame(np.asarray(values), index=list(row_labels), columns=list(col_labels))
    df.index.name = index_name
    df.to_csv(path, float_format="%.17g")


def read_response_csv(path):
    """Read a one-column response; returns (y, row_labels)."""
    values, ids, cols = read_matrix_csv(path)
    if values.shape[1] != 1:
        raise SchemaError(f"{path}: expected a single response column, found {cols}")
    return values[:, 0], ids


def write_response_csv(path, y, row_labels, name="y"):
    write_matrix_csv(path, np.asarray(y)[:, None], row_labels, [name])


def read_newick_file(path):
    return parse_newick(Path(path).read_text(encoding="utf-8"))


def write_newick_file(path, tree):
    Path(path).write_text(tree.to_newick() + "\n", encoding="utf-8")


def align_samples(x_ids, *label_sets, sources=()):
    """Common sorted sample order across files; error on any mismatch.

    Returns, for each input ID list (x first), the integer positions that
    reorder it to the canonical sorted ID sequence.
    """
    ref = set(x_ids)
    names = list(sources) or [f"input {i}" for i in range(1 + len(label_sets))]
    for name, ids in zip(names[1:], label_sets):
        other = set(ids)
        if other != ref:
            missing = sorted(ref - other)[:5]
            extra = sorted(other - ref)[:5]
            parts = []
            if missing:
                parts.append(f"missing IDs {missing}")
            if extra:
                parts.append(f"unexpected IDs {extra}")
            raise SchemaError(f"{name}: sample IDs do not match: " + "; ".join(parts))
    order = sorted(ref)
    out = []
    for ids in (x_ids, *label_sets):
        pos = {s: i for i, s in enumerate(ids)}
        out.append(np.asarray([pos[s] for s in order], dtype=int))
    return order, out


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")


def fit_summary_text(fit_result):
    """Human-readable block listing of a fit's aggregation."""
    lines = [
        f"penalty: {fit_result.penalty}",
        f"lambda: {fit_result.lam:.6g}",
    ]
    if fit_result.gamma_root is not None:
        lines.append(f"root coefficient: {fit_result.gamma_root:.6g}")
    if len(fit_result.beta_c):
        lines.append("covariate coefficients: "
                     + ", ".join(f"{b:.6g}" for b in fit_result.beta_c))
    if fit_result.aggregation is not None and fit_result.tree is not None:
        tree = fit_result.tree
        lines.append(f"aggregated blocks ({len(fit_result.aggregation)}):")
        for u in fit_result.aggregation.nodes:
            leaves = fit_result.aggregation.blocks[u]
            value = fit_result.beta[leaves[0] - 1]
            taxa = ", ".join(tree.labels[j] for j in leaves)
            lines.append(f"  {tree.node_label(u)} (coef {value:.6g}): {taxa}")
    else:
        lines.append("coefficients:")
        labels = fit_result.col_labels or [f"x{j + 1}" for j in range(len(fit_result.beta))]
        for lab, b in zip(labels, fit_result.beta):
            lines.append(f"  {lab}: {b:.6g}")
    solver = fit_result.solver
    lines.append(
        f"solver: {solver.n_iter} iterations, converged={solver.converged}, "
        f"objective={solver.final_objective:.6g}"
    )
    return "\n".join(lines) + "\n"


def write_dataset(outdir, dataset):
    """Write one simulated replicate: matrices, response, truth, tree."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    ids = dataset.x_true.row_labels
    write_matrix_csv(outdir / "x_true.csv", dataset.x_true.values, ids,
                     dataset.x_true.col_labels)
    write_matrix_csv(outdir / "x_observed.csv", dataset.x_observed.values, ids,
                     dataset.x_observed.col_labels)
    write_response_csv(outdir / "y.csv", dataset.y, ids)
    write_json(outdir / "truth.json", dataset.truth_dict())
    if dataset.tree is not None:
        write_newick_file(outdir / "tree.nwk", dataset.tree)


def bound_report_csv(path, report):
    df = pd.DataFrame({
        "lhs": report.lhs,
        "rhs": report.rhs,
        "ratio": report.ratio,
        "satisfied": report.satisfied.astype(int),
    })
    df.index.name = "replicate"
    df.to_csv(path)


def load_composition_csv(path):
    values, ids, cols = read_matrix_csv(path)
    matrix, renormalized = validate_closure(values, row_labels=ids, col_labels=cols)
    return matrix, renormalized
