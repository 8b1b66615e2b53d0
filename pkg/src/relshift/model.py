"""User-facing relative-shift regression: fitting, prediction, interpretation.

The model is an intercept-free linear regression on compositions,

    y_i = c_i . beta_c + x_i . beta + noise,

so only contrasts ``beta_j - beta_k`` are interpretable: shifting mass
``delta`` from component k to component j changes the prediction by
``delta * (beta_j - beta_k)``.  Tree-guided fits reparameterize ``beta`` as
path sums of per-node coefficients ``gamma``; the root coefficient is not
estimated but prefixed (by default to the response mean, since the root's
design column is identically one).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .composition import CompositionMatrix
from .errors import ArgumentError, SchemaError
from .penalty import PenaltySpec, TREE_KINDS
from .solver import SolverConfig, assemble, solve_fista
from .taxonomy import coarsest_aggregating_set, indicator_matrix


@dataclass
class FitResult:
    beta_c: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray | None
    gamma_root: float | None
    lam: float
    penalty: str
    solver: object
    aggregation: object
    truncation_threshold: float
    spec: PenaltySpec
    col_labels: list | None = None
    covariate_labels: list | None = None
    covariate_scale: np.ndarray | None = None

    @property
    def tree(self):
        return self.spec.tree

    def to_dict(self):
        agg = None
        if self.aggregation is not None and self.tree is not None:
            agg = {
                "node_labels": [self.tree.node_label(u) for u in self.aggregation.nodes],
                "blocks": {
                    self.tree.node_label(u): [
                        self.tree.labels[j] for j in self.aggregation.blocks[u]
                    ]
                    for u in self.aggregation.nodes
                },
            }
        return {
            "penalty": self.penalty,
            "lambda": self.lam,
            "gamma_root": self.gamma_root,
            "beta_c": self.beta_c.tolist(),
            "beta": self.beta.tolist(),
            "gamma": self.gamma.tolist() if self.gamma is not None else None,
            "aggregation": agg,
            "solver": {
                "n_iter": self.solver.n_iter,
                "converged": self.solver.converged,
                "final_objective": self.solver.final_objective,
            },
        }


def _values_and_labels(x):
    if isinstance(x, CompositionMatrix):
        return x.values, x.col_labels
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise ArgumentError("composition input must be a 2-D matrix")
    return x, None


def check_tree_labels(tree, col_labels):
    """Leaf labels must equal composition column labels, byte for byte."""
    if col_labels is None:
        return
    leaves = tree.leaf_labels()
    if list(col_labels) != leaves:
        bad = [
            f"column {i + 1}: data={c!r} tree={t!r}"
            for i, (c, t) in enumerate(zip(col_labels, leaves))
            if c != t
        ]
        extra = len(col_labels) - len(leaves)
        if extra:
            bad.append(f"column count {len(col_labels)} vs {len(leaves)} leaves")
        raise SchemaError("tree leaves do not match composition columns: " + "; ".join(bad))


def fit(x, y, spec, lam, covariates=None, config=None, gamma_root="ymean",
        standardize_covariates=False, dual=None, init=None):
    """Fit the penalized relative-shift model at one penalty strength.

    For tree penalties the root node coefficient is prefixed (``"ymean"`` or
    an explicit float) and the solve runs on the offset response; leaf
    coefficients are then recovered as path sums plus the root value.

    ``standardize_covariates`` rescales covariate columns to unit standard
    deviation for the solve (columns are not centered: the model has no
    intercept) and returns ``beta_c`` on the original scale.
    """
    values, col_labels = _values_and_labels(x)
    y = np.asarray(y, dtype=float)
    if lam < 0:
        raise ArgumentError("lambda must be nonnegative")
    if y.shape != (values.shape[0],):
        raise ArgumentError("response length does not match the composition rows")
    if spec.kind in TREE_KINDS:
        check_tree_labels(spec.tree, col_labels)
        if values.shape[1] != spec.tree.n_leaves:
            raise SchemaError(
                f"composition has {values.shape[1]} columns, tree has {spec.tree.n_leaves} leaves"
            )

    C = None
    scale = None
    if covariates is not None:
        C = np.asarray(covariates, dtype=float)
        if C.ndim != 2 or C.shape[0] != y.shape[0]:
            raise ArgumentError("covariate matrix shape does not match the response")
        if standardize_covariates:
            scale = C.std(axis=0)
            if np.any(scale == 0):
                raise ArgumentError("cannot standardize a constant covariate column")
            C = C / scale
    q = 0 if C is None else C.shape[1]

    config = config or SolverConfig()
    if spec.kind == "es":
        prob = assemble(values, y, spec, lam, covariates=C,
                        mu_policy=config.mu_policy, dual=dual)
        report = solve_fista(prob, init=init, config=config)
        beta_c, beta = report.coef[:q].copy(), report.coef[q:].copy()
        gamma = None
        g_root = None
        agg = None
    else:
        tree = spec.tree
        g_root = float(np.mean(y)) if gamma_root == "ymean" else float(gamma_root)
        A = indicator_matrix(tree)
        prob = assemble(values @ A, y - g_root, spec, lam, covariates=C,
                        mu_policy=config.mu_policy, dual=dual)
        report = solve_fista(prob, init=init, config=config)
        beta_c, gamma = report.coef[:q].copy(), report.coef[q:].copy()
        beta = A @ gamma + g_root
        agg = coarsest_aggregating_set(tree, beta, tol=1e-8)
    if scale is not None:
        beta_c = beta_c / scale
    return FitResult(beta_c, beta, gamma, g_root, float(lam), spec.kind, report, agg,
                     truncation_threshold=0.0, spec=spec, col_labels=col_labels,
                     covariate_scale=scale)


def predict(fit_result, x_new, covariates_new=None):
    """Predicted responses ``C beta_c + X beta`` for new samples."""
    values, col_labels = _values_and_labels(x_new)
    if values.shape[1] != len(fit_result.beta):
        raise SchemaError(
            f"new data has {values.shape[1]} columns, fit expects {len(fit_result.beta)}"
        )
    if col_labels is not None and fit_result.col_labels is not None:
        if list(col_labels) != list(fit_result.col_labels):
            bad = [
                f"{c!r} vs {t!r}"
                for c, t in zip(col_labels, fit_result.col_labels)
                if c != t
            ]
            raise SchemaError("column labels differ from the training data: " + "; ".join(bad))
    yhat = values @ fit_result.beta
    if len(fit_result.beta_c):
        if covariates_new is None:
            raise SchemaError("fit used covariates; provide covariates_new")
        C = np.asarray(covariates_new, dtype=float)
        if C.shape != (values.shape[0], len(fit_result.beta_c)):
            raise SchemaError(
                f"covariates shape {C.shape} does not match "
                f"({values.shape[0]}, {len(fit_result.beta_c)})"
            )
        yhat = yhat + C @ fit_result.beta_c
    elif covariates_new is not None:
        raise SchemaError("fit used no covariates but covariates_new was given")
    return yhat


def penalty_groups(spec):
    """The per-node coordinate groups a tree penalty acts on (node -> ids)."""
    tree = spec.tree
    if spec.kind == "l1":
        return {u: [u] for u in range(1, tree.n_nodes)}
    members = (
        (lambda u: list(tree.children[u]))
        if spec.kind == "cl2"
        else (lambda u: tree.descendants(u))
    )
    return {u: members(u) for u in tree.internal_nodes()}


def truncate_and_aggregate(fit_result, threshold=1e-4):
    """Zero small per-node coefficient groups and re-derive the aggregation.

    Group norms are measured on the original ``gamma``; every group below
    ``threshold`` has its coordinates zeroed (for overlapping groups, the
    union is zeroed).  Leaf coefficients and the coarsest aggregating set
    are recomputed from the truncated ``gamma``.  The input fit is left
    untouched.
    """
    if fit_result.gamma is None:
        raise ArgumentError("truncation applies to tree-guided fits only")
    if threshold < 0:
        raise ArgumentError("threshold must be nonnegative")
    tree = fit_result.tree
    gamma = fit_result.gamma.copy()
    for u, members in penalty_groups(fit_result.spec).items():
        idx = np.asarray(members, dtype=int) - 1
        if np.linalg.norm(fit_result.gamma[idx]) < threshold:
            gamma[idx] = 0.0
    A = indicator_matrix(tree)
    beta = A @ gamma + fit_result.gamma_root
    agg = coarsest_aggregating_set(tree, beta, tol=1e-10)
    return replace(fit_result, gamma=gamma, beta=beta, aggregation=agg,
                   truncation_threshold=float(threshold))


def mspe(y_true, y_hat):
    """Mean squared prediction error."""
    y_true = np.asarray(y_true, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    if y_true.shape != y_hat.shape:
        raise ArgumentError(f"length mismatch: {y_true.shape} vs {y_hat.shape}")
    return float(np.mean((y_true - y_hat) ** 2))


def cluster_coefficients(beta, tol):
    """Group coefficients whose sorted gaps are within ``tol`` (single-linkage).

    Interpretation aid for fusion-penalty fits, which have no tree to supply
    a grouping; purely a post-processing heuristic.  Returns a list of index
    arrays, ordered by block value.
    """
    beta = np.asarray(beta, dtype=float)
    order = np.argsort(beta, kind="stable")
    blocks = []
    current = [order[0]]
    for prev, nxt in zip(order[:-1], order[1:]):
        if beta[nxt] - beta[prev] <= tol:
            current.append(nxt)
        else:
            blocks.append(np.sort(np.asarray(current)))
            current = [nxt]
    blocks.append(np.sort(np.asarray(current)))
    return blocks
