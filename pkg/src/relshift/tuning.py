"""Penalty-strength grids and cross-validation."""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .composition import CompositionMatrix
from .errors import ArgumentError
from .model import FitResult, check_tree_labels, mspe
from .penalty import TREE_KINDS, compile_dual
from .rng import CounterRng
from .solver import SolverConfig, assemble, solve_fista
from .taxonomy import indicator_matrix


@dataclass(frozen=True)
class CvPlan:
    k: int
    lambda_grid: np.ndarray
    fold_assignment: np.ndarray
    seed: int


@dataclass
class CvResult:
    plan: CvPlan
    lambda_best: float
    cv_mean: np.ndarray
    cv_se: np.ndarray
    fold_mspe: np.ndarray  # (k, n_lambda)
    refit: FitResult

    def to_dict(self):
        return {
            "lambda_grid": self.plan.lambda_grid.tolist(),
            "cv_mean": self.cv_mean.tolist(),
            "cv_se": self.cv_se.tolist(),
            "lambda_best": self.lambda_best,
            "seed": self.plan.seed,
            "k": self.plan.k,
        }


def make_folds(n, k, seed=0):
    """Deterministic fold ids (a function of n, k, seed only)."""
    if not 2 <= k <= n:
        raise ArgumentError(f"k must be in [2, n], got k={k}, n={n}")
    perm = CounterRng(seed).spawn("folds").permutation(n)
    fold = np.empty(n, dtype=np.int64)
    fold[perm] = np.arange(n) % k
    return fold


def _values(x):
    return x.values if isinstance(x, CompositionMatrix) else np.asarray(x, dtype=float)


def _prep_design(x, spec):
    values = _values(x)
    if spec.kind in TREE_KINDS:
        if isinstance(x, CompositionMatrix):
            check_tree_labels(spec.tree, x.col_labels)
        return values @ indicator_matrix(spec.tree)
    return values


def lambda_max(x, y, spec, covariates=None):
    """Smallest penalty strength forcing full aggregation, or a safe upper bound.

    Exact for the separable-group kinds (``l1``, ``cl2``) via the stationarity
    condition at the fully aggregated point.  For ``dl2`` the bound uses the
    root's all-coordinate group, and for ``es`` a feasible dual certificate on
    the complete fusion graph; both over-estimate, never under-estimate.
    """
    values = _values(x)
    y = np.asarray(y, dtype=float)
    n = len(y)
    if np.var(y) == 0:
        raise ArgumentError("response has no variation; the grid would be degenerate")

    # Residual of the fully aggregated model: response mean (plus covariates).
    if spec.kind in TREE_KINDS:
        offset = y - float(np.mean(y))
        base = np.asarray(covariates, dtype=float) if covariates is not None else None
    else:
        offset = y
        base = np.ones((n, 1))
        if covariates is not None:
            base = np.hstack([np.asarray(covariates, dtype=float), base])
    if base is not None:
        coef, *_ = np.linalg.lstsq(base, offset, rcond=None)
        resid = offset - base @ coef
    else:
        resid = offset

    if spec.kind == "es":
        v = values.T @ resid / n
        if spec.pair_weights is not None:
            wmin = float(spec.pair_weights[np.triu_indices(spec.p, 1)].min())
            if wmin <= 0:
                raise ArgumentError("lambda_max is undefined with zero pair weights")
        else:
            wmin = 1.0
        return float((v.max() - v.min()) / (spec.p * wmin))

    tree = spec.tree
    g = (values @ indicator_matrix(tree)).T @ resid / n
    if spec.kind == "l1":
        w = np.ones(len(g)) if spec.node_weights is None else spec.node_weights[1 : tree.n_nodes]
        if np.any(w == 0):
            raise ArgumentError("lambda_max is undefined with zero node weights")
        return float(np.max(np.abs(g) / w))
    if spec.kind == "cl2":
        best = 0.0
        for u in tree.internal_nodes():
            wu = spec.weight_of(u)
            if wu == 0:
                raise ArgumentError("lambda_max is undefined with zero node weights")
            idx = np.asarray(tree.children[u], dtype=int) - 1
            best = max(best, float(np.linalg.norm(g[idx]) / wu))
        return best
    w_root = spec.weight_of(tree.root)
    if w_root == 0:
        raise ArgumentError("lambda_max is undefined with a zero root weight")
    return float(np.linalg.norm(g) / w_root)


def lambda_grid(x, y, spec, covariates=None, n_lambda=50, ratio=1e-3):
    """Log-spaced descending grid from lambda_max down to lambda_max*ratio."""
    if n_lambda < 2:
        raise ArgumentError("n_lambda must be at least 2")
    if not 0.0 < ratio < 1.0:
        raise ArgumentError("ratio must be strictly between 0 and 1")
    top = lambda_max(x, y, spec, covariates=covariates)
    if top <= 0:
        raise ArgumentError("lambda_max is zero; nothing to penalize")
    return np.geomspace(top, top * ratio, n_lambda)


def make_cv_plan(n, k, grid, seed=0):
    grid = np.asarray(grid, dtype=float)
    if np.any(np.diff(grid) >= 0) or np.any(grid <= 0):
        raise ArgumentError("lambda grid must be positive and strictly descending")
    return CvPlan(k=int(k), lambda_grid=grid, fold_assignment=make_folds(n, k, seed),
                  seed=int(seed))


def _fold_errors(values_pen, y, spec, dual, C, plan, fold, config, standardize):
    """Validation MSPE along the warm-started lambda path for one fold."""
    train = plan.fold_assignment != fold
    val = ~train
    if np.var(y[train]) == 0:
        warnings.warn(f"fold {fold}: training response has zero variance; fold retained")
    C_train = C_val = None
    if C is not None:
        C_train, C_val = C[train], C[val]
        if standardize:
            scale = C_train.std(axis=0)
            if np.any(scale == 0):
                raise ArgumentError("cannot standardize a constant covariate column")
            C_train = C_train / scale
            C_val = C_val / scale
    if spec.kind in TREE_KINDS:
        g_root = float(np.mean(y[train]))
        ytr = y[train] - g_root
    else:
        g_root = 0.0
        ytr = y[train]
    prob = assemble(values_pen[train], ytr, spec, plan.lambda_grid[0],
                    covariates=C_train, mu_policy=config.mu_policy, dual=dual)
    errors = np.empty(len(plan.lambda_grid))
    x_init = None
    q = 0 if C is None else C.shape[1]
    for i, lam in enumerate(plan.lambda_grid):
        rep = solve_fista(prob.with_lambda(lam), init=x_init, config=config)
        if config.warm_start:
            x_init = rep.coef
        yhat = values_pen[val] @ rep.coef[q:] + g_root
        if q:
            yhat = yhat + C_val @ rep.coef[:q]
        errors[i] = mspe(y[val], yhat)
    return errors


def cross_validate(x, y, spec, covariates=None, k=5, n_lambda=50, ratio=1e-3,
                   seed=0, grid=None, config=None, standardize_covariates=False,
                   one_se=False, threads=1):
    """K-fold cross-validation over a descending lambda path with warm starts.

    Ties in mean validation MSPE break toward the larger lambda (more
    aggregation).  ``one_se`` selects the largest lambda whose mean error is
    within one standard error of the minimum instead of the plain argmin.
    ``k = n`` gives leave-one-out.  Standardization scales, when enabled,
    are computed on training folds only.  Fold results are reduced in fixed
    index order, so the outcome does not depend on ``threads``.
    """
    values_pen = _prep_design(x, spec)
    y = np.asarray(y, dtype=float)
    config = config or SolverConfig()
    C = np.asarray(covariates, dtype=float) if covariates is not None else None
    if grid is None:
        grid = lambda_grid(x, y, spec, covariates=covariates, n_lambda=n_lambda, ratio=ratio)
    plan = make_cv_plan(len(y), k, grid, seed)
    dual = compile_dual(spec, n_covariates=0 if C is None else C.shape[1])

    args = [
        (values_pen, y, spec, dual, C, plan, fold, config, standardize_covariates)
        for fold in range(plan.k)
    ]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda a: _fold_errors(*a), args))
    else:
        rows = [_fold_errors(*a) for a in args]
    fold_mspe = np.vstack(rows)
    cv_mean = fold_mspe.mean(axis=0)
    cv_se = fold_mspe.std(axis=0, ddof=1) / np.sqrt(plan.k)
    best_idx = int(np.argmin(cv_mean))  # grid descends: first min = largest lambda
    if one_se:
        cutoff = cv_mean[best_idx] + cv_se[best_idx]
        best_idx = int(np.argmax(cv_mean <= cutoff))
    lambda_best = float(plan.lambda_grid[best_idx])

    refit = refit_path(x, y, spec, covariates, plan.lambda_grid[: best_idx + 1], config,
                       standardize_covariates)
    return CvResult(plan, lambda_best, cv_mean, cv_se, fold_mspe, refit)


def refit_path(x, y, spec, covariates, lambdas, config, standardize_covariates=False):
    """Full-data fit, warm-started down the grid to the last lambda given."""
    from .model import fit as model_fit

    init = None
    result = None
    for lam in lambdas:
        result = model_fit(x, y, spec, lam, covariates=covariates, config=config, init=init,
                           standardize_covariates=standardize_covariates)
        if config.warm_start:
            pen_part = result.gamma if result.gamma is not None else result.beta
            beta_c = result.beta_c
            if result.covariate_scale is not None:
                beta_c = beta_c * result.covariate_scale
            init = np.concatenate([beta_c, pen_part])
    return result
