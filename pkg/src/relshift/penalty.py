"""Aggregation penalties and their smoothed dual-norm machinery.

Four penalties are supported, identified by short tokens:

* ``es``  -- pairwise fusion of leaf coefficients, ``sum_{j<k} w_jk |b_j - b_k|``
* ``l1``  -- absolute values of all non-root node coefficients
* ``cl2`` -- per internal node, Euclidean norm of its children's coefficients
* ``dl2`` -- per internal node, Euclidean norm of its descendants' coefficients
              (groups overlap)

Each penalty can be written as ``max_{a in Q} a^T D v`` for a sparse matrix
``D`` and a product ``Q`` of unit balls (intervals for the first two kinds,
Euclidean balls per group otherwise).  Replacing the max with its proximal
smoothing ``max_a a^T D v - (mu/2)||a||^2`` yields a differentiable surrogate
whose gradient is ``D^T a*`` with a closed-form maximizer, which is what the
solver consumes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ArgumentError
from .rng import CounterRng

KINDS = ("es", "l1", "cl2", "dl2")
TREE_KINDS = ("l1", "cl2", "dl2")


@dataclass(frozen=True)
class PenaltySpec:
    """One penalty with its weights (all weights default to 1)."""

    kind: str
    tree: object = None
    pair_weights: object = None  # es only: p x p symmetric nonnegative
    node_weights: object = None  # tree kinds: array indexed by node id
    p: int = 0

    @classmethod
    def equi_sparsity(cls, p, weights=None):
        if p < 1:
            raise ArgumentError("need at least one component")
        if weights is not None:
            weights = np.asarray(weights, dtype=float)
            if weights.shape != (p, p):
                raise ArgumentError(f"pair weights must be {p}x{p}")
            if np.any(weights < 0) or not np.allclose(weights, weights.T):
                raise ArgumentError("pair weights must be symmetric and nonnegative")
        return cls(kind="es", pair_weights=weights, p=p)

    @classmethod
    def node_l1(cls, tree, node_weights=None):
        return cls._tree_spec("l1", tree, node_weights)

    @classmethod
    def child_l2(cls, tree, node_weights=None):
        return cls._tree_spec("cl2", tree, node_weights)

    @classmethod
    def desc_l2(cls, tree, node_weights=None):
        return cls._tree_spec("dl2", tree, node_weights)

    @classmethod
    def for_kind(cls, kind, tree=None, p=None, node_weights=None, pair_weights=None):
        if kind == "es":
            if p is None:
                raise ArgumentError("equi-sparsity penalty needs the number of components")
            return cls.equi_sparsity(p, pair_weights)
        if kind in TREE_KINDS:
            return cls._tree_spec(kind, tree, node_weights)
        raise ArgumentError(f"unknown penalty kind {kind!r}; expected one of {KINDS}")

    @classmethod
    def _tree_spec(cls, kind, tree, node_weights):
        if tree is None:
            raise ArgumentError(f"penalty {kind!r} requires a tree")
        if node_weights is not None:
            node_weights = np.asarray(node_weights, dtype=float)
            if node_weights.shape != (tree.n_nodes + 1,):
                raise ArgumentError(
                    f"node weights must have length n_nodes+1={tree.n_nodes + 1} (index 0 unused)"
                )
            if np.any(node_weights[1:] < 0):
                raise ArgumentError("node weights must be nonnegative")
        return cls(kind=kind, tree=tree, node_weights=node_weights, p=tree.n_leaves)

    @property
    def pen_dim(self):
        """Length of the penalized coefficient block."""
        return self.p if self.kind == "es" else self.tree.n_nodes - 1

    def weight_of(self, u):
        if self.node_weights is None:
            return 1.0
        return float(self.node_weights[u])


def evaluate(spec, coef):
    """Exact penalty value, computed directly from the defining formula.

    Deliberately independent of the compiled dual form so the two can be
    cross-checked.
    """
    coef = np.asarray(coef, dtype=float)
    if coef.shape != (spec.pen_dim,):
        raise ArgumentError(f"coefficient length {coef.shape} != {spec.pen_dim}")
    if spec.kind == "es":
        diffs = np.abs(coef[:, None] - coef[None, :])
        if spec.pair_weights is not None:
            diffs = diffs * spec.pair_weights
        return float(np.triu(diffs, 1).sum())
    tree = spec.tree
    if spec.kind == "l1":
        w = np.ones(spec.pen_dim)
        if spec.node_weights is not None:
            w = spec.node_weights[1 : tree.n_nodes]
        return float(np.sum(w * np.abs(coef)))
    total = 0.0
    for u in tree.internal_nodes():
        members = tree.children[u] if spec.kind == "cl2" else tree.descendants(u)
        idx = np.asarray(members, dtype=int) - 1
        total += spec.weight_of(u) * float(np.linalg.norm(coef[idx]))
    return total


@dataclass
class DualForm:
    """Sparse dual representation ``max_{a in Q} a^T D v`` of one penalty.

    ``group_ptr`` partitions the rows of ``D`` into the unit balls making up
    ``Q`` (all groups are Euclidean balls; a 1-row group is the interval
    [-1, 1]).  Rows of a group are contiguous.
    """

    kind: str
    D: object
    group_ptr: np.ndarray
    n_covariates: int
    smooth_radius: float
    DT: object = field(init=False)
    _snorm: float = field(default=None, init=False, repr=False)

    def __post_init__(self):
        self.D = sp.csr_matrix(self.D)
        self.DT = sp.csr_matrix(self.D.T)
        self.group_ptr = np.asarray(self.group_ptr, dtype=np.int32)
        # flat arrays handed to the solver kernels
        self.d_data = np.ascontiguousarray(self.D.data, dtype=np.float64)
        self.d_indices = np.ascontiguousarray(self.D.indices, dtype=np.int32)
        self.d_indptr = np.ascontiguousarray(self.D.indptr, dtype=np.int32)
        self.dt_data = np.ascontiguousarray(self.DT.data, dtype=np.float64)
        self.dt_indices = np.ascontiguousarray(self.DT.indices, dtype=np.int32)
        self.dt_indptr = np.ascontiguousarray(self.DT.indptr, dtype=np.int32)

    @property
    def m(self):
        return self.D.shape[0]

    @property
    def d(self):
        return self.D.shape[1]

    @property
    def n_groups(self):
        return len(self.group_ptr) - 1


def compile_dual(spec, n_covariates=0):
    """Build the sparse ``D`` and group structure for a penalty.

    The first ``n_covariates`` coefficient coordinates are unpenalized and
    receive zero columns.
    """
    if n_covariates < 0:
        raise ArgumentError("n_covariates must be nonnegative")
    q = n_covariates
    d = q + spec.pen_dim

    if spec.kind == "es":
        p = spec.p
        jj, kk = np.triu_indices(p, 1)
        w = np.ones(len(jj)) if spec.pair_weights is None else spec.pair_weights[jj, kk]
        m = len(jj)
        rows = np.repeat(np.arange(m), 2)
        cols = np.column_stack([q + jj, q + kk]).ravel()
        vals = np.column_stack([w, -w]).ravel()
        gptr = np.arange(m + 1, dtype=np.int32)
        radius = m / 2.0
    elif spec.kind == "l1":
        tree = spec.tree
        m = tree.n_nodes - 1
        w = np.ones(m) if spec.node_weights is None else spec.node_weights[1 : tree.n_nodes]
        rows = np.arange(m)
        cols = q + np.arange(m)
        vals = w.astype(float)
        gptr = np.arange(m + 1, dtype=np.int32)
        radius = m / 2.0
    else:
        tree = spec.tree
        rows, cols, vals, gptr = [], [], [], [0]
        r = 0
        for u in tree.internal_nodes():
            members = tree.children[u] if spec.kind == "cl2" else tree.descendants(u)
            wu = spec.weight_of(u)
            for v in members:
                rows.append(r)
                cols.append(q + v - 1)
                vals.append(wu)
                r += 1
            gptr.append(r)
        m = r
        gptr = np.asarray(gptr, dtype=np.int32)
        radius = tree.n_internal / 2.0

    D = sp.csr_matrix((vals, (rows, cols)), shape=(m, d))
    return DualForm(spec.kind, D, gptr, q, radius)


def _group_norms(dual, z):
    sq = np.add.reduceat(z * z, dual.group_ptr[:-1]) if dual.m else np.zeros(0)
    return np.sqrt(sq), sq


def smoothed_value_and_dual(dual, coef, mu):
    """Smoothed penalty value and its maximizing dual vector at ``coef``."""
    if mu <= 0:
        raise ArgumentError("mu must be positive")
    z = dual.D @ np.asarray(coef, dtype=float)
    norms, sq = _group_norms(dual, z)
    interior = norms <= mu
    with np.errstate(divide="ignore"):
        scale = np.where(interior, 1.0 / mu, 1.0 / np.where(norms > 0, norms, 1.0))
    sizes = np.diff(dual.group_ptr)
    alpha = z * np.repeat(scale, sizes)
    f = float(np.sum(np.where(interior, sq / (2.0 * mu), norms - mu / 2.0)))
    return f, alpha


def smoothed_gradient(dual, coef, mu):
    """Gradient of the smoothed penalty: ``D^T a*``."""
    _, alpha = smoothed_value_and_dual(dual, coef, mu)
    return dual.DT @ alpha


def dual_norm_value(dual, coef):
    """Unsmoothed penalty through the dual form (closed-form group maxima)."""
    z = dual.D @ np.asarray(coef, dtype=float)
    norms, _ = _group_norms(dual, z)
    return float(norms.sum())


def dual_spectral_norm(dual, tol=1e-8, max_iter=10000):
    """Spectral norm of ``D`` by power iteration on ``D^T D``.

    The start vector is a fixed pseudo-random unit vector (an all-ones start
    would sit in the null space of the fusion penalty's ``D^T D``).  If the
    iteration fails to converge, falls back to the certified bound
    ``sqrt(||D||_1 ||D||_inf)``.  The cached result is inflated by 1e-9 so
    that step sizes derived from it stay conservative.
    """
    if dual._snorm is not None:
        return dual._snorm
    if dual.m == 0 or dual.D.nnz == 0:
        dual._snorm = 0.0
        return 0.0
    v = CounterRng(0x5EED).standard_normal(dual.d)
    v /= np.linalg.norm(v)
    est_prev = 0.0
    converged = False
    for _ in range(max_iter):
        u = dual.DT @ (dual.D @ v)
        nu = np.linalg.norm(u)
        if nu == 0.0:
            break
        v = u / nu
        est = float(v @ (dual.DT @ (dual.D @ v)))
        if abs(est - est_prev) <= tol * max(est, 1e-300):
            converged = True
            est_prev = est
            break
        est_prev = est
    if converged:
        out = np.sqrt(est_prev) * (1.0 + 1e-9)
    else:
        absd = abs(dual.D)
        out = float(np.sqrt(absd.sum(axis=0).max() * absd.sum(axis=1).max()))
    dual._snorm = out
    return out
