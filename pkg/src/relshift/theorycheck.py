"""Desk-scale empirical checks of the finite-sample prediction bound.

The bound under study: with ``lam >= 2*sqrt(2)*sigma*sqrt(log(n_internal)/(delta*n))``
and Gaussian noise on a compositional design, the in-sample prediction error
``||X(b_hat - b*)||^2 / n`` is, with probability at least ``1 - delta``,
at most a constant multiple of ``lam * min_{gamma: A gamma = b*} P(gamma)``.
The hidden constant is not specified, so replicated checks track the ratio
of the two sides and assert an empirical ceiling rather than the raw
inequality at constant one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .composition import sample_logistic_normal
from .errors import ArgumentError, AssumptionError
from .model import fit
from .penalty import PenaltySpec, evaluate
from .rng import CounterRng
from .solver import SolverConfig, MuPolicy
from .taxonomy import coarsest_aggregating_set, indicator_matrix, parse_newick


def theorem_lambda(sigma, n_internal, delta, n):
    """The bound's penalty level: ``2*sqrt(2)*sigma*sqrt(log(|internal|)/(delta*n))``."""
    if sigma <= 0 or delta <= 0 or delta >= 1 or n < 1 or n_internal < 2:
        raise ArgumentError("need sigma > 0, 0 < delta < 1, n >= 1, n_internal >= 2")
    return 2.0 * np.sqrt(2.0) * sigma * np.sqrt(np.log(n_internal) / (delta * n))


def lemma1_witness(tree, beta_star):
    """The block-supported representation ``gamma*`` with ``A gamma* = beta*``.

    Puts each block's shared coefficient on its block node (root fixed at
    zero; a root block is carried by the root's children) and zero
    elsewhere.  Requires a full tree: every internal node has at least two
    children.  Returns ``(gamma_star, support_nodes)``.
    """
    if not tree.is_full():
        raise AssumptionError("tree is not full: found an internal node with a single child")
    beta_star = np.asarray(beta_star, dtype=float)
    if not np.all(np.isfinite(beta_star)):
        raise ArgumentError("beta_star must be finite (bounded)")
    agg = coarsest_aggregating_set(tree, beta_star, tol=0.0)
    gamma = np.zeros(tree.n_nodes - 1)
    support = []
    for u in agg.nodes:
        value = beta_star[agg.blocks[u][0] - 1]
        if u == tree.root:
            for v in tree.children[u]:
                gamma[v - 1] = value
                support.append(v)
        else:
            gamma[u - 1] = value
            support.append(u)
    return gamma, tuple(sorted(support))


def witness_penalty_bound(beta_star, support):
    """``max|beta*| * |support|``, the witness-level penalty bound."""
    return float(np.max(np.abs(beta_star)) * len(support))


def random_full_tree(p, rng):
    """A random full tree over leaves t1..tp (labels in index order)."""
    if p < 2:
        raise ArgumentError("need at least 2 leaves")

    def build(lo, hi):
        size = hi - lo
        if size == 1:
            return f"t{lo + 1}"
        width = min(size, 2 + int(rng.uniform() * 3))  # 2..4 children
        cuts = [lo]
        remaining = size - width
        for i in range(width - 1):
            take = 1 + int(rng.uniform() * (remaining + 1))
            take = min(take, remaining + 1)
            remaining -= take - 1
            cuts.append(cuts[-1] + take)
        cuts.append(hi)
        parts = [build(cuts[i], cuts[i + 1]) for i in range(width)]
        return "(" + ",".join(parts) + ")"

    return parse_newick(build(0, p) + ";")


def random_block_beta(tree, rng, magnitude=1.0):
    """A random tree-aligned equi-sparse truth with distinct block values.

    Builds a random aggregating set by pruning the tree at random nodes and
    assigns each block a value in [-magnitude, magnitude].
    """
    blocks = []
    stack = [tree.root]
    while stack:
        u = stack.pop()
        if tree.is_leaf(u) or rng.uniform() < 0.4:
            blocks.append(u)
        else:
            stack.extend(tree.children[u])
    values = magnitude * (2.0 * rng.uniform(len(blocks)) - 1.0)
    beta = np.empty(tree.n_leaves)
    for u, val in zip(blocks, values):
        beta[tree.leaves_of(u) - 1] = val
    return beta


@dataclass
class BoundReport:
    penalty: str
    lambda_used: float
    delta: float
    n: int
    p: int
    internal_count: int
    penalty_at_witness: float
    witness_bound: float
    ratio_ceiling: float
    lhs: np.ndarray
    rhs: np.ndarray
    ratio: np.ndarray
    satisfied: np.ndarray

    @property
    def coverage(self):
        return float(np.mean(self.satisfied))

    def summary_dict(self):
        return {
            "penalty": self.penalty,
            "lambda": self.lambda_used,
            "delta": self.delta,
            "n": self.n,
            "p": self.p,
            "internal_count": self.internal_count,
            "penalty_at_witness": self.penalty_at_witness,
            "witness_bound": self.witness_bound,
            "ratio_ceiling": self.ratio_ceiling,
            "replicates": int(len(self.lhs)),
            "coverage": self.coverage,
            "median_lhs": float(np.median(self.lhs)),
            "median_ratio": float(np.median(self.ratio)),
        }


_THEORY_CONFIG = SolverConfig(max_iter=20000, tol=1e-9,
                              mu_policy=MuPolicy.accuracy(1e-3))


def theorem1_check(tree, beta_star, kind, sigma, delta=0.1, replicates=500,
                   n=100, seed=0, ratio_ceiling=10.0, config=None):
    """Monte-Carlo the prediction bound on one tree/truth configuration.

    Each replicate draws fresh logistic-normal compositions and Gaussian
    noise of known ``sigma``, fits at the bound's lambda with the root
    coefficient fixed to zero (the bound's estimator), and records

        lhs   = ||X(b_hat - b*)||^2 / n
        rhs   = lam * P(gamma*)          (witness upper surrogate)
        ratio = lhs / rhs.

    ``satisfied`` flags ``ratio <= ratio_ceiling``; the ceiling stands in
    for the bound's unspecified constant.
    """
    if sigma is None or sigma <= 0:
        raise ArgumentError("theory mode requires the true noise scale sigma")
    beta_star = np.asarray(beta_star, dtype=float)
    spec = PenaltySpec.for_kind(kind, tree=tree)
    gamma_star, support = lemma1_witness(tree, beta_star)
    pen_star = evaluate(spec, gamma_star)
    lam = theorem_lambda(sigma, tree.n_internal, delta, n)
    config = config or _THEORY_CONFIG
    root_rng = CounterRng(seed).spawn("theorem1")

    lhs = np.empty(replicates)
    for r in range(replicates):
        rng = root_rng.spawn(r)
        x = sample_logistic_normal(n, tree.n_leaves, rng=rng.spawn("x"))
        y = x.values @ beta_star + sigma * rng.spawn("noise").standard_normal(n)
        res = fit(x.values, y, spec, lam, config=config, gamma_root=0.0)
        resid = x.values @ (res.beta - beta_star)
        lhs[r] = float(resid @ resid) / n
    rhs = np.full(replicates, lam * pen_star)
    ratio = lhs / rhs
    return BoundReport(kind, float(lam), delta, n, tree.n_leaves, tree.n_internal,
                       pen_star, witness_penalty_bound(beta_star, support),
                       ratio_ceiling, lhs, rhs, ratio, ratio <= ratio_ceiling)


def corollary1_rate_sweep(p_list, n_list, kind, replicates=50, delta=0.1,
                          sigma=0.5, seed=0, config=None):
    """Median in-sample error over a (p, n) grid, with its scaling slope.

    For each p a random full tree and block-structured truth are fixed, then
    each (p, n) cell is replicated.  The returned slope regresses
    ``log(median lhs)`` on ``log(sqrt(log(p)/n))``: a positive slope means
    the error shrinks with the theoretical rate parameter.
    """
    rows = []
    for p in p_list:
        setup_rng = CounterRng(seed).spawn(f"sweep_p{p}")
        tree = random_full_tree(p, setup_rng.spawn("tree"))
        beta_star = random_block_beta(tree, setup_rng.spawn("beta"))
        for n in n_list:
            rep = theorem1_check(tree, beta_star, kind, sigma, delta=delta,
                                 replicates=replicates, n=n,
                                 seed=setup_rng.spawn(f"n{n}").raw(1)[0],
                                 config=config)
            rows.append({
                "p": p,
                "n": n,
                "rate": float(np.sqrt(np.log(p) / n)),
                "median_lhs": float(np.median(rep.lhs)),
                "median_ratio": float(np.median(rep.ratio)),
                "coverage": rep.coverage,
            })
    x = np.log([r["rate"] for r in rows])
    yv = np.log([r["median_lhs"] for r in rows])
    slope = float(np.polyfit(x, yv, 1)[0])
    return {"rows": rows, "log_log_slope": slope, "penalty": kind}


def min_penalty_over_fiber(tree, kind, beta_star, iterations=200000, seed=0):
    """Approximate ``min P(gamma)`` over ``{gamma : A gamma = beta*}``.

    Subgradient descent in the null space of the indicator matrix, started
    from the least-squares representation.  Exact enough for small trees to
    benchmark the witness value; always an upper bound on the true minimum.
    """
    beta_star = np.asarray(beta_star, dtype=float)
    spec = PenaltySpec.for_kind(kind, tree=tree)
    A = indicator_matrix(tree)
    gamma0, *_ = np.linalg.lstsq(A, beta_star, rcond=None)
    from scipy.linalg import null_space

    N = null_space(A)
    if N.shape[1] == 0:
        return evaluate(spec, gamma0), gamma0
    rng = CounterRng(seed).spawn("fiber")
    z = np.zeros(N.shape[1])
    best_val = evaluate(spec, gamma0)
    best_gamma = gamma0.copy()
    step0 = 0.1 * max(1.0, float(np.max(np.abs(beta_star))))
    for k in range(1, iterations + 1):
        gamma = gamma0 + N @ z
        val = evaluate(spec, gamma)
        if val < best_val:
            best_val = val
            best_gamma = gamma
        g = _penalty_subgradient(spec, gamma)
        z = z - (step0 / np.sqrt(k)) * (N.T @ g)
    return best_val, best_gamma


def _penalty_subgradient(spec, gamma):
    tree = spec.tree
    g = np.zeros_like(gamma)
    if spec.kind == "l1":
        w = np.ones(len(gamma)) if spec.node_weights is None else spec.node_weights[1 : tree.n_nodes]
        return w * np.sign(gamma)
    for u in tree.internal_nodes():
        members = tree.children[u] if spec.kind == "cl2" else tree.descendants(u)
        idx = np.asarray(members, dtype=int) - 1
        nrm = float(np.linalg.norm(gamma[idx]))
        if nrm > 0:
            g[idx] += spec.weight_of(u) * gamma[idx] / nrm
    return g
