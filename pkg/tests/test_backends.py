"""Equivalence of the compiled and pure-python solver kernels."""

import numpy as np
import pytest

from relshift import CounterRng, MuPolicy, PenaltySpec, indicator_matrix
from relshift.solver import (
    assemble,
    available_backends,
    solve_fista,
    subgradient_reference,
)

from conftest import random_composition

needs_compiled = pytest.mark.skipif(
    "compiled" not in available_backends(), reason="compiled kernels not built"
)


def _problem(kind, fig_tree, seed, lam=0.05):
    g = CounterRng(seed)
    X = random_composition(60, 7, seed)
    y = X @ g.standard_normal(7) + 0.1 * g.standard_normal(60)
    spec = PenaltySpec.for_kind(kind, tree=fig_tree, p=7)
    xpen = X if kind == "es" else X @ indicator_matrix(fig_tree)
    return assemble(xpen, y, spec, lam, mu_policy=MuPolicy.accuracy(1e-4))


@needs_compiled
@pytest.mark.parametrize("kind", ["es", "l1", "cl2", "dl2"])
def test_fista_backends_agree(kind, fig_tree):
    prob = _problem(kind, fig_tree, seed=31)
    rc = solve_fista(prob, max_iter=30000, tol=1e-11, backend="compiled")
    rp = solve_fista(prob, max_iter=30000, tol=1e-11, backend="python")
    # identical algorithm, different float summation orders
    assert rc.n_iter == rp.n_iter
    assert rc.converged == rp.converged
    assert np.max(np.abs(rc.coef - rp.coef)) < 1e-9
    assert np.max(np.abs(rc.objective_trace - rp.objective_trace)) < 1e-12


@needs_compiled
@pytest.mark.parametrize("kind", ["es", "dl2"])
def test_subgrad_backends_agree(kind, fig_tree):
    prob = _problem(kind, fig_tree, seed=37)
    xc, hc = subgradient_reference(prob, iterations=20000, step_c=0.1, backend="compiled")
    xp, hp = subgradient_reference(prob, iterations=20000, step_c=0.1, backend="python")
    assert hc == pytest.approx(hp, rel=1e-10, abs=1e-13)
    assert np.max(np.abs(xc - xp)) < 1e-9


@needs_compiled
def test_lambda_zero_paths_match(fig_tree):
    prob = _problem("es", fig_tree, seed=41, lam=0.0)
    rc = solve_fista(prob, max_iter=50000, tol=1e-12, backend="compiled")
    rp = solve_fista(prob, max_iter=50000, tol=1e-12, backend="python")
    assert np.max(np.abs(rc.coef - rp.coef)) < 1e-9
