import numpy as np
import pytest

from relshift import CounterRng, PenaltySpec, evaluate, indicator_matrix, parse_newick
from relshift.errors import ArgumentError, AssumptionError
from relshift.theorycheck import (
    corollary1_rate_sweep,
    lemma1_witness,
    min_penalty_over_fiber,
    random_block_beta,
    random_full_tree,
    theorem1_check,
    theorem_lambda,
    witness_penalty_bound,
)


def test_theorem_lambda_formula():
    sigma, n_int, delta, n = 0.7, 9, 0.1, 250
    want = 2.0 * np.sqrt(2.0) * sigma * np.sqrt(np.log(n_int) / (delta * n))
    assert theorem_lambda(sigma, n_int, delta, n) == want
    with pytest.raises(ArgumentError):
        theorem_lambda(0.0, 9, 0.1, 100)
    with pytest.raises(ArgumentError):
        theorem_lambda(1.0, 9, 1.5, 100)


def test_witness_reference_support(fig_tree):
    beta = np.array([1.0, 1.0, 2.0, 3.0, 4.0, 4.0, 4.0])
    gamma, support = lemma1_witness(fig_tree, beta)
    assert support == (3, 4, 8, 11)
    assert np.allclose(indicator_matrix(fig_tree) @ gamma, beta)
    assert gamma[7] == 1.0 and gamma[2] == 2.0 and gamma[3] == 3.0 and gamma[10] == 4.0


def test_witness_constant_beta_uses_root_children(fig_tree):
    beta = np.full(7, 2.0)
    gamma, support = lemma1_witness(fig_tree, beta)
    assert np.allclose(indicator_matrix(fig_tree) @ gamma, beta)
    assert set(support) == {10, 11}  # the root's children
    # the witness-level bound still holds with the root handled as its children
    bound = witness_penalty_bound(beta, support)
    assert evaluate(PenaltySpec.node_l1(fig_tree), gamma) <= bound + 1e-12


def test_witness_requires_full_tree():
    tree = parse_newick("((a,b));")
    with pytest.raises(AssumptionError):
        lemma1_witness(tree, np.zeros(2))


@pytest.mark.parametrize("seed", range(8))
def test_witness_random_trees_reconstruct_and_bound(seed):
    rng = CounterRng(seed)
    p = 5 + int(rng.uniform() * 16)  # 5..20
    tree = random_full_tree(p, rng.spawn("tree"))
    beta = random_block_beta(tree, rng.spawn("beta"), magnitude=2.0)
    gamma, support = lemma1_witness(tree, beta)
    assert np.max(np.abs(indicator_matrix(tree) @ gamma - beta)) == 0.0
    bound = witness_penalty_bound(beta, support)
    for ctor in (PenaltySpec.node_l1, PenaltySpec.child_l2):
        assert evaluate(ctor(tree), gamma) <= bound + 1e-12


def test_random_full_trees_are_full():
    for seed in range(10):
        tree = random_full_tree(3 + seed, CounterRng(seed))
        assert tree.is_full()
        assert tree.n_leaves == 3 + seed


def test_witness_close_to_fiber_minimum(small_tree):
    # on the six-leaf tree the constrained descent approaches the witness
    # value from above and never beats it: the witness is the minimum
    beta = np.array([0.5, 0.5, 0.5, 0.5, 2.0, 2.0])
    gamma, _ = lemma1_witness(small_tree, beta)
    for kind in ("l1", "cl2"):
        wit = evaluate(PenaltySpec.for_kind(kind, tree=small_tree), gamma)
        best, _ = min_penalty_over_fiber(small_tree, kind, beta, iterations=50000)
        assert best >= wit * (1.0 - 1e-9)
        assert best <= wit * 1.01


def test_theorem1_check_small_run(small_tree):
    beta = np.array([0.5, 0.5, 0.5, 0.5, 2.0, 2.0])
    report = theorem1_check(small_tree, beta, "cl2", sigma=0.5, delta=0.1,
                            replicates=30, n=100, seed=1)
    assert report.lambda_used == pytest.approx(
        theorem_lambda(0.5, small_tree.n_internal, 0.1, 100))
    assert len(report.lhs) == 30
    assert np.all(report.rhs > 0)
    assert 0.0 <= report.coverage <= 1.0
    assert report.coverage >= 0.8  # loose smoke bound; the acceptance run is larger
    d = report.summary_dict()
    assert d["replicates"] == 30 and d["penalty"] == "cl2"


def test_theorem1_check_requires_sigma(small_tree):
    with pytest.raises(ArgumentError):
        theorem1_check(small_tree, np.ones(6), "l1", sigma=None)


def test_null_truth_concentrates_near_zero(small_tree):
    beta = np.zeros(6)
    # a zero truth has an empty-support witness; the error should be tiny
    report = theorem1_check(small_tree, beta + np.array([1e-3] * 6), "l1",
                            sigma=0.3, delta=0.1, replicates=20, n=200, seed=2)
    assert np.median(report.lhs) < 0.05 * 0.3**2


def test_rate_sweep_monotone_and_positive_slope():
    # sigma small enough that the bound-level lambda is interior (below the
    # full-fusion point) across the whole sweep, so the rate can manifest
    out = corollary1_rate_sweep([8], [100, 400, 1600], "l1", replicates=20,
                                sigma=0.02, seed=3)
    med = [r["median_lhs"] for r in out["rows"]]
    assert med[0] > med[1] > med[2]
    assert out["log_log_slope"] > 0
