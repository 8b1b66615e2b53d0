import numpy as np
import pytest

from relshift import coarsest_aggregating_set, mspe
from relshift.errors import ArgumentError
from relshift.simulate import (
    SCENARIOS,
    logcontrast_beta,
    make_scenario,
    make_study1,
    make_study2,
    make_supp_logcontrast,
    make_supp_smalltree,
    ridge_cv_mspe,
    study1_beta,
    study2_tree,
)
from relshift.theorycheck import lemma1_witness


def test_study1_truth_pattern():
    beta = study1_beta()
    assert beta.shape == (100,)
    assert np.all(beta[:20] == -1.0)
    assert np.all(beta[20:30] == 2.0)
    assert np.all(beta[30:] == 0.0)


def test_study1_split_and_zero_fraction():
    ds = make_study1(seed=0)
    assert ds.n == 500 and ds.n_train == 100
    xtr, ytr = ds.train()
    xte, yte = ds.test()
    assert xtr.n == 100 and xte.n == 400
    assert abs(ds.extras["zero_fraction"] - 0.40) < 0.05
    assert np.all(ds.x_true.values > 0)
    assert np.any(ds.x_observed.values == 0)


def test_study1_oracle_mspe_near_noise_floor():
    ds = make_study1(seed=1)
    _, yte = ds.test()
    oracle = ds.x_true.values[ds.n_train:] @ ds.beta_star
    assert mspe(yte, oracle) == pytest.approx(ds.sigma**2, rel=0.2)


def test_study1_response_uses_untruncated_compositions():
    ds = make_study1(seed=2)
    signal_true = ds.x_true.values @ ds.beta_star
    signal_obs = ds.x_observed.values @ ds.beta_star
    resid_true = np.var(ds.y - signal_true)
    resid_obs = np.var(ds.y - signal_obs)
    assert resid_true < resid_obs  # y was built from the pre-truncation matrix


def test_scenarios_are_bit_reproducible():
    for name in SCENARIOS:
        a = make_scenario(name, seed=7)
        b = make_scenario(name, seed=7)
        assert np.array_equal(a.y, b.y)
        assert np.array_equal(a.x_observed.values, b.x_observed.values)
        c = make_scenario(name, seed=8)
        assert not np.array_equal(a.y, c.y)


def test_unknown_scenario_rejected():
    with pytest.raises(ArgumentError):
        make_scenario("nope", seed=0)


# ---------------------------------------------------------------- study 2

def test_study2_tree_structure():
    tree = study2_tree()
    assert tree.n_leaves == 100
    assert tree.n_nodes == 117
    assert tree.is_full()
    # ten consecutive leaves per deepest parent
    for i in range(10):
        parent = 101 + i
        assert np.array_equal(tree.leaves_of(parent), np.arange(10 * i + 1, 10 * i + 11))
    # level of a node: edges to the root plus one; leaves sit on level 5
    assert tree.depth[1] + 1 == 5
    assert tree.depth[111] + 1 == 3
    assert tree.depth[103] + 1 == 4


def test_study2_truth_blocks_and_aggregation():
    ds = make_study2(seed=5)
    beta = ds.beta_star
    assert np.all(beta[:20] == 1.0)
    assert np.all(beta[20:30] == -2.0)
    assert np.all(beta[30:40] == 0.5)
    assert np.all(beta[40:80] == 2.0)
    assert len(np.unique(beta[80:])) == 20  # distinct, not aggregable
    agg = coarsest_aggregating_set(ds.tree, beta, tol=0.0)
    # the first twenty aggregate to a level-3 node, the next ten to level-4
    assert 111 in agg.nodes and ds.tree.depth[111] + 1 == 3
    assert 103 in agg.nodes and ds.tree.depth[103] + 1 == 4
    expected = tuple(sorted(list(range(81, 101)) + [103, 104, 111, 113]))
    assert agg.nodes == expected


def test_study2_xi_varies_with_seed():
    a = make_study2(seed=1)
    b = make_study2(seed=2)
    assert not np.array_equal(a.beta_star[80:], b.beta_star[80:])
    assert np.array_equal(a.beta_star[:80], b.beta_star[:80])


# ---------------------------------------------------------------- supplementary

def test_logcontrast_truth_sums_to_zero():
    beta = logcontrast_beta()
    assert beta.sum() == pytest.approx(0.0, abs=1e-12)
    assert np.count_nonzero(beta) == 6


def test_logcontrast_generative_model():
    ds = make_supp_logcontrast(seed=3)
    assert ds.extras["generative_model"] == "log_contrast"
    assert ds.extras["truncation_cut"] == 0.0
    assert np.all(ds.x_observed.values > 0)
    # response really follows the log-linear signal
    signal = np.log(ds.x_true.values) @ ds.beta_star
    assert np.var(ds.y - signal) == pytest.approx(ds.sigma**2, rel=0.25)


def test_logcontrast_snr_scaling():
    lo = make_supp_logcontrast(seed=4, snr=0.1)
    hi = make_supp_logcontrast(seed=4, snr=5.0)
    assert (lo.sigma**2) / (hi.sigma**2) == pytest.approx(50.0, rel=1e-10)


def test_smalltree_scenario():
    ds = make_supp_smalltree(seed=6)
    assert ds.tree.n_leaves == 6 and ds.tree.n_nodes == 11
    assert np.array_equal(ds.beta_star, [0.5, 0.5, 0.5, 0.5, 2.0, 2.0])
    agg = coarsest_aggregating_set(ds.tree, ds.beta_star, tol=0.0)
    assert agg.nodes == (9, 10)
    # the minimal-support representation lives on nodes 9 and 10 only
    gamma, support = lemma1_witness(ds.tree, ds.beta_star)
    assert support == (9, 10)
    assert set(np.flatnonzero(gamma) + 1) == {9, 10}
    assert ds.extras["zero_fraction"] > 0.05


def test_ridge_baseline_runs_and_beats_noise():
    ds = make_study1(seed=9)
    val = ridge_cv_mspe(ds)
    _, yte = ds.test()
    assert val < np.var(yte)  # better than predicting the mean
