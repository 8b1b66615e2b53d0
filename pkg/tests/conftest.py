import numpy as np
import pytest

from relshift import CounterRng, parse_newick


@pytest.fixture(scope="session")
def fig_tree():
    """Seven-leaf reference tree: 12 nodes, internals 8..12, root 12."""
    return parse_newick("(((1,2),3,4),((5,6),7));")


@pytest.fixture(scope="session")
def small_tree():
    """Six-leaf reference tree: leaves 1-4 under node 9, 5-6 under 10, root 11."""
    return parse_newick("(((t1,t2),(t3,t4)),(t5,t6));")


@pytest.fixture()
def rng():
    return CounterRng(20240817)


def random_composition(n, p, seed):
    """Plain random compositions for solver tests (not the logistic sampler)."""
    g = CounterRng(seed)
    raw = np.abs(g.standard_normal((n, p))) + 0.05
    return raw / raw.sum(axis=1, keepdims=True)
