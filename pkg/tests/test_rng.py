import numpy as np
import pytest

from relshift import CounterRng
from relshift.errors import ArgumentError
from relshift.rng import _mix64


def test_known_splitmix_vector():
    # SplitMix64 reference outputs for seed state 1234567 + k*GOLDEN are a
    # function of the finalizer; pin the finalizer itself on known inputs.
    assert int(_mix64(np.uint64(0))) == 0
    # mix(1): computed once with arbitrary-precision integer arithmetic
    z = 1
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) % 2**64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) % 2**64
    z ^= z >> 31
    assert int(_mix64(np.uint64(1))) == z


def test_reproducible_and_positional():
    a = CounterRng(42).raw(10)
    b = CounterRng(42).raw(10)
    assert np.array_equal(a, b)
    # consuming in chunks gives the same stream
    r = CounterRng(42)
    c = np.concatenate([r.raw(3), r.raw(7)])
    assert np.array_equal(a, c)


def test_spawn_streams_differ_and_are_stable():
    root = CounterRng(7)
    s1 = root.spawn("x").raw(5)
    s2 = root.spawn("noise").raw(5)
    assert not np.array_equal(s1, s2)
    assert np.array_equal(s1, CounterRng(7).spawn("x").raw(5))
    # spawning is independent of parent consumption
    root2 = CounterRng(7)
    root2.raw(100)
    assert np.array_equal(root2.spawn("x").raw(5), s1)


def test_uniform_open_interval_and_moments():
    u = CounterRng(1).uniform(200000)
    assert np.all(u > 0) and np.all(u <= 1)
    assert abs(u.mean() - 0.5) < 0.005
    assert abs(u.var() - 1 / 12) < 0.002


def test_standard_normal_moments_and_shape():
    z = CounterRng(3).standard_normal((1000, 50))
    assert z.shape == (1000, 50)
    flat = z.ravel()
    assert abs(flat.mean()) < 0.01
    assert abs(flat.std() - 1) < 0.01
    assert abs(np.mean(flat**3)) < 0.03  # symmetry


def test_gaussian_rows_exp_decay_correlation():
    rho = 0.6
    z = CounterRng(5).gaussian_rows(200000, np.zeros(4), ("exp_decay", rho))
    c = np.corrcoef(z.T)
    for i in range(4):
        for j in range(4):
            assert abs(c[i, j] - rho ** abs(i - j)) < 0.02


def test_gaussian_rows_general_cov_and_errors():
    cov = np.array([[2.0, 0.5], [0.5, 1.0]])
    z = CounterRng(5).gaussian_rows(200000, np.array([1.0, -1.0]), cov)
    emp = np.cov(z.T)
    assert np.allclose(emp, cov, atol=0.03)
    assert np.allclose(z.mean(axis=0), [1.0, -1.0], atol=0.02)
    with pytest.raises(ArgumentError):
        CounterRng(0).gaussian_rows(5, np.zeros(2), np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(ArgumentError):
        CounterRng(0).gaussian_rows(5, np.zeros(2), ("exp_decay", 1.5))


def test_permutation_is_a_permutation_and_deterministic():
    p1 = CounterRng(11).permutation(1000)
    p2 = CounterRng(11).permutation(1000)
    assert np.array_equal(p1, p2)
    assert np.array_equal(np.sort(p1), np.arange(1000))
