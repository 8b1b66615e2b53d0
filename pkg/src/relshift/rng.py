"""Deterministic counter-based random number generation.

All randomness in the package flows through :class:`CounterRng`, a
counter-based generator using the SplitMix64 output function: draw ``k`` of a
stream is ``mix64(key + (k+1)*GOLDEN)`` where ``mix64`` is the SplitMix64
finalizer and ``GOLDEN = 0x9E3779B97F4A7C15``.  Every draw is addressable from
(seed, position) alone, substreams are cheap to derive, and the sequence is
reproducible across platforms and languages.

Gaussian variates use the Box-Muller transform on 53-bit uniforms in (0, 1]
rather than a rejection sampler, so they are a pure function of the uniform
stream.
"""

from __future__ import annotations

import numpy as np

from .errors import ArgumentError

_MASK = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX_A = np.uint64(0xBF58476D1CE4E5B9)
_MIX_B = np.uint64(0x94D049BB133111EB)


def _mix64(z):
    """SplitMix64 finalizer, elementwise on uint64 arrays or scalars."""
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _MIX_A
        z = (z ^ (z >> np.uint64(27))) * _MIX_B
        return z ^ (z >> np.uint64(31))


def _fnv1a64(text):
    """FNV-1a 64-bit hash of a string, for naming substreams."""
    h = 0xCBF29CE484222325
    for b in text.encode("utf-8"):
        h = ((h ^ b) * 0x100000001B3) & _MASK
    return h


class CounterRng:
    """Seeded counter-based RNG with derivable substreams.

    Parameters
    ----------
    seed : int
        Any Python integer; reduced modulo 2**64.
    """

    def __init__(self, seed):
        with np.errstate(over="ignore"):
            self._key = _mix64(np.uint64(int(seed) & _MASK) + _GOLDEN)
        self._pos = 0

    def spawn(self, tag):
        """Return an independent substream named by an int or string tag.

        The child stream depends only on (seed, tag), not on how much of the
        parent stream has been consumed.
        """
        if isinstance(tag, str):
            tag = _fnv1a64(tag)
        child = CounterRng.__new__(CounterRng)
        with np.errstate(over="ignore"):
            child._key = _mix64(self._key ^ _mix64(np.uint64(int(tag) & _MASK) + _GOLDEN))
        child._pos = 0
        return child

    def raw(self, n):
        """Next ``n`` raw 64-bit words as a uint64 array."""
        idx = np.arange(self._pos + 1, self._pos + n + 1, dtype=np.uint64)
        self._pos += n
        with np.errstate(over="ignore"):
            return _mix64(self._key + idx * _GOLDEN)

    def uniform(self, size=None):
        """Uniforms in (0, 1] with 53-bit resolution."""
        n = 1 if size is None else int(np.prod(size))
        u = ((self.raw(n) >> np.uint64(11)) + np.uint64(1)) * 2.0**-53
        if size is None:
            return float(u[0])
        return u.reshape(size)

    def standard_normal(self, size=None):
        """Standard normals via Box-Muller on consecutive uniform pairs."""
        n = 1 if size is None else int(np.prod(size))
        half = (n + 1) // 2
        u1 = self.uniform(half)
        u2 = self.uniform(half)
        r = np.sqrt(-2.0 * np.log(u1))
        z = np.concatenate([r * np.cos(2.0 * np.pi * u2), r * np.sin(2.0 * np.pi * u2)])[:n]
        if size is None:
            return float(z[0])
        return z.reshape(size)

    def normal(self, mean=0.0, sigma=1.0, size=None):
        return mean + sigma * self.standard_normal(size)

    def gaussian_rows(self, n, mean, cov):
        """Draw ``n`` rows from N(mean, cov).

        ``cov`` may be ``"identity"``, a tuple ``("exp_decay", rho)`` for the
        correlation matrix rho**|i-j| (sampled by its exact AR(1) recursion,
        no matrix factorization involved), or an explicit positive-definite
        matrix (Cholesky-factorized).
        """
        mean = np.asarray(mean, dtype=float)
        k = mean.shape[0]
        z = self.standard_normal((n, k))
        if isinstance(cov, str) and cov == "identity":
            return mean + z
        if isinstance(cov, tuple) and cov[0] == "exp_decay":
            rho = float(cov[1])
            if not -1.0 < rho < 1.0:
                raise ArgumentError(f"exp_decay rho must be in (-1, 1), got {rho}")
            x = np.empty_like(z)
            x[:, 0] = z[:, 0]
            scale = np.sqrt(1.0 - rho * rho)
            for j in range(1, k):
                x[:, j] = rho * x[:, j - 1] + scale * z[:, j]
            return mean + x
        cov = np.asarray(cov, dtype=float)
        if cov.shape != (k, k):
            raise ArgumentError(f"covariance shape {cov.shape} does not match mean length {k}")
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise ArgumentError("covariance matrix is not positive definite") from exc
        return mean + z @ chol.T

    def permutation(self, n):
        """A deterministic uniform permutation of range(n)."""
        return np.argsort(self.raw(n), kind="stable")
