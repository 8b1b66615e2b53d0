"""Compositional predictor matrices: validation, truncation, simulation."""

from __future__ import annotations

import numpy as np

from .errors import ArgumentError, DegenerateSampleError
from .rng import CounterRng

CLOSURE_TOL = 1e-10


class CompositionMatrix:
    """An n x p matrix with entries in [0, 1] and unit row sums.

    Row and column labels are optional; when present they are used for
    sample-ID joins and leaf-label matching.
    """

    def __init__(self, values, row_labels=None, col_labels=None, check=True):
        self.values = np.ascontiguousarray(values, dtype=float)
        if self.values.ndim != 2:
            raise ArgumentError("composition values must be a 2-D matrix")
        self.row_labels = list(row_labels) if row_labels is not None else None
        self.col_labels = list(col_labels) if col_labels is not None else None
        if self.row_labels is not None and len(self.row_labels) != self.n:
            raise ArgumentError("row_labels length does not match row count")
        if self.col_labels is not None and len(self.col_labels) != self.p:
            raise ArgumentError("col_labels length does not match column count")
        if check:
            self._check_closure()

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def p(self):
        return self.values.shape[1]

    def _check_closure(self):
        v = self.values
        if np.any(v < 0) or np.any(v > 1):
            raise ArgumentError("composition entries must lie in [0, 1]")
        bad = np.abs(v.sum(axis=1) - 1.0) > CLOSURE_TOL
        if np.any(bad):
            rows = np.flatnonzero(bad)[:5].tolist()
            raise ArgumentError(f"rows {rows} do not sum to 1 within {CLOSURE_TOL}")

    def __repr__(self):
        return f"CompositionMatrix(n={self.n}, p={self.p})"


def _row_name(row_labels, i):
    return row_labels[i] if row_labels is not None else f"row {i}"


def validate_closure(values, tol=CLOSURE_TOL, row_labels=None, col_labels=None):
    """Close a nonnegative matrix to unit row sums.

    Rows already summing to 1 within ``tol`` pass through; otherwise each row
    is divided by its sum and the action is flagged in the returned tuple
    ``(matrix, renormalized)``.  A zero row is unrecoverable.
    """
    m = np.asarray(values, dtype=float)
    if m.ndim != 2:
        raise ArgumentError("expected a 2-D matrix")
    if np.any(m < 0) or not np.all(np.isfinite(m)):
        raise ArgumentError("matrix entries must be finite and nonnegative")
    sums = m.sum(axis=1)
    zero = np.flatnonzero(sums == 0)
    if zero.size:
        raise DegenerateSampleError(
            f"sample {_row_name(row_labels, zero[0])} sums to 0 and cannot be closed"
        )
    renormalized = bool(np.any(np.abs(sums - 1.0) > tol))
    vals = m / sums[:, None] if renormalized else m
    return CompositionMatrix(vals, row_labels, col_labels), renormalized


def truncate_renormalize(x, cut):
    """Zero entries below ``cut`` and re-close the rows.

    Returns ``(truncated, zero_fraction)`` where the fraction counts zeros in
    the truncated matrix.  A row entirely below ``cut`` is degenerate.
    """
    if not 0.0 <= cut < 1.0:
        raise ArgumentError(f"cut must be in [0, 1), got {cut}")
    v = x.values.copy()
    hit = (v < cut) & (v > 0.0)
    v[v < cut] = 0.0
    sums = v.sum(axis=1)
    dead = np.flatnonzero(sums == 0)
    if dead.size:
        raise DegenerateSampleError(
            f"sample {_row_name(x.row_labels, dead[0])} has no entries >= {cut}"
        )
    touched = hit.any(axis=1)  # untouched rows stay bit-identical
    v[touched] /= sums[touched, None]
    zero_fraction = float(np.mean(v == 0.0))
    return CompositionMatrix(v, x.row_labels, x.col_labels), zero_fraction


def sample_logistic_normal(n, p, mean=None, cov="identity", seed=0, rng=None):
    """Draw compositions by the logistic transform of a Gaussian matrix.

    Each row is ``(e^{z_1}, ..., e^{z_{p-1}}, 1) / (1 + sum_j e^{z_j})`` with
    ``z`` drawn from N(mean, cov) in p-1 dimensions.  ``cov`` follows
    :meth:`CounterRng.gaussian_rows`.  Deterministic given the seed.
    """
    if p < 2:
        raise ArgumentError("need at least 2 components")
    if mean is None:
        mean = np.zeros(p - 1)
    mean = np.asarray(mean, dtype=float)
    if mean.shape != (p - 1,):
        raise ArgumentError(f"mean must have length p-1={p - 1}")
    rng = rng if rng is not None else CounterRng(seed)
    z = rng.gaussian_rows(n, mean, cov)
    denom = 1.0 + np.exp(z).sum(axis=1)
    vals = np.empty((n, p))
    vals[:, :-1] = np.exp(z) / denom[:, None]
    vals[:, -1] = 1.0 / denom
    return CompositionMatrix(vals, col_labels=[f"t{j}" for j in range(1, p + 1)])


def add_noise_snr(signal, snr, seed=0, rng=None):
    """Add iid Gaussian noise calibrated to a signal-to-noise ratio.

    The noise variance is ``Var(signal) / snr`` (population variance of the
    realized signal vector).  Returns ``(y, sigma)`` so callers can keep the
    true noise scale.
    """
    signal = np.asarray(signal, dtype=float)
    if snr <= 0:
        raise ArgumentError(f"snr must be positive, got {snr}")
    var = float(np.var(signal))
    if var == 0.0:
        raise ArgumentError("signal is constant; snr calibration is undefined")
    sigma = np.sqrt(var / snr)
    rng = rng if rng is not None else CounterRng(seed)
    y = signal + sigma * rng.standard_normal(signal.shape)
    return y, sigma
