"""Pure-numpy solver kernels (fallback when the compiled extension is absent).

Both kernels work on the Gram form of the least-squares term,

    h(x) = c0 - lin.x + 0.5 x.G x + lam * penalty(Dx),

with ``D`` given as flat CSR arrays and its rows partitioned into contiguous
groups by ``gptr``.  The compiled module in ``_kernels.pyx`` implements the
same signatures with explicit loops; either backend may be selected at
import time.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

BACKEND_NAME = "python"


def _csr(dd, di, dp, shape):
    return sp.csr_matrix((dd, di, dp), shape=shape, copy=False)


def _pen_pieces(z, gptr, mu):
    """Smoothed penalty value and dual scaling factors per group."""
    sq = np.add.reduceat(z * z, gptr[:-1]) if len(z) else np.zeros(0)
    norms = np.sqrt(sq)
    interior = norms <= mu
    scale = np.where(interior, 1.0 / mu, 1.0 / np.where(norms > 0.0, norms, 1.0))
    value = float(np.sum(np.where(interior, sq / (2.0 * mu), norms - 0.5 * mu)))
    return value, scale


def fista(gram, lin, c0, lam, mu, dd, di, dp, td, ti, tp, gptr, m, L,
          x0, max_iter, tol, consec):
    """Accelerated gradient descent on the smoothed objective.

    Returns ``(x_best, raw_trace, n_iter, converged, bad_iter)`` where
    ``bad_iter`` is -1 unless a non-finite objective appeared.
    """
    d = len(x0)
    D = _csr(dd, di, dp, (m, d))
    DT = _csr(td, ti, tp, (d, m))
    sizes = np.diff(gptr)
    use_pen = lam > 0.0 and m > 0

    def objective(x, gx):
        val = c0 + float(x @ (0.5 * gx - lin))
        if use_pen:
            fmu, _ = _pen_pieces(D @ x, gptr, mu)
            val += lam * fmu
        return val

    x_prev = np.array(x0, dtype=float)
    yv = x_prev.copy()
    x_best = x_prev.copy()
    prev_h = best_h = objective(x_prev, gram @ x_prev)
    trace = np.empty(max_iter)
    t = 1.0
    hits = 0
    converged = False
    n_iter = 0
    bad_iter = -1

    for it in range(max_iter):
        g = gram @ yv - lin
        if use_pen:
            _, scale = _pen_pieces(D @ yv, gptr, mu)
            alpha = (D @ yv) * np.repeat(scale, sizes)
            g += lam * (DT @ alpha)
        x = yv - g / L
        hx = objective(x, gram @ x)
        trace[it] = hx
        n_iter = it + 1
        if not np.isfinite(hx):
            bad_iter = it
            break
        if hx < best_h:
            best_h = hx
            x_best = x.copy()
        rel = abs(hx - prev_h) / max(abs(prev_h), 1e-300)
        hits = hits + 1 if rel < tol else 0
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        yv = x + ((t - 1.0) / t_next) * (x - x_prev)
        x_prev = x
        t = t_next
        prev_h = hx
        if hits >= consec:
            converged = True
            break

    return x_best, trace[:n_iter].copy(), n_iter, converged, bad_iter


def subgrad(gram, lin, c0, lam, dd, di, dp, td, ti, tp, gptr, m,
            x0, iterations, step_c):
    """Subgradient descent on the unsmoothed objective with steps c/sqrt(k).

    Tracks and returns the best iterate by objective value:
    ``(x_best, best_objective)``.
    """
    d = len(x0)
    D = _csr(dd, di, dp, (m, d))
    DT = _csr(td, ti, tp, (d, m))
    sizes = np.diff(gptr)
    use_pen = lam > 0.0 and m > 0

    x = np.array(x0, dtype=float)
    x_best = x.copy()
    best_h = np.inf
    for k in range(1, iterations + 1):
        gx = gram @ x
        g = gx - lin
        h = c0 + float(x @ (0.5 * gx - lin))
        if use_pen:
            z = D @ x
            sq = np.add.reduceat(z * z, gptr[:-1])
            norms = np.sqrt(sq)
            h += lam * float(norms.sum())
            scale = np.where(norms > 0.0, 1.0 / np.where(norms > 0.0, norms, 1.0), 0.0)
            g += lam * (DT @ (z * np.repeat(scale, sizes)))
        if h < best_h:
            best_h = h
            x_best = x.copy()
        x = x - (step_c / np.sqrt(k)) * g
    return x_best, best_h
