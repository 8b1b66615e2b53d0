# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled solver kernels.

Mirrors the signatures and semantics of ``_kernels_py``; the hot loops are
plain C over the Gram matrix and the CSR arrays of the penalty matrix, so a
full solve runs without touching Python objects.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, sqrt

BACKEND_NAME = "compiled"


cdef inline void _gram_vec(const double[:, ::1] gram, const double[::1] v,
                           double[::1] out, Py_ssize_t d) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double acc
    for i in range(d):
        acc = 0.0
        for j in range(d):
            acc += gram[i, j] * v[j]
        out[i] = acc


cdef inline void _dx(const double[::1] dd, const int[::1] di, const int[::1] dp,
                     Py_ssize_t m, const double[::1] x, double[::1] z) noexcept nogil:
    cdef Py_ssize_t r, k
    cdef double acc
    for r in range(m):
        acc = 0.0
        for k in range(dp[r], dp[r + 1]):
            acc += dd[k] * x[di[k]]
        z[r] = acc


cdef double _pen_value(const int[::1] gptr, Py_ssize_t ngroups,
                       const double[::1] z, double mu) noexcept nogil:
    cdef Py_ssize_t g, r
    cdef double sumsq, nrm, f = 0.0
    for g in range(ngroups):
        sumsq = 0.0
        for r in range(gptr[g], gptr[g + 1]):
            sumsq += z[r] * z[r]
        nrm = sqrt(sumsq)
        if nrm <= mu:
            f += sumsq / (2.0 * mu)
        else:
            f += nrm - 0.5 * mu
    return f


cdef void _pen_grad(double lam, double mu,
                    const double[::1] dd, const int[::1] di, const int[::1] dp,
                    const int[::1] gptr, Py_ssize_t ngroups,
                    const double[::1] z, double[::1] grad) noexcept nogil:
    # grad += lam * D^T a*(z), a* the smoothed-dual maximizer
    cdef Py_ssize_t g, r, k
    cdef double sumsq, nrm, scale, ar
    for g in range(ngroups):
        sumsq = 0.0
        for r in range(gptr[g], gptr[g + 1]):
            sumsq += z[r] * z[r]
        nrm = sqrt(sumsq)
        scale = 1.0 / mu if nrm <= mu else 1.0 / nrm
        for r in range(gptr[g], gptr[g + 1]):
            ar = z[r] * scale
            if ar != 0.0:
                for k in range(dp[r], dp[r + 1]):
                    grad[di[k]] += lam * dd[k] * ar


def fista(double[:, ::1] gram, double[::1] lin, double c0, double lam, double mu,
          double[::1] dd, int[::1] di, int[::1] dp,
          double[::1] td, int[::1] ti, int[::1] tp,
          int[::1] gptr, int m, double L,
          double[::1] x0, int max_iter, double tol, int consec):
    cdef Py_ssize_t d = x0.shape[0]
    cdef Py_ssize_t ngroups = gptr.shape[0] - 1
    cdef bint use_pen = lam > 0.0 and m > 0

    x_prev_a = np.array(x0, dtype=np.float64)
    yv_a = x_prev_a.copy()
    x_a = np.empty(d)
    xb_a = x_prev_a.copy()
    g_a = np.empty(d)
    w_a = np.empty(d)
    z_a = np.empty(max(m, 1))
    trace_a = np.empty(max_iter)

    cdef double[::1] x_prev = x_prev_a, yv = yv_a, x = x_a, xb = xb_a
    cdef double[::1] g = g_a, w = w_a, z = z_a, trace = trace_a

    cdef double t = 1.0, t_next, coef, hx, rel, prev_h, best_h
    cdef Py_ssize_t it, i
    cdef int hits = 0, n_iter = 0, bad_iter = -1
    cdef bint converged = False

    with nogil:
        _gram_vec(gram, x_prev, w, d)
        prev_h = c0
        for i in range(d):
            prev_h += x_prev[i] * (0.5 * w[i] - lin[i])
        if use_pen:
            _dx(dd, di, dp, m, x_prev, z)
            prev_h += lam * _pen_value(gptr, ngroups, z, mu)
        best_h = prev_h

        for it in range(max_iter):
            _gram_vec(gram, yv, g, d)
            for i in range(d):
                g[i] -= lin[i]
            if use_pen:
                _dx(dd, di, dp, m, yv, z)
                _pen_grad(lam, mu, dd, di, dp, gptr, ngroups, z, g)
            for i in range(d):
                x[i] = yv[i] - g[i] / L

            _gram_vec(gram, x, w, d)
            hx = c0
            for i in range(d):
                hx += x[i] * (0.5 * w[i] - lin[i])
            if use_pen:
                _dx(dd, di, dp, m, x, z)
                hx += lam * _pen_value(gptr, ngroups, z, mu)
            trace[it] = hx
            n_iter = it + 1
            if hx != hx or fabs(hx) > 1e300:
                bad_iter = it
                break
            if hx < best_h:
                best_h = hx
                for i in range(d):
                    xb[i] = x[i]
            rel = fabs(hx - prev_h) / (fabs(prev_h) if fabs(prev_h) > 1e-300 else 1e-300)
            hits = hits + 1 if rel < tol else 0
            t_next = 0.5 * (1.0 + sqrt(1.0 + 4.0 * t * t))
            coef = (t - 1.0) / t_next
            for i in range(d):
                yv[i] = x[i] + coef * (x[i] - x_prev[i])
                x_prev[i] = x[i]
            t = t_next
            prev_h = hx
            if hits >= consec:
                converged = True
                break

    return xb_a, trace_a[:n_iter].copy(), n_iter, bool(converged), bad_iter


def subgrad(double[:, ::1] gram, double[::1] lin, double c0, double lam,
            double[::1] dd, int[::1] di, int[::1] dp,
            double[::1] td, int[::1] ti, int[::1] tp,
            int[::1] gptr, int m,
            double[::1] x0, long iterations, double step_c):
    cdef Py_ssize_t d = x0.shape[0]
    cdef Py_ssize_t ngroups = gptr.shape[0] - 1
    cdef bint use_pen = lam > 0.0 and m > 0

    x_a = np.array(x0, dtype=np.float64)
    xb_a = x_a.copy()
    g_a = np.empty(d)
    w_a = np.empty(d)
    z_a = np.empty(max(m, 1))

    cdef double[::1] x = x_a, xb = xb_a, g = g_a, w = w_a, z = z_a
    cdef double best_h = np.inf
    cdef double h, sumsq, nrm, scale, ar, step
    cdef Py_ssize_t i, gi, r, k
    cdef long it

    with nogil:
        for it in range(1, iterations + 1):
            _gram_vec(gram, x, w, d)
            h = c0
            for i in range(d):
                g[i] = w[i] - lin[i]
                h += x[i] * (0.5 * w[i] - lin[i])
            if use_pen:
                _dx(dd, di, dp, m, x, z)
                for gi in range(ngroups):
                    sumsq = 0.0
                    for r in range(gptr[gi], gptr[gi + 1]):
                        sumsq += z[r] * z[r]
                    nrm = sqrt(sumsq)
                    h += lam * nrm
                    if nrm > 0.0:
                        scale = 1.0 / nrm
                        for r in range(gptr[gi], gptr[gi + 1]):
                            ar = z[r] * scale
                            if ar != 0.0:
                                for k in range(dp[r], dp[r + 1]):
                                    g[di[k]] += lam * dd[k] * ar
            if h < best_h:
                best_h = h
                for i in range(d):
                    xb[i] = x[i]
            step = step_c / sqrt(<double> it)
            for i in range(d):
                x[i] -= step * g[i]

    return xb_a, best_h
