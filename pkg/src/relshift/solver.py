"""Smoothing proximal gradient solver for the unified penalized problem.

The objective is

    h(b) = (2n)^-1 ||y - X b||^2 + lam * f_mu(b),

where ``f_mu`` is the smoothed penalty from :mod:`relshift.penalty`.  The
gradient of ``h`` is Lipschitz with the explicit constant

    L = sigma_max(X^T X)/n + lam * ||D||^2 / mu,

so a fixed-step accelerated gradient loop (momentum extrapolation over the
previous two iterates) converges without line search.  Backtracking on ``L``
is available as an optional diagnostic mode.

Two interchangeable kernel backends exist: a compiled extension and a numpy
fallback.  Selection happens at import; set ``RELSHIFT_BACKEND`` to
``compiled`` or ``python`` to force one.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels_py
from .errors import ArgumentError, NumericalError
from .penalty import compile_dual, dual_spectral_norm

try:
    from . import _kernels
except ImportError:
    _kernels = None

_forced = os.environ.get("RELSHIFT_BACKEND", "").strip().lower()
if _forced == "python":
    _impl = _kernels_py
elif _forced == "compiled":
    if _kernels is None:
        raise ImportError(
            "RELSHIFT_BACKEND=compiled but the relshift._kernels extension is not built"
        )
    _impl = _kernels
elif _forced:
    raise ImportError(f"unknown RELSHIFT_BACKEND value {_forced!r}")
else:
    _impl = _kernels if _kernels is not None else _kernels_py

BACKEND = _impl.BACKEND_NAME


def available_backends():
    """Importable kernel modules, keyed by backend name."""
    out = {"python": _kernels_py}
    if _kernels is not None:
        out["compiled"] = _kernels
    return out


@dataclass(frozen=True)
class MuPolicy:
    """How to pick the smoothing parameter.

    ``fixed``: use the given value.  ``accuracy``: choose
    ``mu = eps / (2 * smooth_radius)`` so the smoothing bias in the objective
    is at most ``lam * eps / 2``.
    """

    kind: str
    value: float

    @classmethod
    def fixed(cls, mu):
        if mu <= 0:
            raise ArgumentError("mu must be positive")
        return cls("fixed", float(mu))

    @classmethod
    def accuracy(cls, eps):
        if eps <= 0:
            raise ArgumentError("eps must be positive")
        return cls("accuracy", float(eps))

    @classmethod
    def from_dict(cls, obj):
        if set(obj) != {"kind", "value"} or obj["kind"] not in ("fixed", "accuracy"):
            raise ArgumentError(f"bad mu_policy {obj!r}; expected kind fixed|accuracy and value")
        return cls(obj["kind"], float(obj["value"]))


def mu_from_policy(dual, policy):
    if policy.kind == "fixed":
        return policy.value
    return policy.value / (2.0 * dual.smooth_radius) if dual.smooth_radius > 0 else policy.value


@dataclass(frozen=True)
class SolverConfig:
    max_iter: int = 20000
    tol: float = 1e-8
    consec: int = 5
    mu_policy: MuPolicy = field(default_factory=lambda: MuPolicy.accuracy(1e-3))
    warm_start: bool = True
    backtracking: bool = False

    @classmethod
    def from_dict(cls, obj):
        kw = dict(obj)
        if "mu_policy" in kw:
            kw["mu_policy"] = MuPolicy.from_dict(kw["mu_policy"])
        unknown = set(kw) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ArgumentError(f"unknown solver config keys {sorted(unknown)}")
        return cls(**kw)


@dataclass
class SmoothedProblem:
    """One assembled solve: design, response, compiled penalty, lam, mu, L."""

    Xtil: np.ndarray
    ytil: np.ndarray
    dual: object
    lam: float
    mu: float
    lipschitz: float
    gram: np.ndarray
    lin: np.ndarray
    c0: float
    sigma_max_gram: float
    dnorm: float

    @property
    def n(self):
        return self.Xtil.shape[0]

    @property
    def dim(self):
        return self.Xtil.shape[1]

    def with_lambda(self, lam):
        """Cheap copy at a different penalty strength (shared precomputation)."""
        if lam < 0:
            raise ArgumentError("lambda must be nonnegative")
        L = self.sigma_max_gram + lam * self.dnorm**2 / self.mu
        return replace(self, lam=float(lam), lipschitz=L)

    def objective(self, coef, smoothed=True):
        """Objective at ``coef``; ``smoothed=False`` uses the exact penalty."""
        from .penalty import dual_norm_value, smoothed_value_and_dual

        coef = np.asarray(coef, dtype=float)
        quad = self.c0 - float(self.lin @ coef) + 0.5 * float(coef @ (self.gram @ coef))
        if self.lam == 0.0:
            return quad
        if smoothed:
            fmu, _ = smoothed_value_and_dual(self.dual, coef, self.mu)
            return quad + self.lam * fmu
        return quad + self.lam * dual_norm_value(self.dual, coef)

    def gradient(self, coef):
        from .penalty import smoothed_gradient

        g = self.gram @ coef - self.lin
        if self.lam:
            g = g + self.lam * smoothed_gradient(self.dual, coef, self.mu)
        return g


@dataclass
class SolverReport:
    coef: np.ndarray
    objective_trace: np.ndarray
    best_trace: np.ndarray
    n_iter: int
    converged: bool
    final_gap: float
    wall_time: float

    @property
    def final_objective(self):
        return float(self.best_trace[-1]) if len(self.best_trace) else float("nan")


def _sym_spectral_norm(mat, tol=1e-8, max_iter=10000):
    """Largest eigenvalue of a symmetric PSD matrix; all-ones start."""
    d = mat.shape[0]
    v = np.ones(d) / np.sqrt(d)
    est_prev = 0.0
    for _ in range(max_iter):
        w = mat @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        est = float(v @ (mat @ v))
        if abs(est - est_prev) <= tol * max(est, 1e-300):
            return est * (1.0 + 1e-9)
        est_prev = est
    return float(np.linalg.norm(mat, "fro"))  # certified upper bound for PSD


def assemble(X_pen, y, spec, lam, covariates=None,
             mu_policy=None, dual=None):
    """Build a :class:`SmoothedProblem`.

    ``X_pen`` is the penalized design block: the composition matrix itself
    for the fusion penalty, or its product with the tree indicator matrix
    for tree penalties.  Covariate columns, if any, are prepended and left
    unpenalized.
    """
    X_pen = np.asarray(X_pen, dtype=float)
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.shape[0] != X_pen.shape[0]:
        raise ArgumentError("response length does not match the design")
    if y.size == 0:
        raise ArgumentError("empty response")
    if lam < 0:
        raise ArgumentError("lambda must be nonnegative")
    if X_pen.shape[1] != spec.pen_dim:
        raise ArgumentError(
            f"penalized design has {X_pen.shape[1]} columns, penalty expects {spec.pen_dim}"
        )
    if covariates is not None:
        covariates = np.asarray(covariates, dtype=float)
        if covariates.ndim != 2 or covariates.shape[0] != y.shape[0]:
            raise ArgumentError("covariate matrix shape does not match the response")
        Xtil = np.hstack([covariates, X_pen])
        q = covariates.shape[1]
    else:
        Xtil = X_pen
        q = 0
    n = Xtil.shape[0]
    if dual is None:
        dual = compile_dual(spec, n_covariates=q)
    elif dual.n_covariates != q:
        raise ArgumentError("precompiled dual form was built for a different covariate count")
    mu_policy = mu_policy or MuPolicy.accuracy(1e-3)
    mu = mu_from_policy(dual, mu_policy)

    gram = np.ascontiguousarray(Xtil.T @ Xtil / n)
    lin = Xtil.T @ y / n
    c0 = float(y @ y) / (2.0 * n)
    sig = _sym_spectral_norm(gram)
    if sig == 0.0:
        raise ArgumentError("design matrix is identically zero")
    dnorm = dual_spectral_norm(dual)
    L = sig + lam * dnorm**2 / mu
    return SmoothedProblem(Xtil, y, dual, float(lam), mu, L, gram, lin, c0, sig, dnorm)


def _kernel_args(prob):
    du = prob.dual
    return (prob.gram, prob.lin, prob.c0, prob.lam, prob.mu,
            du.d_data, du.d_indices, du.d_indptr,
            du.dt_data, du.dt_indices, du.dt_indptr,
            du.group_ptr, du.m)


def solve_fista(prob, init=None, max_iter=20000, tol=1e-8, consec=5,
                config=None, backend=None):
    """Run the accelerated solve; returns a :class:`SolverReport`.

    The reported coefficient vector is the best iterate by objective value
    (acceleration is not monotone).  Stops once the relative objective
    change stays below ``tol`` for ``consec`` consecutive iterations.
    """
    if config is not None:
        max_iter, tol, consec = config.max_iter, config.tol, config.consec
        if config.backtracking:
            return _solve_backtracking(prob, init, max_iter, tol, consec)
    if max_iter < 1 or tol <= 0:
        raise ArgumentError("max_iter must be >= 1 and tol > 0")
    x0 = np.zeros(prob.dim) if init is None else np.asarray(init, dtype=float).copy()
    if x0.shape != (prob.dim,):
        raise ArgumentError(f"init has shape {x0.shape}, expected ({prob.dim},)")
    impl = _impl if backend is None else available_backends()[backend]
    start = time.perf_counter()
    args = _kernel_args(prob)
    coef, trace, n_iter, converged, bad_iter = impl.fista(
        *args, prob.lipschitz, x0, int(max_iter), float(tol), int(consec))
    elapsed = time.perf_counter() - start
    if bad_iter >= 0:
        raise NumericalError("objective became non-finite", iteration=bad_iter)
    best = np.minimum.accumulate(trace) if len(trace) else trace
    gap = abs(trace[-1] - trace[-2]) / max(1.0, abs(trace[-2])) if len(trace) > 1 else np.inf
    return SolverReport(np.asarray(coef), trace, best, int(n_iter), bool(converged),
                        float(gap), elapsed)


def _solve_backtracking(prob, init, max_iter, tol, consec):
    """Monotone line-search variant (python path only; diagnostic mode)."""
    x_prev = np.zeros(prob.dim) if init is None else np.asarray(init, dtype=float).copy()
    yv = x_prev.copy()
    L = max(prob.sigma_max_gram, 1e-12)
    t = 1.0
    hits = 0
    prev_h = prob.objective(x_prev)
    best_h, x_best = prev_h, x_prev.copy()
    trace = []
    start = time.perf_counter()
    converged = False
    for _ in range(max_iter):
        g = prob.gradient(yv)
        hy = prob.objective(yv)
        while True:
            x = yv - g / L
            hx = prob.objective(x)
            if hx <= hy - 0.5 / L * float(g @ g) + 1e-15 or L > 1e18:
                break
            L *= 2.0
        if not np.isfinite(hx):
            raise NumericalError("objective became non-finite", iteration=len(trace))
        trace.append(hx)
        if hx < best_h:
            best_h, x_best = hx, x.copy()
        rel = abs(hx - prev_h) / max(1.0, abs(prev_h))
        hits = hits + 1 if rel < tol else 0
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        yv = x + ((t - 1.0) / t_next) * (x - x_prev)
        x_prev, t, prev_h = x, t_next, hx
        if hits >= consec:
            converged = True
            break
    trace = np.asarray(trace)
    gap = abs(trace[-1] - trace[-2]) / max(1.0, abs(trace[-2])) if len(trace) > 1 else np.inf
    return SolverReport(x_best, trace, np.minimum.accumulate(trace), len(trace),
                        converged, float(gap), time.perf_counter() - start)


def subgradient_reference(prob, iterations=1_000_000, init=None, step_c=None,
                          backend=None):
    """Independent reference minimizer of the *unsmoothed* objective.

    Plain subgradient descent with diminishing steps ``c / sqrt(k)``,
    returning the best iterate encountered.  The descent runs in
    unit-diagonal (Jacobi-rescaled) coordinates, a pure change of variables
    that equalizes column scales without altering the objective being
    minimized.  ``step_c`` may be a single constant or a sequence to try
    (the run with the lowest objective wins; the default sweep covers the
    useful travel range).  Intended as a test oracle on small problems
    (dimension at most 50); it shares no code path with the accelerated
    solve.
    """
    import scipy.sparse as sp

    if prob.dim > 50:
        raise ArgumentError("the reference oracle is meant for problems with dim <= 50")
    x0 = np.zeros(prob.dim) if init is None else np.asarray(init, dtype=float).copy()
    s = np.sqrt(np.diag(prob.gram))
    s[s == 0] = 1.0
    gram_r = np.ascontiguousarray(prob.gram / np.outer(s, s))
    lin_r = prob.lin / s
    d_r = sp.csr_matrix(prob.dual.D @ sp.diags(1.0 / s))
    dt_r = sp.csr_matrix(d_r.T)
    dd = np.ascontiguousarray(d_r.data, dtype=np.float64)
    di = np.ascontiguousarray(d_r.indices, dtype=np.int32)
    dp = np.ascontiguousarray(d_r.indptr, dtype=np.int32)
    td = np.ascontiguousarray(dt_r.data, dtype=np.float64)
    ti = np.ascontiguousarray(dt_r.indices, dtype=np.int32)
    tp = np.ascontiguousarray(dt_r.indptr, dtype=np.int32)
    du = prob.dual
    sig_r = float(np.linalg.eigvalsh(gram_r)[-1]) if prob.dim > 1 else float(gram_r[0, 0])
    scale = 1.0 / max(sig_r, 1e-12)
    if step_c is None:
        step_c = (0.02 * scale, 0.1 * scale, 0.5 * scale)
    if np.isscalar(step_c):
        step_c = (float(step_c),)
    impl = _impl if backend is None else available_backends()[backend]
    best_coef, best_val = None, np.inf
    for c in step_c:
        coef, val = impl.subgrad(
            gram_r, lin_r, prob.c0, prob.lam,
            dd, di, dp, td, ti, tp,
            du.group_ptr, du.m, x0 * s, int(iterations), float(c))
        if val < best_val:
            best_coef, best_val = np.asarray(coef) / s, float(val)
    return best_coef, best_val


def solve_path(prob, lambdas, init=None, config=None):
    """Solve a descending lambda path with warm starts; yields (lam, report)."""
    config = config or SolverConfig()
    lambdas = np.asarray(lambdas, dtype=float)
    if np.any(np.diff(lambdas) > 0):
        raise ArgumentError("lambda path must be nonincreasing")
    x = init
    out = []
    for lam in lambdas:
        rep = solve_fista(prob.with_lambda(lam), init=x, config=config)
        out.append((float(lam), rep))
        if config.warm_start:
            x = rep.coef
    return out
