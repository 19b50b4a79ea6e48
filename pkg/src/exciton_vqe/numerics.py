"""Small numerical kernels shared by the solvers.

Contents: a checked symmetric eigensolver, the 4x4 antisymmetric matrix
exponential used for SO(4) blocks, central finite differences, and two
unconstrained minimizers (L-BFGS with a strong-Wolfe line search, and a
Powell wrapper).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.optimize

Objective = Callable[[np.ndarray], float]
Gradient = Callable[[np.ndarray], np.ndarray]


class NumericsError(ValueError):
    """Raised when a numerical kernel receives input outside its contract."""


# ---------------------------------------------------------------------------
# Eigen-decomposition
# ---------------------------------------------------------------------------


def eigh(matrix: np.ndarray, sym_tol: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenpairs of a real symmetric matrix.

    Parameters
    ----------
    matrix : (n, n) array
        Must be symmetric to ``sym_tol`` (absolute, scaled by the largest entry
        when that exceeds one).
    sym_tol : float
        Symmetry tolerance.

    Returns
    -------
    values : (n,) array
        Eigenvalues in ascending order; ties keep LAPACK's original order.
    vectors : (n, n) array
        Orthonormal eigenvectors stored as columns.
    """
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NumericsError(f"eigh expects a square matrix, got shape {m.shape}")
    if m.size == 0:
        return np.zeros(0), np.zeros((0, 0))
    scale = max(1.0, float(np.max(np.abs(m))))
    asym = float(np.max(np.abs(m - m.T)))
    if asym > sym_tol * scale:
        raise NumericsError(f"matrix is not symmetric (max |M - M^T| = {asym:.3e})")
    sym = 0.5 * (m + m.T)
    values, vectors = np.linalg.eigh(sym)
    order = np.argsort(values, kind="stable")
    return values[order], vectors[:, order]


def canonicalize_columns(vectors: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Flip column signs so the first entry with magnitude above ``tol`` is positive."""
    out = np.array(vectors, dtype=float, copy=True)
    for j in range(out.shape[1]):
        col = out[:, j]
        nz = np.flatnonzero(np.abs(col) > tol)
        if nz.size and col[nz[0]] < 0:
            out[:, j] = -col
    return out


# ---------------------------------------------------------------------------
# 4x4 antisymmetric exponential
# ---------------------------------------------------------------------------


def expm_antisym4(generator: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Exponential of a real 4x4 antisymmetric matrix by scaling and squaring.

    The scaled matrix has 1-norm at most 1/2, where a Taylor series truncated
    once terms drop below 1e-17 is accurate to machine precision.
    """
    a = np.asarray(generator, dtype=float)
    if a.shape != (4, 4):
        raise NumericsError(f"expected a 4x4 matrix, got {a.shape}")
    if np.max(np.abs(a + a.T)) > tol:
        raise NumericsError("generator is not antisymmetric")
    norm = float(np.max(np.sum(np.abs(a), axis=0)))
    squarings = max(0, int(math.ceil(math.log2(norm / 0.5)))) if norm > 0.5 else 0
    b = a / (2.0**squarings)
    result = np.eye(4)
    term = np.eye(4)
    for k in range(1, 40):
        term = term @ b / k
        result = result + term
        if np.max(np.abs(term)) < 1e-17:
            break
    for _ in range(squarings):
        result = result @ result
    return result


# ---------------------------------------------------------------------------
# Finite differences
# ---------------------------------------------------------------------------


def fd_gradient(objective: Objective, x: np.ndarray, step: float = 0.01) -> np.ndarray:
    """Second-order central finite-difference gradient.

    Component ``i`` is ``(f(x + h e_i) - f(x - h e_i)) / (2 h)``.
    """
    if step <= 0:
        raise NumericsError("finite-difference step must be positive")
    x = np.asarray(x, dtype=float)
    grad = np.empty_like(x)
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[i] += step
        xm[i] -= step
        grad[i] = (objective(xp) - objective(xm)) / (2.0 * step)
    return grad


# ---------------------------------------------------------------------------
# Optimizers
# ---------------------------------------------------------------------------


@dataclass
class OptimizerOptions:
    """Controls shared by :func:`lbfgs` and :func:`powell`.

    ``gtol`` applies to the max-norm of the gradient (L-BFGS); ``ftol`` is the
    relative objective-decrease tolerance (Powell).
    """

    max_iter: int = 200
    gtol: float = 1e-7
    ftol: float = 1e-12
    memory: int = 10
    c1: float = 1e-4
    c2: float = 0.9
    max_linesearch: int = 30
    fd_step: float = 0.01

    def __post_init__(self) -> None:
        if self.max_iter < 0:
            raise NumericsError("max_iter must be non-negative")
        for name in ("gtol", "ftol", "fd_step"):
            if getattr(self, name) <= 0:
                raise NumericsError(f"{name} must be positive")
        if self.memory < 1:
            raise NumericsError("memory must be at least 1")
        if not 0 < self.c1 < self.c2 < 1:
            raise NumericsError("line-search constants need 0 < c1 < c2 < 1")


@dataclass
class TraceEntry:
    iteration: int
    fun: float
    grad_norm: float  # max |g|; NaN when the method has no gradient


@dataclass
class OptimizeResult:
    x: np.ndarray
    fun: float
    n_iter: int
    converged: bool
    message: str
    trace: list[TraceEntry] = field(default_factory=list)
    grad: np.ndarray | None = None
    n_fun: int = 0
    n_grad: int = 0
    line_search_failed: bool = False


class _Counted:
    """Wraps objective and gradient, counting calls and remembering the best point."""

    def __init__(self, fun: Objective, grad: Gradient | None):
        self._fun = fun
        self._grad = grad
        self.n_fun = 0
        self.n_grad = 0
        self.best_x: np.ndarray | None = None
        self.best_f = math.inf

    def f(self, x: np.ndarray) -> float:
        self.n_fun += 1
        val = float(self._fun(x))
        if val < self.best_f:
            self.best_f = val
            self.best_x = np.array(x, copy=True)
        return val

    def g(self, x: np.ndarray) -> np.ndarray:
        assert self._grad is not None
        self.n_grad += 1
        return np.asarray(self._grad(x), dtype=float)


def _cubic_min(a, fa, ga, b, fb, gb):
    """Minimizer of the cubic interpolating (a, fa, ga) and (b, fb, gb), or None."""
    d1 = ga + gb - 3.0 * (fa - fb) / (a - b)
    disc = d1 * d1 - ga * gb
    if disc < 0:
        return None
    d2 = math.copysign(math.sqrt(disc), b - a)
    denom = gb - ga + 2.0 * d2
    if denom == 0:
        return None
    return b - (b - a) * (gb + d2 - d1) / denom


def _zoom(phi, dphi, lo, hi, f_lo, g_lo, f_hi, g_hi, f0, g0, c1, c2, max_iter):
    """Zoom phase of the strong-Wolfe search (Nocedal and Wright, Alg. 3.6)."""
    for _ in range(max_iter):
        lo_b, hi_b = min(lo, hi), max(lo, hi)
        width = hi_b - lo_b
        trial = None
        if g_hi is not None:
            trial = _cubic_min(lo, f_lo, g_lo, hi, f_hi, g_hi)
        if trial is None:
            # quadratic through f_lo, g_lo, f_hi
            denom = 2.0 * (f_hi - f_lo - g_lo * (hi - lo))
            if denom > 0:
                trial = lo - g_lo * (hi - lo) ** 2 / denom
        if trial is None or not (lo_b + 0.1 * width <= trial <= hi_b - 0.1 * width):
            trial = 0.5 * (lo + hi)
        f_t = phi(trial)
        if f_t > f0 + c1 * trial * g0 or f_t >= f_lo:
            hi, f_hi, g_hi = trial, f_t, None
            continue
        g_t = dphi(trial)
        if abs(g_t) <= -c2 * g0:
            return trial, f_t, True
        if g_t * (hi - lo) >= 0:
            hi, f_hi, g_hi = lo, f_lo, g_lo
        lo, f_lo, g_lo = trial, f_t, g_t
        if width < 1e-14 * max(1.0, abs(lo)):
            break
    return lo, f_lo, lo > 0


def _line_search(phi, dphi, f0, g0, alpha0, c1, c2, max_iter, alpha_max=1e10):
    """Strong-Wolfe line search; returns (alpha, f(alpha), success)."""
    prev, f_prev, g_prev = 0.0, f0, g0
    alpha = alpha0
    for i in range(max_iter):
        f_a = phi(alpha)
        if f_a > f0 + c1 * alpha * g0 or (i > 0 and f_a >= f_prev):
            return _zoom(phi, dphi, prev, alpha, f_prev, g_prev, f_a, None, f0, g0, c1, c2, max_iter)
        g_a = dphi(alpha)
        if abs(g_a) <= -c2 * g0:
            return alpha, f_a, True
        if g_a >= 0:
            return _zoom(phi, dphi, alpha, prev, f_a, g_a, f_prev, g_prev, f0, g0, c1, c2, max_iter)
        prev, f_prev, g_prev = alpha, f_a, g_a
        alpha = min(2.0 * alpha, alpha_max)
    return prev, f_prev, prev > 0


def lbfgs(
    objective: Objective,
    gradient: Gradient,
    x0: Sequence[float] | np.ndarray,
    options: OptimizerOptions | None = None,
    callback: Callable[[TraceEntry], None] | None = None,
) -> OptimizeResult:
    """Limited-memory BFGS with a strong-Wolfe line search.

    Terminates when ``max |g| < options.gtol`` at an accepted iterate or after
    ``options.max_iter`` iterations. Accepted iterates form a non-increasing
    objective sequence; the returned point is the best one seen, so a failed
    final line search cannot make the result worse than the last iterate.
    """
    opts = options or OptimizerOptions()
    counted = _Counted(objective, gradient)
    x = np.array(x0, dtype=float, copy=True)
    f = counted.f(x)
    g = counted.g(x)
    s_hist: list[np.ndarray] = []
    y_hist: list[np.ndarray] = []
    trace = [TraceEntry(0, f, float(np.max(np.abs(g))) if g.size else 0.0)]
    if callback:
        callback(trace[-1])
    converged = trace[-1].grad_norm < opts.gtol
    message = "gradient tolerance reached" if converged else "iteration limit reached"
    ls_failed = False
    it = 0
    while not converged and it < opts.max_iter:
        # two-loop recursion
        q = g.copy()
        alphas = []
        for s, y in zip(reversed(s_hist), reversed(y_hist)):
            rho = 1.0 / float(y @ s)
            a = rho * float(s @ q)
            alphas.append((rho, a))
            q -= a * y
        if s_hist:
            gamma = float(s_hist[-1] @ y_hist[-1]) / float(y_hist[-1] @ y_hist[-1])
        else:
            gamma = min(1.0, 1.0 / float(np.linalg.norm(g)))
        r = gamma * q
        for (s, y), (rho, a) in zip(zip(s_hist, y_hist), reversed(alphas)):
            b = rho * float(y @ r)
            r += (a - b) * s
        d = -r
        g0 = float(g @ d)
        if g0 >= 0:
            # lost descent; restart from steepest descent
            s_hist.clear()
            y_hist.clear()
            d = -g * min(1.0, 1.0 / float(np.linalg.norm(g)))
            g0 = float(g @ d)

        cache: dict[float, np.ndarray] = {}

        def phi(alpha: float) -> float:
            return counted.f(x + alpha * d)

        def dphi(alpha: float) -> float:
            gg = counted.g(x + alpha * d)
            cache[alpha] = gg
            return float(gg @ d)

        alpha, f_new, ok = _line_search(phi, dphi, f, g0, 1.0, opts.c1, opts.c2, opts.max_linesearch)
        if not ok or alpha not in cache or f_new > f:
            ls_failed = True
            message = "line search failed"
            break
        x_new = x + alpha * d
        g_new = cache[alpha]
        s = x_new - x
        y = g_new - g
        if float(s @ y) > 1e-12 * float(np.linalg.norm(s)) * float(np.linalg.norm(y)):
            s_hist.append(s)
            y_hist.append(y)
            if len(s_hist) > opts.memory:
                s_hist.pop(0)
                y_hist.pop(0)
        x, f, g = x_new, f_new, g_new
        it += 1
        trace.append(TraceEntry(it, f, float(np.max(np.abs(g)))))
        if callback:
            callback(trace[-1])
        if trace[-1].grad_norm < opts.gtol:
            converged = True
            message = "gradient tolerance reached"
    x_out, f_out, g_out = x, f, g
    if counted.best_x is not None and counted.best_f < f:
        x_out, f_out, g_out = counted.best_x, counted.best_f, None
    return OptimizeResult(
        x=x_out,
        fun=f_out,
        n_iter=it,
        converged=converged,
        message=message,
        trace=trace,
        grad=g_out,
        n_fun=counted.n_fun,
        n_grad=counted.n_grad,
        line_search_failed=ls_failed,
    )


def powell(
    objective: Objective,
    x0: Sequence[float] | np.ndarray,
    options: OptimizerOptions | None = None,
    callback: Callable[[TraceEntry], None] | None = None,
) -> OptimizeResult:
    """Derivative-free minimization by Powell's conjugate-direction method.

    Backed by :func:`scipy.optimize.minimize`; the iteration trace records the
    objective after every direction-set sweep.
    """
    opts = options or OptimizerOptions()
    counted = _Counted(objective, None)
    x0 = np.array(x0, dtype=float, copy=True)
    trace = [TraceEntry(0, counted.f(x0), math.nan)]
    if callback:
        callback(trace[-1])

    def on_iter(xk: np.ndarray) -> None:
        entry = TraceEntry(len(trace), float(objective(xk)), math.nan)
        trace.append(entry)
        if callback:
            callback(entry)

    if opts.max_iter == 0:
        return OptimizeResult(x0, trace[0].fun, 0, False, "iteration limit reached", trace, n_fun=1)
    res = scipy.optimize.minimize(
        counted.f,
        x0,
        method="Powell",
        callback=on_iter,
        options={"maxiter": opts.max_iter, "xtol": 1e-10, "ftol": opts.ftol, "maxfev": 10**8},
    )
    x = counted.best_x if counted.best_x is not None else np.asarray(res.x)
    return OptimizeResult(
        x=np.array(x, copy=True),
        fun=counted.best_f,
        n_iter=int(res.nit),
        converged=bool(res.success),
        message=str(res.message),
        trace=trace,
        n_fun=counted.n_fun,
    )
