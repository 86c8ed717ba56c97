"""Iterative solvers for M x = b with per-iteration residual instrumentation.

Four interchangeable methods are provided:

* ``jacobi``        x_i <- (b_i - sum_{j != i} a_ij x_j) / a_ii, all components
                    updated from the previous iterate (parallelizable).
* ``gauss_seidel``  same update but sweeping rows in ascending index order and
                    always using the most current estimates (inherently
                    sequential; the sweep is a compiled kernel).
* ``cg``            conjugate gradients; requires symmetric positive definite M.
* ``gmres``         restarted GMRES with modified Gram-Schmidt and Givens
                    rotations.

The Gaussian mean-field fixed-point update mu_i <- -(theta_i +
sum_{j != i} Theta_ij mu_j) / Theta_ii is also provided; with parallel
updates it reproduces the Jacobi iterate for Theta mu = -theta bit for bit,
and with sequential updates the Gauss-Seidel iterate.

``solve`` is a pure function of its inputs and safe to call concurrently on
shared matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .sparse import SparseSym, offdiag_apply, spmv


class SolverError(RuntimeError):
    """Base class for solver failures."""


class ZeroDiagonalError(SolverError):
    """A stationary method hit a structurally missing or zero diagonal entry."""


class BreakdownError(SolverError):
    """A conjugate-gradient denominator vanished or went negative (non-SPD input)."""


class NotConvergedError(SolverError):
    """Raised by inference-level operations when a solve misses its tolerance."""

    def __init__(self, message: str, report: "SolveReport | None" = None,
                 best: np.ndarray | None = None, stage: str | None = None):
        super().__init__(message)
        self.report = report
        self.best = best
        self.stage = stage


_METHOD_ALIASES = {
    "jacobi": "jacobi",
    "gauss_seidel": "gauss_seidel",
    "gauss-seidel": "gauss_seidel",
    "gaussseidel": "gauss_seidel",
    "cg": "cg",
    "conjugate_gradient": "cg",
    "gmres": "gmres",
}

METHODS = ("jacobi", "gauss_seidel", "cg", "gmres")


@dataclass(frozen=True)
class SolverConfig:
    """Solver selection and stopping control.

    ``tolerance`` bounds the Euclidean norm of b - M x (absolute by default;
    set ``relative=True`` to scale it by ||b||).  ``max_iterations`` defaults
    to 10 * dim.  ``gmres_restart`` is the Krylov subspace size per cycle.
    """

    method: str = "cg"
    tolerance: float = 1e-6
    max_iterations: int | None = None
    gmres_restart: int = 30
    relative: bool = False

    def __post_init__(self):
        key = self.method.lower()
        if key not in _METHOD_ALIASES:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")
        object.__setattr__(self, "method", _METHOD_ALIASES[key])
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.gmres_restart < 1:
            raise ValueError("gmres_restart must be >= 1")


@dataclass
class SolveReport:
    """Convergence record: residuals[k] is ||b - M x|| after iteration k+1."""

    method: str
    iterations: int
    residuals: np.ndarray
    converged: bool
    tolerance: float

    def final_residual(self) -> float:
        return float(self.residuals[-1]) if self.iterations else math.nan


def _check_inputs(M: SparseSym, b: np.ndarray, x0: np.ndarray | None):
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (M.dim,):
        raise ValueError(f"rhs length {b.shape} does not match dim {M.dim}")
    if x0 is None:
        x0 = np.zeros(M.dim)
    else:
        x0 = np.asarray(x0, dtype=np.float64)
        if x0.shape != (M.dim,):
            raise ValueError(f"x0 length {x0.shape} does not match dim {M.dim}")
    return b, x0


def _stationary_diagonal(M: SparseSym) -> np.ndarray:
    if not M.has_full_diagonal():
        raise ZeroDiagonalError("stationary methods need every diagonal entry stored")
    d = M.values[M.diag_positions()]
    if np.any(d == 0.0):
        raise ZeroDiagonalError("stationary methods need a nonzero diagonal")
    return d


def solve(M: SparseSym, b: np.ndarray, x0: np.ndarray | None = None,
          cfg: SolverConfig | None = None) -> tuple[np.ndarray, SolveReport]:
    """Solve M x = b, returning the iterate and its convergence report.

    On failure to converge within ``max_iterations`` the best iterate seen
    (by recorded residual) is returned together with ``converged=False``;
    no exception is raised.  ``ZeroDiagonalError`` / ``BreakdownError``
    signal structurally unusable inputs.
    """
    cfg = cfg or SolverConfig()
    b, x0 = _check_inputs(M, b, x0)
    tol = cfg.tolerance * (np.linalg.norm(b) if cfg.relative else 1.0)
    maxit = cfg.max_iterations if cfg.max_iterations is not None else 10 * M.dim

    r0 = float(np.linalg.norm(b - spmv(M, x0)))
    if r0 <= tol:
        report = SolveReport(cfg.method, 0, np.empty(0), True, tol)
        return x0.copy(), report

    if cfg.method == "jacobi":
        x, res, converged = _solve_jacobi(M, b, x0, tol, maxit)
    elif cfg.method == "gauss_seidel":
        x, res, converged = _solve_gauss_seidel(M, b, x0, tol, maxit)
    elif cfg.method == "cg":
        x, res, converged = _solve_cg(M, b, x0, tol, maxit)
    else:
        x, res, converged = _solve_gmres(M, b, x0, tol, maxit, cfg.gmres_restart)

    residuals = np.asarray(res)
    report = SolveReport(cfg.method, residuals.shape[0], residuals, converged, tol)
    return x, report


# ---------------------------------------------------------------------------
# stationary methods
# ---------------------------------------------------------------------------

def jacobi_step(M: SparseSym, b: np.ndarray, x: np.ndarray) -> np.ndarray:
    """One Jacobi update; every component is computed from the previous iterate."""
    b = np.asarray(b, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    d = _stationary_diagonal(M)
    return (b - offdiag_apply(M, x)) / d


@njit(cache=True)
def _gs_sweep(row_offsets, col_indices, values, b, x):  # pragma: no cover - compiled
    n = b.shape[0]
    for i in range(n):
        s = 0.0
        d = 0.0
        for t in range(row_offsets[i], row_offsets[i + 1]):
            j = col_indices[t]
            if j == i:
                d = values[t]
            else:
                s += values[t] * x[j]
        x[i] = (b[i] - s) / d


@njit(cache=True)
def _mf_sweep(row_offsets, col_indices, values, theta, mu):  # pragma: no cover - compiled
    n = theta.shape[0]
    for i in range(n):
        s = 0.0
        d = 0.0
        for t in range(row_offsets[i], row_offsets[i + 1]):
            j = col_indices[t]
            if j == i:
                d = values[t]
            else:
                s += values[t] * mu[j]
        mu[i] = -(theta[i] + s) / d


def gauss_seidel_step(M: SparseSym, b: np.ndarray, x: np.ndarray) -> np.ndarray:
    """One Gauss-Seidel sweep in ascending row order, using current estimates."""
    b = np.asarray(b, dtype=np.float64)
    out = np.array(x, dtype=np.float64, copy=True)
    _stationary_diagonal(M)
    _gs_sweep(M.row_offsets, M.col_indices, M.values, b, out)
    return out


def meanfield_update(theta_mat: SparseSym, theta_vec: np.ndarray, mu: np.ndarray,
                     mode: str = "parallel") -> np.ndarray:
    """Gaussian mean-field update mu_i <- -(theta_i + sum_{j!=i} Theta_ij mu_j) / Theta_ii.

    ``mode="parallel"`` evaluates all components from the previous iterate;
    ``mode="sequential"`` sweeps in ascending index order with in-place
    updates.  These coincide with the Jacobi / Gauss-Seidel iterations for
    the system Theta mu = -theta.
    """
    theta_vec = np.asarray(theta_vec, dtype=np.float64)
    if theta_vec.shape != (theta_mat.dim,):
        raise ValueError("theta length does not match matrix dimension")
    d = _stationary_diagonal(theta_mat)
    if mode == "parallel":
        mu = np.asarray(mu, dtype=np.float64)
        return -(theta_vec + offdiag_apply(theta_mat, mu)) / d
    if mode == "sequential":
        out = np.array(mu, dtype=np.float64, copy=True)
        _mf_sweep(theta_mat.row_offsets, theta_mat.col_indices, theta_mat.values,
                  theta_vec, out)
        return out
    raise ValueError(f"mode must be 'parallel' or 'sequential', got {mode!r}")


def _track_best(best, x, r):
    if r < best[1]:
        return (x.copy(), r)
    return best


def _solve_jacobi(M, b, x0, tol, maxit):
    d = _stationary_diagonal(M)
    x = x0.copy()
    best = (x0.copy(), float(np.linalg.norm(b - spmv(M, x0))))
    residuals = []
    converged = False
    for _ in range(maxit):
        x = (b - offdiag_apply(M, x)) / d
        r = float(np.linalg.norm(b - spmv(M, x)))
        residuals.append(r)
        best = _track_best(best, x, r)
        if r <= tol:
            converged = True
            break
    return (x if converged else best[0]), residuals, converged


def _solve_gauss_seidel(M, b, x0, tol, maxit):
    _stationary_diagonal(M)
    x = x0.copy()
    best = (x0.copy(), float(np.linalg.norm(b - spmv(M, x0))))
    residuals = []
    converged = False
    for _ in range(maxit):
        _gs_sweep(M.row_offsets, M.col_indices, M.values, b, x)
        r = float(np.linalg.norm(b - spmv(M, x)))
        residuals.append(r)
        best = _track_best(best, x, r)
        if r <= tol:
            converged = True
            break
    return (x if converged else best[0]), residuals, converged


# ---------------------------------------------------------------------------
# Krylov methods
# ---------------------------------------------------------------------------

def _solve_cg(M, b, x0, tol, maxit):
    x = x0.copy()
    r = b - spmv(M, x)
    p = r.copy()
    rs = float(r @ r)
    residuals = []
    best = (x0.copy(), math.sqrt(rs))
    converged = False
    for _ in range(maxit):
        Ap = spmv(M, p)
        pAp = float(p @ Ap)
        if pAp <= 0.0:
            raise BreakdownError(
                f"conjugate gradients broke down (p'Ap = {pAp:.3e}); "
                "the system matrix is not positive definite")
        alpha = rs / pAp
        x = x + alpha * p
        r = r - alpha * Ap
        rs_new = float(r @ r)
        rn = math.sqrt(rs_new)
        residuals.append(rn)
        best = _track_best(best, x, rn)
        if rn <= tol:
            converged = True
            break
        p = r + (rs_new / rs) * p
        rs = rs_new
    return (x if converged else best[0]), residuals, converged


def _solve_gmres(M, b, x0, tol, maxit, restart):
    n = M.dim
    x = x0.copy()
    residuals = []
    converged = False
    total = 0
    while total < maxit and not converged:
        r = b - spmv(M, x)
        beta = float(np.linalg.norm(r))
        if beta <= tol:
            converged = True
            break
        m = min(restart, maxit - total)
        V = np.empty((m + 1, n))
        H = np.zeros((m + 1, m))
        cs = np.zeros(m)
        sn = np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        V[0] = r / beta
        k = 0
        exhausted = False
        for j in range(m):
            w = spmv(M, V[j])
            for i in range(j + 1):  # modified Gram-Schmidt
                H[i, j] = float(V[i] @ w)
                w -= H[i, j] * V[i]
            h_next = float(np.linalg.norm(w))
            H[j + 1, j] = h_next
            for i in range(j):  # previously accumulated rotations
                t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = t
            denom = math.hypot(H[j, j], H[j + 1, j])
            if denom == 0.0:
                cs[j], sn[j] = 1.0, 0.0
            else:
                cs[j], sn[j] = H[j, j] / denom, H[j + 1, j] / denom
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            H[j, j] = denom
            H[j + 1, j] = 0.0
            k = j + 1
            total += 1
            res = abs(g[j + 1])
            residuals.append(res)
            if res <= tol:
                converged = True
                break
            if h_next == 0.0:  # Krylov space exhausted without reaching tol
                exhausted = True
                break
            V[j + 1] = w / h_next
        # solve the k x k triangular system and update x
        y = np.zeros(k)
        for i in range(k - 1, -1, -1):
            y[i] = (g[i] - H[i, i + 1:k] @ y[i + 1:k]) / H[i, i]
        x = x + V[:k].T @ y
        if exhausted and not converged:
            raise BreakdownError("GMRES stagnated: Krylov space exhausted above tolerance")
    return x, residuals, converged
