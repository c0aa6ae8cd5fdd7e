"""Shared numerical kernels: Jacobi eigen-decomposition, PCA, regularized
logistic fitting, and the SMO solver for the soft-margin SVM dual.

Deterministic throughout: fixed initializations, no global RNG. Randomized
callers draw from rng.derive_stream (re-exported here for convenience).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from sewerbench import _kernels
from sewerbench.errors import ConfigError, FitError
from sewerbench.rng import RngStream, derive_state, derive_stream, mix64

__all__ = [
    "jacobi_eigen",
    "pca",
    "PcaResult",
    "fit_logistic",
    "smo_train",
    "SmoResult",
    "dual_objective",
    "kkt_violation",
    "derive_stream",
    "derive_state",
    "RngStream",
    "mix64",
]


def jacobi_eigen(a: np.ndarray, tol: float = 1e-10):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns (eigenvalues descending, eigenvectors as columns). Ties keep
    the pre-sort order. Raises ConfigError if a is not symmetric within
    1e-9.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ConfigError("jacobi_eigen needs a square matrix")
    if a.shape[0] > 0 and np.max(np.abs(a - a.T)) > 1e-9:
        raise ConfigError("matrix is not symmetric within 1e-9")
    n = a.shape[0]
    w = a.copy()
    v = np.eye(n)
    for _ in range(100):  # sweeps; small matrices converge in a handful
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                off = max(off, abs(w[p, q]))
        if off <= tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(w[p, q]) <= tol * 1e-2:
                    continue
                theta = (w[q, q] - w[p, p]) / (2.0 * w[p, q])
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = c
                rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                w = rot.T @ w @ rot
                v = v @ rot
    eigvals = np.diag(w).copy()
    order = np.argsort(-eigvals, kind="stable")
    return eigvals[order], v[:, order]


@dataclass
class PcaResult:
    rotation: np.ndarray  # (d, n_components), unit-norm principal axes
    variances: np.ndarray  # descending
    mean: np.ndarray
    degenerate: bool  # all-zero variance input -> identity axes


def pca(data: np.ndarray, n_components: int | None = None) -> PcaResult:
    """Principal axes of mean-centered data, descending variance order.

    Sign convention: the first component with magnitude > 1e-12 is made
    positive. Zero-variance input returns identity axes with the
    degenerate flag set.
    """
    data = np.asarray(data, dtype=float)
    n, d = data.shape
    if n_components is None:
        n_components = d
    if n_components > d:
        raise ConfigError("n_components exceeds data dimensionality")
    mean = data.mean(axis=0) if n else np.zeros(d)
    centered = data - mean
    if n > 1:
        cov = centered.T @ centered / (n - 1)
    else:
        cov = np.zeros((d, d))
    scale = max(np.max(np.abs(cov)), 0.0)
    if scale <= 1e-15:
        return PcaResult(np.eye(d)[:, :n_components], np.zeros(n_components), mean, True)
    variances, axes = jacobi_eigen(cov)
    for c in range(d):
        col = axes[:, c]
        nz = np.flatnonzero(np.abs(col) > 1e-12)
        if nz.size and col[nz[0]] < 0:
            axes[:, c] = -col
    return PcaResult(axes[:, :n_components], variances[:n_components], mean, False)


def fit_logistic(
    x: np.ndarray,
    y: np.ndarray,
    l2: float = 1e-6,
    max_iter: int = 500,
    tol: float = 1e-8,
) -> np.ndarray:
    """Binary logistic regression by gradient descent with step halving.

    Returns weights of length d+1 with the intercept first; the intercept
    is not regularized. Zero initialization, Armijo backtracking, stops at
    ||grad||_inf <= tol or max_iter. Raises FitError on non-finite loss.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ConfigError("fit_logistic needs a non-empty 2-D design matrix")
    n, d = x.shape
    xb = np.hstack([np.ones((n, 1)), x])
    w = np.zeros(d + 1)
    reg_mask = np.ones(d + 1)
    reg_mask[0] = 0.0

    def loss_grad(wv):
        z = xb @ wv
        nll = float(np.sum(np.logaddexp(0.0, z) - y * z))
        nll += 0.5 * l2 * float(np.sum((wv * reg_mask) ** 2))
        with np.errstate(over="ignore"):  # saturated sigmoid is exact 0/1
            p = 1.0 / (1.0 + np.exp(-z))
        g = xb.T @ (p - y) + l2 * wv * reg_mask
        return nll, g

    cur, g = loss_grad(w)
    if not np.isfinite(cur):
        raise FitError("non-finite logistic loss")
    for _ in range(max_iter):
        if np.max(np.abs(g)) <= tol:
            break
        step = 1.0
        gnorm2 = float(g @ g)
        accepted = False
        for _ in range(60):
            w_try = w - step * g
            new, g_try = loss_grad(w_try)
            if not np.isfinite(new):
                step *= 0.5
                continue
            if new <= cur - 1e-4 * step * gnorm2:
                w, cur, g = w_try, new, g_try
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
    return w


def logistic_nll_grad(w: np.ndarray, x: np.ndarray, y: np.ndarray, l2: float = 0.0):
    """Loss and gradient at arbitrary weights (finite-difference checks)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xb = np.hstack([np.ones((x.shape[0], 1)), x])
    reg_mask = np.ones(w.shape[0])
    reg_mask[0] = 0.0
    z = xb @ w
    nll = float(np.sum(np.logaddexp(0.0, z) - y * z))
    nll += 0.5 * l2 * float(np.sum((w * reg_mask) ** 2))
    with np.errstate(over="ignore"):
        p = 1.0 / (1.0 + np.exp(-z))
    g = xb.T @ (p - y) + l2 * w * reg_mask
    return nll, g


@dataclass
class SmoResult:
    alphas: np.ndarray
    bias: float
    converged: bool
    passes: int


def smo_train(
    gram: np.ndarray,
    y: np.ndarray,
    c: float = 1.0,
    tol: float = 1e-3,
    max_passes: int = 1000,
) -> SmoResult:
    """SMO on a precomputed kernel Gram matrix; y in {-1, +1}.

    On convergence the KKT conditions hold within tol for every point and
    sum(alpha_i * y_i) = 0 up to rounding. Exhausting max_passes returns
    the best-so-far solution with converged=False.
    """
    gram = np.asarray(gram, dtype=float)
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    if gram.shape != (n, n):
        raise ConfigError("gram must be n x n")
    if np.max(np.abs(gram - gram.T)) > 1e-8:
        raise ConfigError("gram matrix is not symmetric")
    if not np.all(np.abs(y) == 1.0):
        raise ConfigError("labels must be -1/+1")
    dummy_x = np.zeros((n, 1))
    alphas, bias, converged, passes = _kernels.smo_kernel(
        dummy_x, y, float(c), 0.0, float(tol), int(max_passes), gram
    )
    return SmoResult(alphas, float(bias), bool(converged), int(passes))


def smo_train_rbf(
    x: np.ndarray,
    y: np.ndarray,
    c: float = 1.0,
    gamma: float = 1.0 / 7.0,
    tol: float = 1e-3,
    max_passes: int = 1000,
) -> SmoResult:
    """SMO with RBF kernel rows computed on demand (no n x n Gram)."""
    x = np.ascontiguousarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    empty = np.zeros((0, 0))
    alphas, bias, converged, passes = _kernels.smo_kernel(
        x, y, float(c), float(gamma), float(tol), int(max_passes), empty
    )
    return SmoResult(alphas, float(bias), bool(converged), int(passes))


def dual_objective(gram: np.ndarray, y: np.ndarray, alphas: np.ndarray) -> float:
    """SVM dual objective W(alpha) = sum(a) - 0.5 aT (yyT * K) a."""
    ay = alphas * y
    return float(np.sum(alphas) - 0.5 * ay @ gram @ ay)


def kkt_violation(gram: np.ndarray, y: np.ndarray, alphas: np.ndarray, bias: float, c: float) -> float:
    """Largest KKT violation over all points (0 = exactly optimal)."""
    f = gram @ (alphas * y) + bias
    margins = y * f
    worst = 0.0
    for i in range(y.shape[0]):
        if alphas[i] <= 1e-12:
            worst = max(worst, 1.0 - margins[i])
        elif alphas[i] >= c - 1e-12:
            worst = max(worst, margins[i] - 1.0)
        else:
            worst = max(worst, abs(margins[i] - 1.0))
    return worst
