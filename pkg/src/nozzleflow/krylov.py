"""Jacobi-preconditioned conjugate gradients with a Lanczos Ritz-value estimate."""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigvalsh_tridiagonal

from .errors import LinearSolveError


@dataclass
class CGResult:
    x: np.ndarray
    iterations: int
    residual_norm: float
    ritz_min: float
    history: list = field(default_factory=list)


def _ritz_min(alphas, betas):
    """Smallest eigenvalue of the Lanczos tridiagonal built from CG coefficients."""
    if not alphas:
        return float("nan")
    a = np.asarray(alphas)
    b = np.asarray(betas[: len(alphas) - 1])
    diag = 1.0 / a
    diag[1:] += b / a[:-1]
    off = np.sqrt(np.maximum(b, 0.0)) / a[:-1]
    if len(diag) == 1:
        return float(diag[0])
    return float(eigvalsh_tridiagonal(diag, off, select="i", select_range=(0, 0))[0])


def pcg(A, b, x0=None, rtol=1e-12, maxiter=None, atol=0.0):
    """Solve ``A x = b`` for symmetric positive definite ``A``.

    Stops when ``||b - A x|| <= max(rtol * ||b||, atol)``. The Jacobi
    preconditioner is the inverse diagonal of ``A``. The CG step lengths
    double as Lanczos coefficients, which yields an estimate of the smallest
    eigenvalue of the preconditioned operator; a positive value is evidence
    that the frozen-coefficient matrix is positive definite.

    Raises
    ------
    LinearSolveError
        On a non-positive curvature ``p^T A p`` or when ``maxiter`` is
        exhausted. ``history`` holds the residual norms.
    """
    n = b.shape[0]
    maxiter = 10 * n if maxiter is None else maxiter
    diag = A.diagonal()
    if np.any(diag <= 0.0):
        raise LinearSolveError("non-positive diagonal entry in the system matrix")
    minv = 1.0 / diag
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - A @ x
    bnorm = np.linalg.norm(b)
    target = max(rtol * bnorm, atol)
    rnorm = np.linalg.norm(r)
    history = [rnorm]
    if rnorm <= target or bnorm == 0.0 and rnorm == 0.0:
        return CGResult(x, 0, rnorm, float("nan"), history)
    z = minv * r
    p = z.copy()
    rz = r @ z
    alphas, betas = [], []
    for k in range(1, maxiter + 1):
        Ap = A @ p
        curv = p @ Ap
        if not curv > 0.0:
            raise LinearSolveError(
                f"conjugate gradients broke down at iteration {k}: p^T A p = {curv:.3e}",
                history=history, last=x,
            )
        alpha = rz / curv
        x += alpha * p
        r -= alpha * Ap
        rnorm = np.linalg.norm(r)
        history.append(rnorm)
        alphas.append(alpha)
        if rnorm <= target:
            return CGResult(x, k, rnorm, _ritz_min(alphas, betas), history)
        z = minv * r
        rz_new = r @ z
        beta = rz_new / rz
        betas.append(beta)
        rz = rz_new
        p = z + beta * p
    raise LinearSolveError(
        f"conjugate gradients stagnated: residual {rnorm:.3e} > target {target:.3e} "
        f"after {maxiter} iterations",
        history=history, last=x,
    )
