"""Vectorized safeguarded Newton iteration on a sign-change bracket."""

import numpy as np

from .errors import ConvergenceError


def bracketed_newton(func, dfunc, lo, hi, x0=None, xtol=1e-14, maxiter=200):
    """Find roots of ``func`` elementwise inside ``[lo, hi]``.

    ``func`` must change sign across every bracket. Newton steps that leave
    the current bracket (or hit a zero slope) are replaced by bisection, so
    the iteration always terminates for continuous ``func``.

    Parameters
    ----------
    func, dfunc : callable
        Vectorized function and its derivative, called on arrays shaped like
        ``lo``.
    lo, hi : array_like
        Bracket ends.
    x0 : array_like, optional
        Starting point; defaults to the bracket midpoint.
    xtol : float or array_like
        Absolute tolerance on the root location.
    maxiter : int
        Iteration cap before :class:`ConvergenceError` is raised.

    Returns
    -------
    ndarray
        Root estimates, same shape as the broadcast bracket.
    """
    lo, hi = np.broadcast_arrays(np.asarray(lo, dtype=float), np.asarray(hi, dtype=float))
    lo = lo.copy()
    hi = hi.copy()
    xtol = np.broadcast_to(np.asarray(xtol, dtype=float), lo.shape)
    f_lo = func(lo)
    rising = f_lo < 0.0
    if x0 is None:
        x = 0.5 * (lo + hi)
    else:
        x = np.clip(np.broadcast_to(np.asarray(x0, dtype=float), lo.shape), lo, hi)
    done = np.zeros(lo.shape, dtype=bool)

    for _ in range(maxiter):
        f = func(x)
        below = np.where(rising, f < 0.0, f > 0.0)
        lo = np.where(below & ~done, x, lo)
        hi = np.where(~below & (f != 0.0) & ~done, x, hi)
        done |= (f == 0.0) | (hi - lo <= xtol)
        if done.all():
            return x
        with np.errstate(divide="ignore", invalid="ignore"):
            step = f / dfunc(x)
            trial = x - step
        ok = np.isfinite(trial) & (trial > lo) & (trial < hi)
        x_new = np.where(ok, trial, 0.5 * (lo + hi))
        small = np.abs(x_new - x) <= xtol
        x = np.where(done, x, x_new)
        done |= small
        if done.all():
            return x

    raise ConvergenceError(
        f"bracketed Newton did not converge in {maxiter} iterations "
        f"({int((~done).sum())} unresolved entries)",
        last=x,
    )
