"""Bracketing of the largest mass flux that still yields a uniformly subsonic solution."""

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .diagnostics import check_bounds_and_monotonicity, reconstruct_flow, subsonic_margin
from .elliptic_solver import SolverConfig, scaled_initial, solve
from .errors import ConvergenceError, DomainError, FarFieldError, SupersonicStateError
from .farfield import solve_farfield, solve_upstream
from .geometry import truncate

log = logging.getLogger(__name__)

SUBSONIC = "subsonic"
MARGIN_VIOLATED = "margin_violated"
NON_CONVERGED = "non_converged"


@dataclass
class CriticalContext:
    """Everything a classification needs besides ``m`` and the cut-off margin."""

    walls: object
    profiles: object
    gas: object
    L: float
    nx: int
    ny: int
    config: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        self.domain = truncate(self.walls, self.L, self.nx, self.ny)


@dataclass
class Classification:
    m: float
    label: str
    M: float
    epsilon: float
    cause: str = ""
    field: object = None
    bounds_ok: bool | None = None
    monotone_ok: bool | None = None

    def row(self):
        return (self.m, self.M, self.label, self.epsilon)


def classify(m, context, epsilon, initial=None):
    """Attempt the cut-off solve at ``m`` with margin ``epsilon`` and label the outcome.

    ``subsonic`` requires a converged solve, an inactive cut-off and
    ``M(m) <= -4 epsilon``. Far-field or Picard failures give
    ``non_converged``; everything else is ``margin_violated``.
    """
    if not m > 0.0:
        raise DomainError("mass flux must be positive")
    ctx = context
    nan = float("nan")
    try:
        ff = solve_farfield(ctx.profiles, ctx.gas, m, ctx.walls.a, ctx.walls.b)
    except FarFieldError as exc:
        return Classification(m, NON_CONVERGED, nan, epsilon, cause=f"far field: {exc}")
    cfg = replace(ctx.config, epsilon=epsilon)
    try:
        sf = solve(ctx.domain, ctx.profiles, ff, ctx.gas, m, cfg, initial=initial)
    except ConvergenceError as exc:
        return Classification(m, NON_CONVERGED, nan, epsilon, cause=f"solver: {exc}")
    try:
        flow = reconstruct_flow(sf, ctx.profiles, ff.upstream, ctx.gas)
        M = subsonic_margin(sf, flow)
    except SupersonicStateError as exc:
        return Classification(m, MARGIN_VIOLATED, nan, epsilon, cause=f"reconstruction: {exc}", field=sf)
    if sf.cutoff_active:
        return Classification(m, MARGIN_VIOLATED, M, epsilon,
                              cause=f"cut-off active in {sf.cutoff_cells} cells", field=sf)
    if M > -4.0 * epsilon:
        return Classification(m, MARGIN_VIOLATED, M, epsilon, cause="margin above -4 epsilon", field=sf)
    bc = check_bounds_and_monotonicity(sf)
    return Classification(m, SUBSONIC, M, epsilon, field=sf, bounds_ok=bc.bounds_ok, monotone_ok=bc.monotone_ok)


@dataclass
class CriticalFluxResult:
    m_hat_bracket: tuple
    margin_curve: list
    epsilon_sequence: list
    terminated_by: str
    grid: tuple
    attempts: list = field(default_factory=list, repr=False)

    @property
    def m_lo(self):
        return self.m_hat_bracket[0]

    @property
    def m_hi(self):
        return self.m_hat_bracket[1]

    def margin_table(self):
        """Rows ``(m, M, label, epsilon)`` sorted by ``m``."""
        return sorted(self.margin_curve, key=lambda r: r[0])

    def margin_monotone(self):
        rows = [r for r in self.margin_table() if np.isfinite(r[1])]
        return all(b[1] >= a[1] for a, b in zip(rows, rows[1:]))

    def as_dict(self):
        return {
            "m_lo": self.m_lo,
            "m_hi": self.m_hi,
            "terminated_by": self.terminated_by,
            "epsilon_final": self.epsilon_sequence[-1],
            "epsilon_sequence": list(self.epsilon_sequence),
            "grid": {"L": self.grid[0], "nx": self.grid[1], "ny": self.grid[2]},
            "n_attempts": len(self.margin_curve),
            "margin_monotone": self.margin_monotone(),
        }


def find_critical(context, m_seed, tol_m=1e-3, growth=1.25, epsilon0=None, floor_factor=1e-3,
                  max_attempts=400):
    """Expanding scan from ``m_seed`` then bisection on the subsonic boundary.

    The cut-off margin starts at ``epsilon0`` (default: the upstream margin
    at ``m_seed``) and is halved whenever the bracket closes on a
    margin violation, down to ``floor_factor * epsilon0``. Bisection in a
    round stops once the bracket is narrower than ``tol_m`` and, when the
    upper end is a margin violation, ``M(m_lo) >= -8 epsilon``.
    """
    if epsilon0 is None:
        try:
            up = solve_upstream(context.profiles, context.gas, m_seed)
        except FarFieldError as exc:
            raise DomainError(f"seed mass flux {m_seed!r} is not subsonic ({NON_CONVERGED}: {exc})") from exc
        epsilon0 = up.default_epsilon()
    eps = float(epsilon0)
    floor = floor_factor * eps
    eps_seq = [eps]
    attempts = []

    def run(m, init):
        c = classify(m, context, eps, initial=init)
        attempts.append(c)
        log.info("m=%.15g eps=%.3e -> %s M=%.6e %s", m, eps, c.label, c.M, c.cause)
        if len(attempts) > max_attempts:
            raise ConvergenceError("critical-flux search exceeded its attempt budget",
                                   history=[a.row() for a in attempts])
        return c

    def warm(c, m):
        return scaled_initial(c.field, m) if c.field is not None else None

    lo = run(m_seed, None)
    if lo.label != SUBSONIC:
        raise DomainError(f"seed mass flux {m_seed!r} is not subsonic ({lo.label}: {lo.cause})")
    hi = None
    ceiling = None
    while hi is None:
        m = lo.m * growth
        c = run(m, warm(lo, m))
        if c.label == SUBSONIC:
            lo = c
        else:
            hi = c
            if c.label == NON_CONVERGED:
                ceiling = c

    min_width = 1e-12 * hi.m
    while True:
        while hi.m - lo.m > min_width and (
            hi.m - lo.m > tol_m or (hi.label == MARGIN_VIOLATED and lo.M < -8.0 * eps)
        ):
            mid = 0.5 * (lo.m + hi.m)
            c = run(mid, warm(lo, mid))
            if c.label == SUBSONIC:
                lo = c
            else:
                hi = c
                if c.label == NON_CONVERGED and (ceiling is None or c.m < ceiling.m):
                    ceiling = c
        if hi.label != MARGIN_VIOLATED or 0.5 * eps < floor:
            break
        eps *= 0.5
        eps_seq.append(eps)
        c = run(hi.m, warm(lo, hi.m))
        if c.label == SUBSONIC:
            lo = c
            if ceiling is not None:
                hi = ceiling
            else:
                hi = None
                while hi is None:
                    m = lo.m + (lo.m * growth - lo.m) * 0.1
                    c2 = run(m, warm(lo, m))
                    if c2.label == SUBSONIC:
                        lo = c2
                    else:
                        hi = c2
        else:
            hi = c

    return CriticalFluxResult(
        m_hat_bracket=(lo.m, hi.m),
        margin_curve=[a.row() for a in attempts],
        epsilon_sequence=eps_seq,
        terminated_by=hi.label,
        grid=(context.L, context.nx, context.ny),
        attempts=attempts,
    )
