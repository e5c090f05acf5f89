"""Picard iteration for the cut-off stream-function equation on the flattened grid.

The operator ``div(grad psi / rho)`` is discretized through its energy
``1/2 * sum_cells K (G grad_t psi) . grad_t psi * h1 * h2`` with the cell
coefficient ``K = 1 / rho`` frozen at the previous iterate and the metric
``G`` from :func:`nozzleflow.geometry.metric`. This gives a symmetric
9-point stencil whose rows sum to zero, so linear fields are reproduced
exactly and conjugate gradients apply after Dirichlet elimination.
"""

import logging
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
from scipy.optimize import root

from .errors import AssemblyError, ConvergenceError, DomainError, LinearSolveError
from .krylov import pcg
from .profiles import CutOff, truncated_density

log = logging.getLogger(__name__)

FACE_MODES = ("farfield", "wallformula")
MIN_RELAXATION = 1.0 / 64.0


@dataclass(frozen=True)
class SolverConfig:
    """Picard and inner-solve controls.

    ``epsilon=None`` selects the upstream default margin.
    """

    epsilon: float | None = None
    tol_update: float = 1e-9
    tol_residual: float = 1e-8
    max_picard: int = 200
    relaxation: float = 0.7
    linear_tol: float = 1e-12
    linear_max_iter: int = 20000
    face_bc_mode: str = "farfield"

    def __post_init__(self):
        errs = self.violations()
        if errs:
            raise DomainError("; ".join(errs))

    def violations(self):
        errs = []
        if self.epsilon is not None and not self.epsilon > 0.0:
            errs.append("epsilon must be positive")
        for name in ("tol_update", "tol_residual", "linear_tol"):
            if not getattr(self, name) > 0.0:
                errs.append(f"{name} must be positive")
        if not 0.0 < self.relaxation <= 1.0:
            errs.append("relaxation must lie in (0, 1]")
        if self.max_picard < 1 or self.linear_max_iter < 1:
            errs.append("iteration caps must be at least 1")
        if self.face_bc_mode not in FACE_MODES:
            errs.append(f"face_bc_mode must be one of {FACE_MODES}")
        return errs


@dataclass
class StreamField:
    values: np.ndarray
    grid: object
    m: float
    converged: bool = False
    iterations: int = 0
    final_residual: float = float("nan")
    cutoff_active: bool = False
    cutoff_cells: int = 0
    epsilon: float = float("nan")
    history: list = field(default_factory=list)


@dataclass
class LinearSystem:
    """Frozen-coefficient system with Dirichlet rows eliminated.

    ``matrix`` acts on interior unknowns; ``full`` is the assembled matrix on
    all nodes and ``source`` the lumped right-hand side, so the discrete
    equation reads ``full @ psi + source = 0`` on interior rows.
    """

    matrix: sp.csr_matrix
    rhs: np.ndarray
    full: sp.csr_matrix
    source: np.ndarray
    interior: np.ndarray
    boundary_values: np.ndarray
    margin: np.ndarray
    rho: np.ndarray

    def residual(self, psi):
        r = self.full @ psi.ravel() + self.source
        return r[self.interior]

    def scatter(self, x_interior):
        out = self.boundary_values.copy()
        out[self.interior] = x_interior
        return out


def initial_guess(domain, m, kind="linear"):
    """``m * t2`` (``kind='linear'``) or ``m * t2**2 * (3 - 2 t2)`` (``'cubic'``)."""
    T2 = domain.nodes[1]
    if kind == "linear":
        vals = m * T2
    elif kind == "cubic":
        vals = m * T2 * T2 * (3.0 - 2.0 * T2)
    else:
        raise DomainError(f"unknown initial guess {kind!r}")
    return StreamField(values=np.array(vals, dtype=float), grid=domain, m=float(m))


def discrete_asymptote(psi_bar, height, extended, cutoff, gas, m, tol=1e-14):
    """Stream values of the t1-independent discrete state on a straight section.

    Restricting the 9-point scheme to fields that do not vary along ``t1``
    in a channel of constant ``height`` ``H`` leaves the three-point problem

        (d_{j+1/2} / rho_{j+1/2} - d_{j-1/2} / rho_{j-1/2}) = H h2 (F_{j+1/2} + F_{j-1/2}) / 2

    with cell slopes ``d = (psi_{j+1} - psi_j) / (H h2)``, solved by a
    Powell hybrid Newton iteration started from the continuous values
    ``psi_bar`` (sampled on the uniform ``t2`` nodes, ends 0 and ``m``).
    """
    psi = np.array(psi_bar, dtype=float)
    psi[0], psi[-1] = 0.0, m
    n = psi.size
    h2 = 1.0 / (n - 1)
    H = float(height)
    g = gas.gamma

    def residual(inner):
        full = np.concatenate(([0.0], inner, [m]))
        d = np.diff(full) / (h2 * H)
        pc = 0.5 * (full[1:] + full[:-1])
        rho = truncated_density(d * d, pc, extended, cutoff, g)
        _, dS, _, dB = extended.evaluate(pc)
        F = dB * rho - dS * rho**g / g
        flux = d / rho
        return (flux[1:] - flux[:-1]) - H * h2 * 0.5 * (F[:-1] + F[1:])

    x0 = psi[1:-1]
    if np.max(np.abs(residual(x0))) <= tol * max(m, 1.0):
        return psi
    sol = root(residual, x0, method="hybr", tol=tol * m)
    if not sol.success and np.max(np.abs(residual(sol.x))) > 1e-10 * m:
        raise ConvergenceError(f"asymptotic column did not converge: {sol.message}", last=sol.x)
    psi[1:-1] = sol.x
    return psi


def farfield_columns(domain, farfield_states, m, epsilon=None):
    """Discrete upstream and downstream face columns on the grid's ``t2`` nodes."""
    up = farfield_states.upstream
    down = farfield_states.downstream
    if down is None:
        raise DomainError("farfield face data need solved far-field states")
    eps = epsilon if epsilon is not None else up.default_epsilon()
    ext = up.extended_profiles()
    cut = CutOff(eps)
    t2 = domain.t2
    col_up = discrete_asymptote(up.psi_bar(t2), 1.0, ext, cut, up.gas, m)
    col_down = discrete_asymptote(down.psi_bar(down.a + t2 * down.width), down.width, ext, cut, up.gas, m)
    return col_up, col_down


def boundary_data(domain, farfield_states, m, mode="farfield", epsilon=None):
    """Dirichlet values on the rim of the grid; interior entries are NaN.

    Walls carry 0 and ``m``. In ``farfield`` mode each face carries the
    discrete asymptotic state of its limiting section (the continuous
    stream values up to the scheme's second-order error); in
    ``wallformula`` mode the faces carry ``m * t2``.
    """
    if mode not in FACE_MODES:
        raise DomainError(f"unknown face mode {mode!r}")
    g = np.full(domain.shape, np.nan)
    if mode == "wallformula":
        g[0, :] = g[-1, :] = m * domain.t2
    else:
        if farfield_states is None:
            raise DomainError("farfield face data need solved far-field states")
        g[0, :], g[-1, :] = farfield_columns(domain, farfield_states, m, epsilon)
    g[:, 0] = 0.0
    g[:, -1] = m
    return g


def _cell_gradient(domain, psi):
    h1, h2 = domain.h1, domain.h2
    p00, p10, p01, p11 = psi[:-1, :-1], psi[1:, :-1], psi[:-1, 1:], psi[1:, 1:]
    d1 = (p10 + p11 - p00 - p01) / (2.0 * h1)
    d2 = (p01 + p11 - p00 - p10) / (2.0 * h2)
    return 0.25 * (p00 + p10 + p01 + p11), d1, d2


def cell_state(domain, psi, extended, cutoff, gamma):
    """Truncated density, subsonic margin and source at cell centres."""
    psi_c, d1, d2 = _cell_gradient(domain, psi)
    G11, G12, G22, h = domain.cell_metric
    tau = G12 / G11
    px1 = d1 + tau * d2
    px2 = d2 / h
    q = px1 * px1 + px2 * px2
    rho, margin = truncated_density(q, psi_c, extended, cutoff, gamma, return_margin=True)
    _, dS, _, dB = extended.evaluate(psi_c)
    src = dB * rho - dS * rho**gamma / gamma
    return psi_c, rho, margin, src


def _local_index(domain):
    nx, ny = domain.shape
    idx = np.arange(nx * ny).reshape(nx, ny)
    return np.stack([idx[:-1, :-1], idx[1:, :-1], idx[:-1, 1:], idx[1:, 1:]], axis=-1).reshape(-1, 4)


def _add_edge(Kloc, p, q, w):
    Kloc[:, p, p] += w
    Kloc[:, q, q] += w
    Kloc[:, p, q] -= w
    Kloc[:, q, p] -= w


def local_matrices(domain, K):
    """Cell stiffness blocks for coefficient ``K`` per cell, node order (00, 10, 01, 11).

    Where the cell aspect ratio dominates the metric skew the mixed term is
    carried by a diagonal difference, which keeps every off-diagonal entry
    non-positive; otherwise the centred cross form is used.
    """
    h1, h2 = domain.h1, domain.h2
    G11, G12, G22, _ = domain.cell_metric
    a = (0.5 * K * G11 * h2 / h1).ravel()
    b = (0.5 * K * G22 * h1 / h2).ravel()
    c = (K * G12).ravel()
    half = 0.5 * np.abs(c)
    positive = (a >= half) & (b >= half)
    ncell = a.size
    Kloc = np.zeros((ncell, 4, 4))
    ea = np.where(positive, a - half, a)
    eb = np.where(positive, b - half, b)
    _add_edge(Kloc, 0, 1, ea)
    _add_edge(Kloc, 2, 3, ea)
    _add_edge(Kloc, 0, 2, eb)
    _add_edge(Kloc, 1, 3, eb)
    _add_edge(Kloc, 0, 3, np.where(positive & (c > 0.0), c, 0.0))
    _add_edge(Kloc, 1, 2, np.where(positive & (c < 0.0), -c, 0.0))
    cross = np.where(positive, 0.0, c)
    H = np.array([[0.5, 0, 0, -0.5], [0, -0.5, 0.5, 0], [0, 0.5, -0.5, 0], [-0.5, 0, 0, 0.5]])
    Kloc += cross[:, None, None] * H
    return Kloc


def assemble(psi_k, domain, extended, cutoff, gas, boundary=None):
    """Frozen-coefficient system at ``psi_k``.

    ``boundary`` holds the Dirichlet data on the rim (NaN inside); it
    defaults to the rim of ``psi_k``.
    """
    psi = np.asarray(psi_k, dtype=float)
    if psi.shape != domain.shape:
        raise AssemblyError(f"field shape {psi.shape} does not match grid {domain.shape}")
    if not np.all(np.isfinite(psi)):
        bad = np.argwhere(~np.isfinite(psi))
        raise AssemblyError(f"non-finite stream value at node {tuple(int(v) for v in bad[0])}")
    _, rho, margin, src = cell_state(domain, psi, extended, cutoff, gas.gamma)
    K = 1.0 / rho
    h = domain.cell_metric[3]
    lumped = src * h * domain.h1 * domain.h2 / 4.0
    for name, arr in (("coefficient", K), ("source", lumped)):
        if not np.all(np.isfinite(arr)):
            i, j = (int(v) for v in np.argwhere(~np.isfinite(arr))[0])
            raise AssemblyError(f"non-finite {name} in cell ({i}, {j})")

    n = psi.size
    loc = _local_index(domain)
    Kloc = local_matrices(domain, K)
    rows = np.repeat(loc, 4, axis=1).ravel()
    cols = np.tile(loc, (1, 4)).ravel()
    full = sp.csr_matrix((Kloc.ravel(), (rows, cols)), shape=(n, n))
    source = np.bincount(loc.ravel(), weights=np.repeat(lumped.ravel(), 4), minlength=n)

    mask = domain.boundary_mask().ravel()
    if boundary is None:
        bvals = np.where(mask, psi.ravel(), 0.0)
    else:
        bvals = np.where(mask, np.asarray(boundary, float).ravel(), 0.0)
    interior = ~mask
    A_II = full[interior][:, interior].tocsr()
    A_IB = full[interior][:, mask]
    rhs = -source[interior] - A_IB @ bvals[mask]
    return LinearSystem(
        matrix=A_II, rhs=rhs, full=full, source=source, interior=interior,
        boundary_values=bvals, margin=margin, rho=rho,
    )


def linear_solve(system, config, x0=None):
    """Solve the eliminated system by Jacobi-preconditioned CG.

    Returns ``(field_values, cg_result)``; ``x0`` is a full-grid warm start.
    """
    start = None if x0 is None else np.asarray(x0, float).ravel()[system.interior]
    res = pcg(system.matrix, system.rhs, x0=start, rtol=config.linear_tol, maxiter=config.linear_max_iter)
    return system.scatter(res.x), res


def _scaled_residual(system, psi_flat, m):
    """Interior residual in max norm, scaled by the largest diagonal entry and ``m``."""
    r = system.full @ psi_flat + system.source
    scale = system.matrix.diagonal().max() * m
    return float(np.max(np.abs(r[system.interior]))) / scale


def solve(domain, profiles, farfield_states, gas, m, config=None, initial=None):
    """Picard iteration for the cut-off problem.

    Parameters
    ----------
    domain : FlattenedDomain
    profiles : Profiles
        Upstream entropy and Bernoulli data (carried through the far-field
        states; kept in the signature for symmetry with the CLI).
    farfield_states : FarFieldStates
        Provides the stream-function extension of the profiles and, in
        ``farfield`` mode, the face data.
    initial : StreamField, ndarray or str, optional
        Starting field, or ``'linear'`` / ``'cubic'``.

    Raises
    ------
    ConvergenceError
        When ``max_picard`` is reached; ``last`` is the final field.
    """
    config = config or SolverConfig()
    up = farfield_states.upstream
    if profiles is not None and profiles is not up.profiles:
        raise DomainError("far-field states were solved for different profiles")
    eps = config.epsilon if config.epsilon is not None else up.default_epsilon()
    cutoff = CutOff(eps)
    ext = up.extended_profiles()
    g = boundary_data(domain, farfield_states, m, config.face_bc_mode, eps)
    mask = domain.boundary_mask()

    if initial is None or isinstance(initial, str):
        psi = initial_guess(domain, m, initial or "linear").values
    else:
        psi = np.array(getattr(initial, "values", initial), dtype=float)
        if psi.shape != domain.shape:
            raise DomainError("initial field does not match the grid")
    psi = np.where(mask, g, psi)

    history = []
    omega = config.relaxation
    prev_step = np.inf
    for k in range(1, config.max_picard + 1):
        system = assemble(psi, domain, ext, cutoff, gas, boundary=g)
        res = _scaled_residual(system, psi.ravel(), m)
        try:
            target, cg = linear_solve(system, config, x0=psi)
        except LinearSolveError as exc:
            history.append({"iteration": k, "update": float("nan"), "residual": res,
                            "cutoff_cells": int(np.sum(system.margin > -2.0 * eps)), "ritz_min": float("nan")})
            raise ConvergenceError(f"inner solve failed at Picard step {k}: {exc}", history=history,
                                   last=_field(domain, m, psi, False, k, res, system, eps, history)) from exc
        target = target.reshape(domain.shape)
        step = float(np.max(np.abs(target - psi)))
        if step > prev_step and omega > MIN_RELAXATION:
            # frozen-coefficient steps amplify once the local Mach number is high
            omega = max(0.5 * omega, MIN_RELAXATION)
            log.debug("picard %d: step grew, relaxation lowered to %.4g", k, omega)
        prev_step = step
        new = (1.0 - omega) * psi + omega * target
        new[mask] = g[mask]
        update = float(np.max(np.abs(new - psi)))
        active = int(np.sum(system.margin > -2.0 * eps))
        history.append({"iteration": k, "update": update, "residual": res,
                        "cutoff_cells": active, "ritz_min": cg.ritz_min, "cg_iterations": cg.iterations,
                        "relaxation": omega})
        log.debug("picard %d update %.3e residual %.3e cutoff cells %d", k, update, res, active)
        psi = new
        if update <= config.tol_update * m and res <= config.tol_residual:
            final = assemble(psi, domain, ext, cutoff, gas, boundary=g)
            res_final = _scaled_residual(final, psi.ravel(), m)
            return _field(domain, m, psi, True, k, res_final, final, eps, history)

    last = _field(domain, m, psi, False, config.max_picard, history[-1]["residual"], system, eps, history)
    raise ConvergenceError(
        f"Picard iteration did not converge in {config.max_picard} steps "
        f"(last update {history[-1]['update']:.3e}, residual {history[-1]['residual']:.3e})",
        history=history, last=last,
    )


def _field(domain, m, psi, converged, k, res, system, eps, history):
    active = int(np.sum(system.margin > -2.0 * eps))
    return StreamField(
        values=psi, grid=domain, m=float(m), converged=converged, iterations=k,
        final_residual=float(res), cutoff_active=active > 0, cutoff_cells=active,
        epsilon=float(eps), history=list(history),
    )


def scaled_initial(previous, m):
    """Warm start for a new mass flux: the previous field rescaled by ``m / m_prev``."""
    return replace(previous, values=previous.values * (m / previous.m), m=float(m), converged=False)
