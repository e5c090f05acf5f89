"""Nozzle walls, the wall-flattening map and the truncated computational grid.

The map ``t1 = x1``, ``t2 = (x2 - f1(x1)) / (f2(x1) - f1(x1))`` sends the
nozzle onto the strip ``R x [0, 1]``. The elliptic operator is discretized
in ``(t1, t2)`` using the metric returned by :func:`metric`.
"""

import csv
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import DomainError


class NozzleWalls:
    """Lower wall ``f1`` and upper wall ``f2`` with first and second derivatives."""

    a = 0.0
    b = 1.0

    def wall(self, i, x1):
        raise NotImplementedError

    def height(self, x1):
        f1, d1, dd1 = self.wall(1, x1)
        f2, d2, dd2 = self.wall(2, x1)
        return f2 - f1, d2 - d1, dd2 - dd1


@dataclass(frozen=True)
class TanhWalls(NozzleWalls):
    """``f_i = c_minus + (c_plus - c_minus) * (1 + tanh(x1 / ell)) / 2``.

    Upstream asymptotes are 0 and 1, downstream asymptotes ``a`` and ``b``.
    """

    a: float = 0.0
    b: float = 1.0
    ell: float = 1.0

    def __post_init__(self):
        if not self.b > self.a:
            raise DomainError(f"walls need b > a, got a={self.a}, b={self.b}")
        if not self.ell > 0.0:
            raise DomainError("transition length ell must be positive")
        # f2 - f1 is a convex combination of 1 and b - a, hence positive

    @classmethod
    def straight(cls):
        return cls(0.0, 1.0, 1.0)

    def wall(self, i, x1):
        lo, hi = (0.0, self.a) if i == 1 else (1.0, self.b)
        th = np.tanh(np.asarray(x1, dtype=float) / self.ell)
        sech2 = 1.0 - th * th
        gap = hi - lo
        return (
            lo + gap * 0.5 * (1.0 + th),
            gap * 0.5 * sech2 / self.ell,
            -gap * th * sech2 / self.ell**2,
        )


class TabulatedWalls(NozzleWalls):
    """Cubic-spline walls through sampled ``(x1, f1, f2)``, constant beyond the table."""

    def __init__(self, x1, f1, f2):
        x1 = np.asarray(x1, float)
        f1 = np.asarray(f1, float)
        f2 = np.asarray(f2, float)
        if np.any(np.diff(x1) <= 0):
            raise DomainError("wall abscissae must be strictly increasing")
        if np.any(f2 <= f1):
            raise DomainError("tabulated walls violate f2 > f1")
        self.x_lo, self.x_hi = x1[0], x1[-1]
        self.a, self.b = float(f1[-1]), float(f2[-1])
        if abs(f1[0]) > 1e-12 or abs(f2[0] - 1.0) > 1e-12:
            raise DomainError("tabulated walls must start at the upstream section [0, 1]")
        self._splines = {1: CubicSpline(x1, f1, bc_type="clamped"), 2: CubicSpline(x1, f2, bc_type="clamped")}

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        data = np.array([[float(v) for v in row[:3]] for row in rows[1:] if row], dtype=float)
        return cls(data[:, 0], data[:, 1], data[:, 2])

    def wall(self, i, x1):
        x = np.asarray(x1, float)
        xc = np.clip(x, self.x_lo, self.x_hi)
        sp = self._splines[i]
        inside = (x >= self.x_lo) & (x <= self.x_hi)
        return sp(xc), np.where(inside, sp(xc, 1), 0.0), np.where(inside, sp(xc, 2), 0.0)


def wall_eval(walls, i, x1):
    if i not in (1, 2):
        raise DomainError("wall index must be 1 or 2")
    return walls.wall(i, x1)


def flatten(walls, x1, x2):
    """Physical ``(x1, x2)`` to flattened ``(t1, t2)``."""
    x1 = np.asarray(x1, float)
    x2 = np.asarray(x2, float)
    f1 = walls.wall(1, x1)[0]
    f2 = walls.wall(2, x1)[0]
    tol = 1e-12 * np.maximum(1.0, np.abs(f2))
    if np.any(x2 < f1 - tol) or np.any(x2 > f2 + tol):
        raise DomainError("point lies outside the nozzle walls")
    return x1, (x2 - f1) / (f2 - f1)


def unflatten(walls, t1, t2):
    t1 = np.asarray(t1, float)
    f1 = walls.wall(1, t1)[0]
    h = walls.height(t1)[0]
    return t1, f1 + np.asarray(t2, float) * h


def dt2_dx1(walls, t1, t2):
    """``d t2 / d x1`` at fixed ``x2``: ``-(f1' + t2 (f2' - f1')) / (f2 - f1)``."""
    h, dh, _ = walls.height(t1)
    df1 = walls.wall(1, t1)[1]
    return -(df1 + np.asarray(t2, float) * dh) / h


def gradient_transform(walls, t1, t2, dpsi_dt1, dpsi_dt2):
    """Chain rule from flattened to physical derivatives; returns ``(psi_x1, psi_x2)``."""
    h = walls.height(t1)[0]
    tau = dt2_dx1(walls, t1, t2)
    return dpsi_dt1 + dpsi_dt2 * tau, dpsi_dt2 / h


def metric(walls, t1, t2):
    """Coefficients of the divergence operator in flattened coordinates.

    For ``div_x(K grad_x psi)`` multiplied by the Jacobian ``h = f2 - f1``
    the flattened form is ``d_a(K G_ab d_b psi)`` with
    ``G = h * [[1, tau], [tau, tau**2 + 1/h**2]]`` (``det G = 1``).
    Returns ``(G11, G12, G22, h)``.
    """
    h = walls.height(t1)[0]
    tau = dt2_dx1(walls, t1, t2)
    return h, h * tau, h * tau * tau + 1.0 / h, h


@dataclass(frozen=True, eq=False)
class FlattenedDomain:
    """Uniform tensor grid on ``[-L, L] x [0, 1]``; arrays are indexed ``[i1, i2]``."""

    walls: NozzleWalls
    L: float
    nx: int
    ny: int

    @cached_property
    def t1(self):
        return np.linspace(-self.L, self.L, self.nx)

    @cached_property
    def t2(self):
        return np.linspace(0.0, 1.0, self.ny)

    @property
    def h1(self):
        return 2.0 * self.L / (self.nx - 1)

    @property
    def h2(self):
        return 1.0 / (self.ny - 1)

    @property
    def shape(self):
        return (self.nx, self.ny)

    @cached_property
    def nodes(self):
        return np.meshgrid(self.t1, self.t2, indexing="ij")

    @cached_property
    def physical_nodes(self):
        T1, T2 = self.nodes
        return unflatten(self.walls, T1, T2)

    @cached_property
    def node_height(self):
        return self.walls.height(self.t1)[0]

    @cached_property
    def node_tau(self):
        T1, T2 = self.nodes
        return dt2_dx1(self.walls, T1, T2)

    @cached_property
    def cell_centers(self):
        c1 = 0.5 * (self.t1[1:] + self.t1[:-1])
        c2 = 0.5 * (self.t2[1:] + self.t2[:-1])
        return np.meshgrid(c1, c2, indexing="ij")

    @cached_property
    def cell_metric(self):
        C1, C2 = self.cell_centers
        return metric(self.walls, C1, C2)

    def boundary_mask(self):
        mask = np.zeros(self.shape, dtype=bool)
        mask[0, :] = mask[-1, :] = True
        mask[:, 0] = mask[:, -1] = True
        return mask

    def gradient(self, psi):
        """Physical gradient at nodes: centered inside, second-order one-sided at edges."""
        d1, d2 = np.gradient(psi, self.h1, self.h2, edge_order=2)
        T1, T2 = self.nodes
        return gradient_transform(self.walls, T1, T2, d1, d2)


def truncate(walls, L, nx, ny):
    """Build the truncated flattened grid, checking wall separation at every node."""
    if not L > 0.0:
        raise DomainError("truncation half-length must be positive")
    if nx < 3 or ny < 3:
        raise DomainError("grid needs at least 3 nodes per direction")
    dom = FlattenedDomain(walls, float(L), int(nx), int(ny))
    if np.any(dom.node_height <= 0.0):
        raise DomainError("walls touch or cross inside the truncated domain")
    return dom


def default_length(ell):
    return 10.0 * ell + 5.0
