"""Asymptotic upstream and downstream states of the nozzle flow.

Far upstream the flow is horizontal in the strip ``0 < x2 < 1`` with a
constant pressure ``p0`` fixed by the mass flux. Far downstream it is
horizontal in ``a < x2 < b`` with pressure ``p1`` fixed by the exit width;
streamlines are matched across the nozzle by ``y(s)``, the exit height of
the streamline entering at height ``s``.
"""

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.integrate import cumulative_simpson, simpson
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from .errors import DomainError, FarFieldError
from .profiles import constant_extension, extend_profiles

log = logging.getLogger(__name__)

N_QUAD = 2001
BRACKET_SHRINK = 1e-12
BETA = 0.25


def _grid():
    return np.linspace(0.0, 1.0, N_QUAD)


def pressure_bracket(profiles, gas):
    """Open interval of subsonic, non-stagnant far-field pressures."""
    D_min, D_max = profiles.D_bounds(gas.gamma)
    return gas.critical_pressure(D_max), gas.max_pressure(D_min)


def _flux_density(profiles, gas, p, x2):
    S = profiles.S(x2)
    rho = gas.density_from_pressure(p, S)
    u2 = 2.0 * (profiles.B(x2) - S * rho ** (gas.gamma - 1.0))
    return rho, np.sqrt(np.maximum(u2, 0.0))


def mass_flux_of_pressure(profiles, gas, p):
    """Upstream mass flux carried by a horizontal section at pressure ``p``."""
    lo, hi = pressure_bracket(profiles, gas)
    slack = 1e-12 * hi
    if not (lo - slack <= p <= hi + slack):
        raise DomainError(f"pressure {p!r} outside the subsonic bracket [{lo!r}, {hi!r}]")
    x = _grid()
    rho, u = _flux_density(profiles, gas, p, x)
    return float(simpson(rho * u, x=x))


@dataclass(frozen=True, eq=False)
class UpstreamState:
    gas: object
    profiles: object
    m: float
    p0: float

    @cached_property
    def x2(self):
        return _grid()

    @cached_property
    def flux(self):
        rho, u = _flux_density(self.profiles, self.gas, self.p0, self.x2)
        return rho * u

    @cached_property
    def psi_table(self):
        return cumulative_simpson(self.flux, x=self.x2, initial=0.0)

    def rho0(self, x2):
        return self.gas.density_from_pressure(self.p0, self.profiles.S(np.asarray(x2, float)))

    def u0(self, x2):
        return _flux_density(self.profiles, self.gas, self.p0, np.asarray(x2, float))[1]

    @cached_property
    def _psi_spline(self):
        return CubicHermiteSpline(self.x2, self.psi_table, self.flux)

    @cached_property
    def _kappa_spline(self):
        return CubicHermiteSpline(self.psi_table, self.x2, 1.0 / self.flux)

    def psi_bar(self, x2):
        """Stream value of the upstream streamline at height ``x2``."""
        return self._psi_spline(np.clip(np.asarray(x2, float), 0.0, 1.0))

    def kappa(self, psi):
        """Upstream height of the streamline with stream value ``psi``."""
        psi = np.clip(np.asarray(psi, float), 0.0, self.psi_table[-1])
        return np.clip(self._kappa_spline(psi), 0.0, 1.0)

    def kappa_prime(self, psi):
        k = self.kappa(psi)
        rho, u = _flux_density(self.profiles, self.gas, self.p0, k)
        return 1.0 / (rho * u)

    def min_density(self):
        return float(np.min(self.rho0(self.x2)))

    def default_epsilon(self):
        """Cut-off margin: 1e-3 of the smallest upstream ``(g-1) S rho**(g+1)``."""
        g = self.gas.gamma
        S = self.profiles.S(self.x2)
        rho = self.rho0(self.x2)
        return 1e-3 * float(np.min((g - 1.0) * S * rho ** (g + 1.0)))

    @cached_property
    def _extension(self):
        prof = self.profiles
        if prof.is_constant:
            return constant_extension(float(prof.S(0.0)), float(prof.B(0.0)), self.m, self.gas.gamma)

        def S_psi(s):
            return prof.S(self.kappa(s))

        def dS_psi(s):
            return prof.S.derivative(self.kappa(s)) * self.kappa_prime(s)

        def B_psi(s):
            return prof.B(self.kappa(s))

        def dB_psi(s):
            return prof.B.derivative(self.kappa(s)) * self.kappa_prime(s)

        return extend_profiles(S_psi, dS_psi, B_psi, dB_psi, self.m, self.gas.gamma)

    def extended_profiles(self):
        return self._extension


def solve_upstream(profiles, gas, m):
    """Pressure and velocity profile of the far-upstream state carrying mass flux ``m``."""
    if not m > 0.0:
        raise DomainError("mass flux must be positive")
    lo, hi = pressure_bracket(profiles, gas)
    lo *= 1.0 + BRACKET_SHRINK
    hi *= 1.0 - BRACKET_SHRINK
    m_sonic = mass_flux_of_pressure(profiles, gas, lo)
    if m >= m_sonic:
        raise FarFieldError(f"mass flux above sonic bound: m={m!r} >= {m_sonic!r}")
    m_stag = mass_flux_of_pressure(profiles, gas, hi)
    if m <= m_stag:
        raise FarFieldError(f"mass flux {m!r} below the near-stagnation flux {m_stag!r}")
    p0 = brentq(
        lambda p: mass_flux_of_pressure(profiles, gas, p) - m, lo, hi, xtol=1e-16, rtol=4 * np.finfo(float).eps
    )
    return UpstreamState(gas=gas, profiles=profiles, m=float(m), p0=float(p0))


def _width_integrand(upstream, p1, s):
    gas, prof = upstream.gas, upstream.profiles
    g = gas.gamma
    S = prof.S(s)
    rho0 = gas.density_from_pressure(upstream.p0, S)
    u0 = _flux_density(prof, gas, upstream.p0, s)[1]
    rho1 = gas.density_from_pressure(p1, S)
    u1_sq = 2.0 * S * (rho0 ** (g - 1.0) - rho1 ** (g - 1.0)) + u0 * u0
    u1 = np.sqrt(np.maximum(u1_sq, 0.0))
    with np.errstate(divide="ignore"):
        dyds = rho0 * u0 / (rho1 * u1)
    return dyds, rho1, u1


def exit_width(upstream, p1):
    """Exit width swept by all streamlines when the downstream pressure is ``p1``."""
    s = _grid()
    dyds = _width_integrand(upstream, p1, s)[0]
    return float(simpson(dyds, x=s))


@dataclass(frozen=True, eq=False)
class DownstreamState:
    upstream: UpstreamState
    p1: float
    a: float
    width: float
    s: np.ndarray
    y: np.ndarray
    dyds: np.ndarray
    rho1_s: np.ndarray
    u1_s: np.ndarray

    @property
    def b(self):
        return self.a + self.width

    @cached_property
    def _y_spline(self):
        return CubicHermiteSpline(self.s, self.y, self.dyds)

    @cached_property
    def _s_spline(self):
        return CubicHermiteSpline(self.y, self.s, 1.0 / self.dyds)

    def y_map(self, s):
        return self._y_spline(np.asarray(s, float))

    def s_of_y(self, y):
        return np.clip(self._s_spline(np.clip(np.asarray(y, float), self.y[0], self.y[-1])), 0.0, 1.0)

    def rho1(self, y):
        s = self.s_of_y(y)
        return self.upstream.gas.density_from_pressure(self.p1, self.upstream.profiles.S(s))

    def u1(self, y):
        return _width_integrand(self.upstream, self.p1, self.s_of_y(y))[2]

    def psi_bar(self, y):
        """Stream value of the downstream streamline at height ``y``."""
        return self.upstream.psi_bar(self.s_of_y(y))


def solve_downstream(upstream, profiles, gas, width, a=0.0):
    """Downstream pressure and streamline map for an exit section of the given width."""
    if not width > 0.0:
        raise DomainError("exit width must be positive")
    if profiles is not upstream.profiles or gas is not upstream.gas:
        raise DomainError("upstream state was solved for a different gas or profiles")
    lo, hi = pressure_bracket(profiles, gas)
    lo *= 1.0 + BRACKET_SHRINK
    hi *= 1.0 - BRACKET_SHRINK
    w_lo, w_hi = exit_width(upstream, lo), exit_width(upstream, hi)
    if not (w_lo < width < w_hi):
        raise FarFieldError(
            f"width outside admissible range for this m: {width!r} not in ({w_lo!r}, {w_hi!r})"
        )
    p1 = brentq(
        lambda p: exit_width(upstream, p) - width, lo, hi, xtol=1e-16, rtol=4 * np.finfo(float).eps
    )
    s = _grid()
    dyds, rho1, u1 = _width_integrand(upstream, p1, s)
    y = a + cumulative_simpson(dyds, x=s, initial=0.0)
    return DownstreamState(
        upstream=upstream, p1=float(p1), a=float(a), width=float(width),
        s=s, y=y, dyds=dyds, rho1_s=rho1, u1_s=u1,
    )


@dataclass(frozen=True, eq=False)
class FarFieldStates:
    upstream: UpstreamState
    downstream: DownstreamState

    @property
    def m(self):
        return self.upstream.m


def solve_farfield(profiles, gas, m, a=0.0, b=1.0):
    up = solve_upstream(profiles, gas, m)
    return FarFieldStates(up, solve_downstream(up, profiles, gas, b - a, a))


@dataclass(frozen=True)
class MassFluxRange:
    m_tilde_up: float
    m_bar: float
    beta: float = BETA
    delta: float = 0.0

    @property
    def lower(self):
        return self.delta**self.beta if self.delta > 0.0 else 0.0


def mass_flux_range(profiles, gas, width, tol=1e-6):
    """Upper mass-flux bounds from the upstream sonic limit and joint far-field solvability."""
    lo_p = pressure_bracket(profiles, gas)[0] * (1.0 + BRACKET_SHRINK)
    m_tilde = mass_flux_of_pressure(profiles, gas, lo_p)

    def solvable(m):
        try:
            up = solve_upstream(profiles, gas, m)
            solve_downstream(up, profiles, gas, width)
        except FarFieldError:
            return False
        return True

    lo, hi = 0.0, m_tilde
    if solvable(m_tilde * (1.0 - 1e-9)):
        lo = hi = m_tilde
    while hi - lo > tol * m_tilde:
        mid = 0.5 * (lo + hi)
        if solvable(mid):
            lo = mid
        else:
            hi = mid
    rng = MassFluxRange(m_tilde_up=m_tilde, m_bar=lo, delta=profiles.oscillation_delta())
    log.info("mass flux range: m_tilde=%.10g m_bar=%.10g advisory lower bound %.4g",
             m_tilde, lo, rng.lower)
    return rng
