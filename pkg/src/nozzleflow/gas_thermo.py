"""Polytropic gas closures in the nondimensional variables of the solver.

Every relation is written in terms of the entropy value ``S`` and the
Bernoulli value ``B`` carried by a streamline, with

    p = (gamma - 1) / gamma * S * rho**gamma,
    c**2 = (gamma - 1) * S * rho**(gamma - 1),

so that ``B = q**2 / 2 + S * rho**(gamma - 1)`` along the streamline.
All functions accept scalars or numpy arrays.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SupersonicStateError
from .rootfind import bracketed_newton

SONIC_SNAP = 1e-12


def _require(cond, message):
    if not np.all(cond):
        raise DomainError(message)


def _out(x):
    # 0-d results come back as plain floats
    x = np.asarray(x, dtype=float)
    return float(x) if x.ndim == 0 else x


@dataclass(frozen=True)
class ThermoPoint:
    rho: float
    p: float
    c2: float
    chi: float


@dataclass(frozen=True)
class GasModel:
    """Polytropic gas with adiabatic exponent ``gamma > 1``."""

    gamma: float = 1.4

    def __post_init__(self):
        if not (np.isfinite(self.gamma) and self.gamma > 1.0):
            raise DomainError(f"adiabatic exponent must satisfy gamma > 1, got {self.gamma}")

    # -- pressures at fixed Bernoulli/entropy ratio -------------------------

    def max_pressure(self, s):
        """Stagnation pressure for the ratio ``s = B / S**(1/gamma)``."""
        s = np.asarray(s, dtype=float)
        _require(s >= 0.0, "Bernoulli-entropy ratio must be non-negative")
        g = self.gamma
        return _out((g - 1.0) / g * s ** (g / (g - 1.0)))

    def critical_pressure(self, s):
        """Sonic pressure for the ratio ``s``."""
        s = np.asarray(s, dtype=float)
        _require(s >= 0.0, "Bernoulli-entropy ratio must be non-negative")
        g = self.gamma
        return _out((g - 1.0) / g * (2.0 * s / (g + 1.0)) ** (g / (g - 1.0)))

    def critical_speed_sq(self, s, S):
        """Squared sound speed at the critical pressure on a streamline with entropy ``S``."""
        S = np.asarray(S, dtype=float)
        _require(S > 0.0, "entropy value must be positive")
        rho_star = self.density_from_pressure(self.critical_pressure(s), S)
        return self.sound_speed_sq(rho_star, S)

    def delta_underline(self, D_min):
        """Increment ``d`` with ``critical_pressure(D_min + d) == max_pressure(D_min)``.

        Equating the two power laws gives ``2 (D + d) / (gamma + 1) = D``.
        """
        D_min = np.asarray(D_min, dtype=float)
        _require(D_min > 0.0, "ratio infimum must be positive")
        return _out(0.5 * (self.gamma - 1.0) * D_min)

    # -- pointwise state relations -----------------------------------------

    def density_from_pressure(self, p, S):
        p = np.asarray(p, dtype=float)
        S = np.asarray(S, dtype=float)
        _require(S > 0.0, "entropy value must be positive")
        _require(p >= 0.0, "pressure must be non-negative")
        g = self.gamma
        return _out((g * p / ((g - 1.0) * S)) ** (1.0 / g))

    def pressure_from_density(self, rho, S):
        g = self.gamma
        return _out((g - 1.0) / g * np.asarray(S, dtype=float) * np.asarray(rho, dtype=float) ** g)

    def sound_speed_sq(self, rho, S):
        g = self.gamma
        return _out((g - 1.0) * np.asarray(S, dtype=float) * np.asarray(rho, dtype=float) ** (g - 1.0))

    def stagnation_density(self, S, B):
        """Density at zero speed, ``(B / S)**(1 / (gamma - 1))``."""
        S = np.asarray(S, dtype=float)
        B = np.asarray(B, dtype=float)
        return _out((B / S) ** (1.0 / (self.gamma - 1.0)))

    def sonic_density(self, S, B):
        S = np.asarray(S, dtype=float)
        B = np.asarray(B, dtype=float)
        _require(S > 0.0, "entropy value must be positive")
        _require(B >= 0.0, "Bernoulli value must be non-negative")
        g = self.gamma
        return _out((2.0 * B / ((g + 1.0) * S)) ** (1.0 / (g - 1.0)))

    def sonic_chi(self, S, B):
        """Largest kinetic term ``|grad psi|**2 / 2`` admitting a subsonic density."""
        rho_star = np.asarray(self.sonic_density(S, B))
        g = self.gamma
        return _out((g - 1.0) / (g + 1.0) * np.asarray(B, dtype=float) * rho_star**2)

    def thermo_point(self, rho, S, chi=0.0):
        p = self.pressure_from_density(rho, S)
        return ThermoPoint(rho=rho, p=p, c2=self.gamma * p / rho if rho > 0 else 0.0, chi=chi)

    def subsonic_density(self, chi, S, B):
        """Solve ``chi = B rho**2 - S rho**(gamma + 1)`` on the subsonic branch.

        Raises
        ------
        SupersonicStateError
            If ``chi`` exceeds :meth:`sonic_chi` by more than the snapping
            tolerance.
        """
        chi, S, B = np.broadcast_arrays(
            np.asarray(chi, dtype=float), np.asarray(S, dtype=float), np.asarray(B, dtype=float)
        )
        _require(S > 0.0, "entropy value must be positive")
        _require(B > 0.0, "Bernoulli value must be positive")
        _require(chi >= 0.0, "kinetic term must be non-negative")
        g = self.gamma
        rho_star = np.asarray(self.sonic_density(S, B))
        rho_max = np.asarray(self.stagnation_density(S, B))
        chi_star = np.asarray(self.sonic_chi(S, B))
        snap = SONIC_SNAP * np.maximum(chi_star, 1.0)
        bad = chi > chi_star + snap
        if bad.any():
            idx = np.argwhere(bad)
            raise SupersonicStateError(
                f"supersonic kinetic term at {len(idx)} point(s); max excess "
                f"{float(np.max((chi - chi_star)[bad])):.3e}",
                nodes=idx,
            )
        at_sonic = chi >= chi_star - snap

        def f(r):
            return B * r * r - S * r ** (g + 1.0) - chi

        def df(r):
            return 2.0 * B * r - (g + 1.0) * S * r**g

        # f(rho_star) >= 0 >= f(rho_max); start from the stagnation end where f' is large
        rho = bracketed_newton(f, df, rho_star, rho_max, x0=rho_max, xtol=1e-14 * rho_max)
        rho = np.where(at_sonic, rho_star, rho)
        return _out(rho)
