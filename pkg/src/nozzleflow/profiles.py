"""Upstream entropy/Bernoulli data and their stream-function extensions.

``Profiles`` holds ``S(x2)`` and ``B(x2)`` on the upstream section
``[0, 1]``. Once the upstream state is known, the data are transported to
stream-function values through ``kappa`` (the upstream height of the
streamline carrying ``psi``) and extended to the whole real line with
linear derivative tapers on ``[-m, 0]`` and ``[m, 2m]``.
"""

import csv
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Polynomial
from scipy.interpolate import PchipInterpolator

from .errors import DomainError
from .rootfind import bracketed_newton

# -- single-variable profile representations -----------------------------------


class Profile:
    """A C^1 function on ``[0, 1]`` with an analytic or interpolated derivative."""

    constant = False

    def __call__(self, x):
        raise NotImplementedError

    def derivative(self, x):
        raise NotImplementedError


@dataclass(frozen=True)
class ConstantProfile(Profile):
    value: float
    constant = True

    def __call__(self, x):
        return np.full_like(np.asarray(x, dtype=float), self.value)

    def derivative(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class PolynomialProfile(Profile):
    """Power-series profile ``sum(coeffs[k] * x**k)``."""

    coeffs: tuple

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))

    def __call__(self, x):
        return Polynomial(self.coeffs)(np.asarray(x, dtype=float))

    def derivative(self, x):
        return Polynomial(self.coeffs).deriv()(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class SineProfile(Profile):
    """``base + amplitude * sin(k * pi * x)``."""

    base: float
    amplitude: float
    k: float = 1.0

    def __call__(self, x):
        return self.base + self.amplitude * np.sin(self.k * np.pi * np.asarray(x, dtype=float))

    def derivative(self, x):
        w = self.k * np.pi
        return self.amplitude * w * np.cos(w * np.asarray(x, dtype=float))


class TabulatedProfile(Profile):
    """Monotone cubic (PCHIP) interpolant of sampled values on ``[0, 1]``."""

    def __init__(self, x, values):
        x = np.asarray(x, dtype=float)
        values = np.asarray(values, dtype=float)
        if x.ndim != 1 or x.shape != values.shape or x.size < 2:
            raise DomainError("tabulated profile needs matching 1-D sample arrays")
        if np.any(np.diff(x) <= 0):
            raise DomainError("tabulated profile abscissae must be strictly increasing")
        if x[0] > 0.0 or x[-1] < 1.0:
            raise DomainError("tabulated profile must cover [0, 1]")
        self.x = x
        self.values = values
        self._interp = PchipInterpolator(x, values)
        self._deriv = self._interp.derivative()

    @classmethod
    def from_csv(cls, path):
        """Load a two-column ``x2,value`` CSV with a header row."""
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        data = np.array([[float(v) for v in row[:2]] for row in rows[1:] if row], dtype=float)
        return cls(data[:, 0], data[:, 1])

    def __call__(self, x):
        return self._interp(np.asarray(x, dtype=float))

    def derivative(self, x):
        return self._deriv(np.asarray(x, dtype=float))


# -- upstream data --------------------------------------------------------------


@dataclass(frozen=True)
class AdmissibilityReport:
    S_min: float
    B_min: float
    delta: float
    positivity_ok: bool
    # derivative of S * B**(-gamma) at the walls, the quantity gated below
    SBg_prime_0: float
    SBg_prime_1: float
    # derivative of S**(-gamma) * B, reported for comparison only
    SgB_prime_0: float
    SgB_prime_1: float
    endpoint_ok: bool

    @property
    def ok(self):
        return self.positivity_ok and self.endpoint_ok


@dataclass(frozen=True)
class Profiles:
    """Upstream entropy ``S(x2)`` and Bernoulli ``B(x2)`` on ``[0, 1]``."""

    S: Profile
    B: Profile
    n_samples: int = 1001

    @classmethod
    def constant(cls, S=1.0, B=1.0):
        return cls(ConstantProfile(S), ConstantProfile(B))

    @property
    def is_constant(self):
        return self.S.constant and self.B.constant

    def _grid(self):
        return np.linspace(0.0, 1.0, self.n_samples)

    def bounds(self):
        x = self._grid()
        return float(np.min(self.S(x))), float(np.min(self.B(x)))

    def oscillation_delta(self):
        """Discrete C^{1,1} size of ``(S - inf S, B - inf B)`` on the sample grid.

        The Lipschitz constant of the derivative is measured by centered
        second differences of the values.
        """
        x = self._grid()
        h = x[1] - x[0]
        parts = []
        for prof in (self.S, self.B):
            v = prof(x)
            parts.append(np.max(v - v.min()))
            parts.append(np.max(np.abs(prof.derivative(x))))
            parts.append(np.max(np.abs(v[2:] - 2.0 * v[1:-1] + v[:-2])) / h**2)
        return float(max(parts))

    def ratio_D(self, gamma, x2):
        """``D = B * S**(-1/gamma)`` at ``x2``."""
        x2 = np.asarray(x2, dtype=float)
        d = self.B(x2) * self.S(x2) ** (-1.0 / gamma)
        return float(d) if d.ndim == 0 else d

    def D_bounds(self, gamma):
        d = self.ratio_D(gamma, self._grid())
        return float(d.min()), float(d.max())

    def check_admissibility(self, gamma):
        """Positivity of the data and the endpoint sign conditions on ``S B**(-gamma)``."""
        S_min, B_min = self.bounds()
        ends = np.array([0.0, 1.0])
        S, B = self.S(ends), self.B(ends)
        dS, dB = self.S.derivative(ends), self.B.derivative(ends)
        sbg = dS * B**-gamma - gamma * S * B ** (-gamma - 1.0) * dB
        sgb = dB * S**-gamma - gamma * B * S ** (-gamma - 1.0) * dS
        return AdmissibilityReport(
            S_min=S_min,
            B_min=B_min,
            delta=self.oscillation_delta(),
            positivity_ok=bool(S_min > 0.0 and B_min > 0.0),
            SBg_prime_0=float(sbg[0]),
            SBg_prime_1=float(sbg[1]),
            SgB_prime_0=float(sgb[0]),
            SgB_prime_1=float(sgb[1]),
            endpoint_ok=bool(sbg[0] >= 0.0 and sbg[1] <= 0.0),
        )


# -- extension to the real line ---------------------------------------------------


def _taper(value_fn, deriv_fn, s, m):
    """Extend ``value_fn`` beyond ``[0, m]`` with a derivative decaying linearly to zero.

    Returns ``(value, derivative)`` on ``s``. Inside ``[0, m]`` the original
    functions are used unchanged.
    """
    s = np.asarray(s, dtype=float)
    inside = np.clip(s, 0.0, m)
    val = np.asarray(value_fn(inside), dtype=float).copy()
    der = np.asarray(deriv_fn(inside), dtype=float).copy()

    hi = s > m
    if hi.any():
        t = np.minimum(s[hi], 2.0 * m)
        d_m = float(deriv_fn(np.array(m)))
        val[hi] = float(value_fn(np.array(m))) + d_m * (t - m) * (3.0 * m - t) / (2.0 * m)
        der[hi] = d_m * (2.0 * m - t) / m
    lo = s < 0.0
    if lo.any():
        t = np.maximum(s[lo], -m)
        d_0 = float(deriv_fn(np.array(0.0)))
        val[lo] = float(value_fn(np.array(0.0))) + d_0 * (0.5 * t * t + m * t) / m
        der[lo] = d_0 * (t + m) / m
    return val, der


@dataclass(frozen=True)
class ExtendedProfiles:
    """C^{1,1} extensions of the stream-function entropy and Bernoulli data.

    The entropy is extended directly; the Bernoulli value is rebuilt from
    the extended entropy and the extended ratio ``B / S**gamma`` so that
    ``d/ds (B_ext / S_ext**gamma)`` follows the same linear taper.
    """

    S_psi: object
    dS_psi: object
    B_psi: object
    dB_psi: object
    m: float
    gamma: float
    constant: bool = False
    _const: tuple = field(default=(1.0, 1.0), repr=False)

    def _ratio(self, s):
        S, B = self.S_psi(s), self.B_psi(s)
        return B / S**self.gamma

    def _dratio(self, s):
        g = self.gamma
        S, B = self.S_psi(s), self.B_psi(s)
        return (self.dB_psi(s) * S - g * B * self.dS_psi(s)) / S ** (g + 1.0)

    def a_coeff(self, s):
        return _taper(self.S_psi, self.dS_psi, s, self.m)[1]

    def b_coeff(self, s):
        return _taper(self._ratio, self._dratio, s, self.m)[1]

    def evaluate(self, s):
        """Return ``(S_ext, dS_ext, B_ext, dB_ext)`` at stream values ``s``."""
        s = np.asarray(s, dtype=float)
        if self.constant:
            S0, B0 = self._const
            z = np.zeros_like(s)
            return z + S0, z, z + B0, z.copy()
        S, dS = _taper(self.S_psi, self.dS_psi, s, self.m)
        R, dR = _taper(self._ratio, self._dratio, s, self.m)
        g = self.gamma
        Sg = S**g
        return S, dS, Sg * R, g * S ** (g - 1.0) * dS * R + Sg * dR

    def S_ext(self, s):
        return self.evaluate(s)[0]

    def B_ext(self, s):
        return self.evaluate(s)[2]


def extend_profiles(S_psi, dS_psi, B_psi, dB_psi, m, gamma):
    """Build :class:`ExtendedProfiles` from stream-function data on ``[0, m]``."""
    if not m > 0.0:
        raise DomainError("mass flux must be positive to extend the profiles")
    return ExtendedProfiles(S_psi, dS_psi, B_psi, dB_psi, float(m), float(gamma))


def constant_extension(S, B, m, gamma):
    """Extension of constant data: constant everywhere with zero derivatives."""
    S, B = float(S), float(B)
    return ExtendedProfiles(
        lambda s: np.full_like(np.asarray(s, float), S),
        lambda s: np.zeros_like(np.asarray(s, float)),
        lambda s: np.full_like(np.asarray(s, float), B),
        lambda s: np.zeros_like(np.asarray(s, float)),
        float(m),
        float(gamma),
        constant=True,
        _const=(S, B),
    )


def kappa_compose(upstream, profiles, psi):
    """Entropy and Bernoulli values carried by the streamline ``psi``.

    Returns ``(S, B, dS/dpsi, dB/dpsi)``. Values outside ``[0, m]`` come from
    the tapered extension rather than raising.
    """
    if upstream.profiles is not profiles:
        raise DomainError("upstream state was solved for different profiles")
    S, dS, B, dB = upstream.extended_profiles().evaluate(psi)
    return S, B, dS, dB


# -- elliptic cut-off and truncated density ----------------------------------------


@dataclass(frozen=True)
class CutOff:
    """Monotone cap ``zeta0`` of the subsonic margin at ``-3/2 * epsilon``.

    Identity below ``-2 epsilon``, constant above ``-epsilon``, and on the
    bridge a quartic with matching value, slope and zero curvature at both
    ends: with ``u = (s + 2 eps) / eps``, ``zeta0 = eps * (-2 + u - u**3 + u**4 / 2)``
    whose slope ``(1 - u)**2 (1 + 2u)`` stays in ``[0, 1]``.
    """

    epsilon: float

    def __post_init__(self):
        if not self.epsilon > 0.0:
            raise DomainError("cut-off margin epsilon must be positive")

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        e = self.epsilon
        u = np.clip((s + 2.0 * e) / e, 0.0, 1.0)
        bridge = e * (-2.0 + u - u**3 + 0.5 * u**4)
        out = np.where(s < -2.0 * e, s, np.where(s >= -e, -1.5 * e, bridge))
        return float(out) if out.ndim == 0 else out

    def derivative(self, s):
        s = np.asarray(s, dtype=float)
        e = self.epsilon
        u = np.clip((s + 2.0 * e) / e, 0.0, 1.0)
        out = np.where(s < -2.0 * e, 1.0, (1.0 - u) ** 2 * (1.0 + 2.0 * u))
        return float(out) if out.ndim == 0 else out


def cutoff_zeta(s, epsilon):
    return CutOff(epsilon)(s)


def truncated_density(grad_psi_sq, psi, extended, cutoff, gamma, return_margin=False):
    """Density of the cut-off equation.

    Solves ``B rho**2 - S rho**(g+1) = (zeta0(q - c) + c) / 2`` with
    ``q = |grad psi|**2``, ``c = (g - 1) S rho**(g + 1)`` and ``(S, B)`` the
    extended data at ``psi``, on the branch above the sonic density.
    Where the margin ``q - c`` is below ``-2 epsilon`` this is the plain
    subsonic density.

    With ``return_margin`` the margin ``q - c`` at the solution is returned
    as a second array.
    """
    q = np.asarray(grad_psi_sq, dtype=float)
    psi = np.asarray(psi, dtype=float)
    q, psi = np.broadcast_arrays(q, psi)
    S, _, B, _ = extended.evaluate(psi)
    g = float(gamma)

    def parts(r):
        c = (g - 1.0) * S * r ** (g + 1.0)
        return c, q - c

    def f(r):
        c, marg = parts(r)
        return B * r * r - S * r ** (g + 1.0) - 0.5 * (cutoff(marg) + c)

    def df(r):
        c, marg = parts(r)
        dc = (g * g - 1.0) * S * r**g
        return 2.0 * B * r - (g + 1.0) * S * r**g - 0.5 * (1.0 - cutoff.derivative(marg)) * dc

    rho_star = (2.0 * B / ((g + 1.0) * S)) ** (1.0 / (g - 1.0))
    hi = (B / S) ** (1.0 / (g - 1.0))
    for _ in range(60):
        grow = f(hi) > 0.0
        if not grow.any():
            break
        hi = np.where(grow, 1.5 * hi, hi)
    rho = bracketed_newton(f, df, rho_star, hi, x0=hi, xtol=1e-14 * hi)
    if return_margin:
        return rho, parts(rho)[1]
    return rho
