"""Physical reconstruction of a computed stream function and discrete checks of its properties."""

import json
from dataclasses import dataclass, field

import numpy as np

from .elliptic_solver import farfield_columns
from .profiles import kappa_compose


@dataclass(frozen=True, eq=False)
class FlowField:
    rho: np.ndarray
    u: np.ndarray
    v: np.ndarray
    p: np.ndarray
    mach: np.ndarray
    c2: np.ndarray
    S: np.ndarray
    B: np.ndarray
    psi_x1: np.ndarray
    psi_x2: np.ndarray
    gamma: float
    m: float


def reconstruct_flow(stream_field, profiles, upstream, gas):
    """Density, velocity, pressure and Mach number at every grid node.

    The density is the subsonic root of ``B rho**2 - S rho**(g+1) = |grad psi|**2 / 2``
    with ``(S, B)`` carried from upstream along the level set of ``psi``.

    Raises
    ------
    SupersonicStateError
        If some node admits no subsonic density; ``nodes`` lists them.
    """
    dom = stream_field.grid
    psi = stream_field.values
    px1, px2 = dom.gradient(psi)
    S, B, _, _ = kappa_compose(upstream, profiles, psi)
    chi = 0.5 * (px1 * px1 + px2 * px2)
    rho = gas.subsonic_density(chi, S, B)
    u = px2 / rho
    v = -px1 / rho
    p = gas.pressure_from_density(rho, S)
    c2 = gas.gamma * p / rho
    mach = np.sqrt(u * u + v * v) / np.sqrt(c2)
    return FlowField(rho=rho, u=u, v=v, p=p, mach=mach, c2=c2, S=S, B=B, psi_x1=px1, psi_x2=px2,
                     gamma=gas.gamma, m=stream_field.m)


def subsonic_margin(stream_field, flow, profiles=None):
    """``max(|grad psi|**2 - (g - 1) S rho**(g + 1))`` over the grid; negative iff subsonic."""
    g = flow.gamma
    q = flow.psi_x1**2 + flow.psi_x2**2
    return float(np.max(q - (g - 1.0) * flow.S * flow.rho ** (g + 1.0)))


@dataclass(frozen=True)
class BoundsCheck:
    bounds_ok: bool
    monotone_ok: bool
    min_value: float
    min_node: tuple
    max_value: float
    max_node: tuple
    min_slope: float
    min_slope_node: tuple
    n_nonmonotone: int


def check_bounds_and_monotonicity(stream_field, tol=1e-8):
    """Check ``0 <= psi <= m`` (to ``tol * m``) and ``d psi / d t2 > 0`` at interior nodes."""
    psi = stream_field.values
    m = stream_field.m
    imin = np.unravel_index(np.argmin(psi), psi.shape)
    imax = np.unravel_index(np.argmax(psi), psi.shape)
    slope = (psi[1:-1, 2:] - psi[1:-1, :-2]) / (2.0 * stream_field.grid.h2)
    js = np.unravel_index(np.argmin(slope), slope.shape)
    return BoundsCheck(
        bounds_ok=bool(psi[imin] >= -tol * m and psi[imax] <= m * (1.0 + tol)),
        monotone_ok=bool(np.all(slope > 0.0)),
        min_value=float(psi[imin]), min_node=tuple(int(i) for i in imin),
        max_value=float(psi[imax]), max_node=tuple(int(i) for i in imax),
        min_slope=float(slope[js]), min_slope_node=(int(js[0]) + 1, int(js[1]) + 1),
        n_nonmonotone=int(np.sum(slope <= 0.0)),
    )


@dataclass(frozen=True)
class SectionFluxes:
    t1: np.ndarray
    flux: np.ndarray
    rel_dev: np.ndarray

    @property
    def max_dev(self):
        return float(np.max(self.rel_dev))


def mass_flux_sections(flow, domain, n_sections=11):
    """Trapezoidal ``int rho u dx2`` on equispaced vertical sections, faces included."""
    cols = np.unique(np.round(np.linspace(0, domain.nx - 1, n_sections)).astype(int))
    h = domain.node_height[cols]
    flux = np.trapezoid((flow.rho * flow.u)[cols, :], x=domain.t2, axis=1) * h
    return SectionFluxes(t1=domain.t1[cols], flux=flux, rel_dev=np.abs(flux - flow.m) / flow.m)


def streamline_invariants(flow, stream_field, profiles, upstream):
    """Largest relative deviations of entropy and Bernoulli values from their upstream data.

    The entropy check is an identity of the reconstruction; it guards the
    bookkeeping. The Bernoulli check compares the kinetic plus enthalpy
    sum against the transported value.
    """
    g = flow.gamma
    S, B, _, _ = kappa_compose(upstream, profiles, stream_field.values)
    ent = g * flow.p / ((g - 1.0) * flow.rho**g)
    ber = 0.5 * (flow.u**2 + flow.v**2) + g * flow.p / ((g - 1.0) * flow.rho)
    return {
        "entropy_drift": float(np.max(np.abs(ent - S) / S)),
        "bernoulli_drift": float(np.max(np.abs(ber - B) / B)),
    }


def _physical_derivatives(domain, F):
    d1, d2 = np.gradient(F, domain.h1, domain.h2)
    return d1 + domain.node_tau * d2, d2 / domain.node_height[:, None]


def euler_residual_fields(flow, domain):
    """Pointwise residuals of mass, two momentum and energy balances on the interior."""
    rho, u, v, p = flow.rho, flow.u, flow.v, flow.p
    g = flow.gamma
    H = 0.5 * (u * u + v * v) + g * p / ((g - 1.0) * rho)
    pairs = {
        "mass": (rho * u, rho * v),
        "mom1": (rho * u * u + p, rho * u * v),
        "mom2": (rho * u * v, rho * v * v + p),
        "energy": (rho * u * H, rho * v * H),
    }
    out = {}
    for name, (F1, F2) in pairs.items():
        dF1 = _physical_derivatives(domain, F1)[0]
        dF2 = _physical_derivatives(domain, F2)[1]
        # one-node halo excluded: its differences lean on one-sided gradients
        out[name] = (dF1 + dF2)[2:-2, 2:-2]
    return out


def euler_residuals(flow, domain):
    """Max-norm and RMS residual of each conservation law."""
    fields = euler_residual_fields(flow, domain)
    return {
        name: {"max": float(np.max(np.abs(r))), "l2": float(np.sqrt(np.mean(r * r)))}
        for name, r in fields.items()
    }


def farfield_gap(stream_field, farfield_states, band=0.2):
    """Distance between ``psi`` and the asymptotic stream values near the truncation faces.

    Columns with ``t1 < 0`` are compared with the upstream state and the
    rest with the downstream state, each taken as the t1-independent
    discrete solution on its limiting section so that the measured gap is
    the truncation effect alone. ``asymptote_error`` is the distance of
    those discrete states from the continuous stream values on the same
    ``t2`` nodes. Returns the face gap, the maximum over the bands
    ``|t1| >= (1 - band) L`` and the column-wise profile.
    """
    dom = stream_field.grid
    psi = stream_field.values
    m = stream_field.m
    eps = stream_field.epsilon if np.isfinite(stream_field.epsilon) else None
    col_up, col_down = farfield_columns(dom, farfield_states, m, eps)
    t2 = dom.t2
    down = farfield_states.downstream
    cont_up = farfield_states.upstream.psi_bar(t2)
    cont_down = down.psi_bar(down.a + t2 * down.width)
    ref = np.where((dom.t1 < 0.0)[:, None], col_up[None, :], col_down[None, :])
    profile = np.max(np.abs(psi - ref), axis=1)
    in_band = np.abs(dom.t1) >= (1.0 - band) * dom.L
    return {
        "face": float(max(profile[0], profile[-1])),
        "band": float(np.max(profile[in_band])),
        "profile": profile,
        "asymptote_error": float(max(np.max(np.abs(col_up - cont_up)[1:-1]),
                                     np.max(np.abs(col_down - cont_down)[1:-1]))),
    }


@dataclass
class DiagnosticsReport:
    M_margin: float
    bounds_ok: bool
    monotone_ok: bool
    mass_flux_errors: np.ndarray
    bernoulli_drift: float
    entropy_drift: float
    euler_residual_norms: dict
    farfield_face_gap: float
    farfield_band_gap: float
    details: dict = field(default_factory=dict)

    @property
    def mass_flux_max_dev(self):
        return float(np.max(self.mass_flux_errors))

    def as_dict(self):
        return {
            "M_margin": float(self.M_margin),
            "bounds_ok": bool(self.bounds_ok),
            "monotone_ok": bool(self.monotone_ok),
            "mass_flux_max_dev": self.mass_flux_max_dev,
            "bernoulli_drift": float(self.bernoulli_drift),
            "euler_residuals": {k: float(self.euler_residual_norms[k]["max"])
                                for k in ("mass", "mom1", "mom2", "energy")},
            "farfield_gap": float(self.farfield_band_gap),
        }

    def to_json(self):
        return json.dumps(self.as_dict(), indent=2)


def diagnose(stream_field, farfield_states, profiles, gas, n_sections=11, tol_bounds=1e-8):
    """Run every check and collect the results."""
    up = farfield_states.upstream
    flow = reconstruct_flow(stream_field, profiles, up, gas)
    bc = check_bounds_and_monotonicity(stream_field, tol=tol_bounds)
    sections = mass_flux_sections(flow, stream_field.grid, n_sections)
    inv = streamline_invariants(flow, stream_field, profiles, up)
    gap = farfield_gap(stream_field, farfield_states)
    return DiagnosticsReport(
        M_margin=subsonic_margin(stream_field, flow),
        bounds_ok=bc.bounds_ok,
        monotone_ok=bc.monotone_ok,
        mass_flux_errors=sections.rel_dev,
        bernoulli_drift=inv["bernoulli_drift"],
        entropy_drift=inv["entropy_drift"],
        euler_residual_norms=euler_residuals(flow, stream_field.grid),
        farfield_face_gap=gap["face"],
        farfield_band_gap=gap["band"],
        details={"flow": flow, "bounds": bc, "sections": sections, "gap_profile": gap["profile"]},
    )
