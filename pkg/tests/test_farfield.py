import math

import numpy as np
import pytest
from scipy.integrate import quad

import oracles
from nozzleflow.errors import DomainError, FarFieldError
from nozzleflow.farfield import (
    exit_width,
    mass_flux_of_pressure,
    mass_flux_range,
    pressure_bracket,
    solve_downstream,
    solve_farfield,
    solve_upstream,
)
from nozzleflow.gas_thermo import GasModel
from nozzleflow.profiles import ConstantProfile, PolynomialProfile, Profiles

G2 = GasModel(2.0)
CONST = Profiles.constant()
# m = rho0 sqrt(2 (1 - rho0)) at rho0 = 0.9, kept exact rather than rounded to 8 digits
M_09 = 0.9 * math.sqrt(0.2)
M_SONIC = (2.0 / 3.0) ** 1.5


def perturbed():
    return Profiles(PolynomialProfile((1.0, 0.01, -0.01)), ConstantProfile(1.0))


class TestUpstream:
    def test_recovers_closed_form_state(self):
        up = solve_upstream(CONST, G2, M_09)
        assert abs(up.p0 - 0.405) < 1e-9
        assert abs(up.rho0(0.5) - 0.9) < 1e-9
        assert abs(up.u0(0.5) - math.sqrt(0.2)) < 1e-9

    def test_small_flux_approaches_stagnation(self):
        up = solve_upstream(CONST, G2, 1e-4)
        assert up.p0 == pytest.approx(0.5, abs=1e-8)

    def test_above_sonic_bound(self):
        with pytest.raises(FarFieldError, match="mass flux above sonic bound"):
            solve_upstream(CONST, G2, 0.6)
        with pytest.raises(FarFieldError):
            solve_upstream(CONST, G2, M_SONIC * (1.0 + 1e-9))

    def test_nonpositive_flux(self):
        with pytest.raises(DomainError):
            solve_upstream(CONST, G2, 0.0)

    def test_stream_value_constant_profiles(self):
        up = solve_upstream(CONST, G2, 0.3)
        x = np.linspace(0.0, 1.0, 17)
        assert np.max(np.abs(up.psi_bar(x) - 0.3 * x)) < 1e-12

    def test_stream_value_against_quadrature(self):
        prof = perturbed()
        up = solve_upstream(prof, G2, 0.3)
        S = lambda t: 1.0 + 0.01 * t * (1.0 - t)
        B = lambda t: 1.0
        for x in (0.0, 0.13, 0.5, 0.77, 1.0):
            ref = oracles.upstream_stream_value(x, up.p0, S, B, 2.0)
            assert abs(up.psi_bar(x) - ref) < 1e-10
        assert up.psi_bar(0.0) == 0.0
        assert abs(up.psi_bar(1.0) - 0.3) < 1e-10
        assert np.all(np.diff(up.psi_bar(np.linspace(0, 1, 200))) > 0)

    def test_kappa_inverts_stream_value(self):
        prof = perturbed()
        up = solve_upstream(prof, G2, 0.3)
        S = lambda t: 1.0 + 0.01 * t * (1.0 - t)
        for psi in (0.05, 0.15, 0.29):
            ref = oracles.upstream_height(psi, up.p0, S, lambda t: 1.0, 2.0)
            assert abs(up.kappa(psi) - ref) < 1e-10

    def test_pressure_in_bracket_and_positive_speed(self):
        prof = perturbed()
        lo, hi = pressure_bracket(prof, G2)
        for m in (0.05, 0.3, 0.5):
            up = solve_upstream(prof, G2, m)
            assert lo < up.p0 < hi
            assert np.all(up.u0(up.x2) > 0)


class TestMassFluxOfPressure:
    def test_closed_forms(self):
        assert mass_flux_of_pressure(CONST, G2, 0.405) == pytest.approx(M_09, abs=1e-12)
        assert mass_flux_of_pressure(CONST, G2, 2.0 / 9.0) == pytest.approx(M_SONIC, abs=1e-12)
        assert mass_flux_of_pressure(CONST, G2, 0.5) == pytest.approx(0.0, abs=1e-12)

    def test_strictly_decreasing(self):
        for prof in (CONST, perturbed()):
            lo, hi = pressure_bracket(prof, G2)
            p = np.linspace(lo, hi, 52)[1:-1]
            m = [mass_flux_of_pressure(prof, G2, pk) for pk in p]
            assert np.all(np.diff(m) < 0)

    def test_outside_bracket(self):
        with pytest.raises(DomainError):
            mass_flux_of_pressure(CONST, G2, 0.6)


class TestDownstream:
    def test_equal_width_reproduces_upstream(self):
        ff = solve_farfield(CONST, G2, M_09, 0.0, 1.0)
        d = ff.downstream
        assert abs(d.p1 - ff.upstream.p0) < 1e-10
        s = np.linspace(0.0, 1.0, 11)
        assert np.max(np.abs(d.y_map(s) - s)) < 1e-10
        assert np.max(np.abs(d.u1(s) - math.sqrt(0.2))) < 1e-9

    def test_wider_exit_raises_pressure(self):
        ff = solve_farfield(CONST, G2, M_09, 0.0, 1.2)
        assert ff.downstream.p1 > 0.405
        assert abs(ff.downstream.y[-1] - 1.2) <= 1e-8 * 1.2
        assert ff.downstream.y[0] == 0.0

    def test_narrower_exit_lowers_pressure(self):
        ff = solve_farfield(CONST, G2, M_09, 0.0, 0.9)
        assert ff.downstream.p1 < 0.405

    def test_offset_exit(self):
        ff = solve_farfield(perturbed(), G2, 0.3, -0.2, 1.1)
        y = ff.downstream.y_map(np.array([0.0, 1.0]))
        assert abs(y[0] + 0.2) < 1e-14
        assert abs(y[1] - 1.1) <= 1e-8 * 1.3

    def test_too_narrow(self):
        up = solve_upstream(CONST, G2, 0.5)
        with pytest.raises(FarFieldError, match="width outside admissible range"):
            solve_downstream(up, CONST, G2, 0.8)

    def test_width_integral_increasing_in_pressure(self):
        prof = perturbed()
        up = solve_upstream(prof, G2, 0.3)
        lo, hi = pressure_bracket(prof, G2)
        p = np.linspace(lo, hi, 52)[1:-1]
        w = [exit_width(up, pk) for pk in p]
        assert np.all(np.diff(w) > 0)

    @pytest.fixture(scope="class")
    @staticmethod
    def perturbed_ff():
        return solve_farfield(perturbed(), G2, 0.3, 0.0, 1.2)

    def test_bernoulli_consistency(self, perturbed_ff):
        up, d = perturbed_ff.upstream, perturbed_ff.downstream
        s = np.linspace(0.0, 1.0, 101)
        S = perturbed().S(s)
        lhs = S * up.rho0(s) + 0.5 * up.u0(s) ** 2
        y = d.y_map(s)
        rhs = S * d.rho1(y) + 0.5 * d.u1(y) ** 2
        assert np.max(np.abs(lhs - rhs)) < 1e-8

    def test_mass_conservation_along_map(self, perturbed_ff):
        up, d = perturbed_ff.upstream, perturbed_ff.downstream
        S = lambda t: 1.0 + 0.01 * t * (1.0 - t)
        for s in (0.1, 0.4, 0.8, 1.0):
            inflow = oracles.upstream_stream_value(s, up.p0, S, lambda t: 1.0, 2.0)
            y_end = float(d.y_map(s))
            outflow = quad(lambda y: float(d.rho1(y) * d.u1(y)), 0.0, y_end, epsabs=1e-13, limit=200)[0]
            assert abs(inflow - outflow) < 1e-8

    def test_both_states_subsonic(self):
        prof = perturbed()
        rng = mass_flux_range(prof, G2, 1.2)
        for m in np.linspace(0.05, rng.m_bar * (1 - 1e-3), 6):
            ff = solve_farfield(prof, G2, m, 0.0, 1.2)
            up, d = ff.upstream, ff.downstream
            S = prof.S(up.x2)
            assert np.all(up.u0(up.x2) ** 2 < G2.sound_speed_sq(up.rho0(up.x2), S))
            y = d.y_map(up.x2)
            assert np.all(d.u1(y) ** 2 < G2.sound_speed_sq(d.rho1(y), S))
            lo, hi = pressure_bracket(prof, G2)
            assert lo < up.p0 < hi and lo < d.p1 < hi


class TestMassFluxRange:
    def test_unit_width_is_sonic(self):
        rng = mass_flux_range(CONST, G2, 1.0)
        assert rng.m_tilde_up == pytest.approx(M_SONIC, abs=1e-9)
        assert rng.m_bar == pytest.approx(M_SONIC, abs=1e-6)
        assert 0.0 < rng.m_bar <= rng.m_tilde_up

    def test_expansion_keeps_upstream_bound(self):
        rng = mass_flux_range(CONST, G2, 1.5)
        assert abs(rng.m_bar - rng.m_tilde_up) <= 1e-6

    def test_contraction_lowers_bound(self):
        rng = mass_flux_range(CONST, G2, 0.9)
        assert 0.0 < rng.m_bar < rng.m_tilde_up
        # a uniform stream of width 0.9 chokes at 0.9 times the sonic flux
        assert rng.m_bar == pytest.approx(0.9 * M_SONIC, rel=1e-5)

    def test_advisory_lower_bound(self):
        assert mass_flux_range(CONST, G2, 1.0).lower == 0.0
        rng = mass_flux_range(perturbed(), G2, 1.0)
        assert rng.lower == pytest.approx(rng.delta**0.25)
