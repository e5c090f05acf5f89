import pytest

import oracles
from nozzleflow.critical_flux import (
    MARGIN_VIOLATED,
    NON_CONVERGED,
    SUBSONIC,
    CriticalContext,
    classify,
    find_critical,
)
from nozzleflow.errors import DomainError
from nozzleflow.farfield import mass_flux_range
from nozzleflow.gas_thermo import GasModel
from nozzleflow.geometry import TanhWalls
from nozzleflow.profiles import Profiles

G2 = GasModel(2.0)
CONST = Profiles.constant()
M_SONIC = (2.0 / 3.0) ** 1.5
# frozen from oracles.uniform_density_for_flux(0.4): rho0**3 subtracted from m**2
M_AT_04 = -0.5728474958473778
# frozen from oracles.uniform_density_for_flux(0.543)
M_AT_0543 = -0.03827661245495628


@pytest.fixture(scope="module")
def straight():
    return CriticalContext(TanhWalls.straight(), CONST, G2, 5.0, 41, 11)


class TestClassify:
    def test_oracle_values(self):
        for m, frozen in ((0.4, M_AT_04), (0.543, M_AT_0543)):
            rho0 = oracles.uniform_density_for_flux(m)
            assert m * m - rho0**3 == pytest.approx(frozen, abs=1e-14)

    def test_subsonic(self, straight):
        c = classify(0.4, straight, 1e-3)
        assert c.label == SUBSONIC
        assert abs(c.M - M_AT_04) < 1e-9
        assert c.bounds_ok and c.monotone_ok

    def test_above_sonic_bound(self, straight):
        c = classify(0.6, straight, 1e-3)
        assert c.label == NON_CONVERGED
        assert "far field" in c.cause
        assert c.field is None

    def test_near_sonic_large_margin(self, straight):
        # M(0.543) sits inside -4 eps once eps = 0.01
        c = classify(0.543, straight, 0.01)
        assert c.label == MARGIN_VIOLATED
        assert abs(c.M - M_AT_0543) < 1e-9

    def test_near_sonic_small_margin(self, straight):
        # the default upstream margin is well below |M| / 4
        c = classify(0.543, straight, 1e-3)
        assert c.label == SUBSONIC

    def test_deterministic(self, straight):
        a, b = classify(0.5, straight, 1e-3), classify(0.5, straight, 1e-3)
        assert a.row() == b.row()

    def test_rejects_nonpositive(self, straight):
        with pytest.raises(DomainError):
            classify(0.0, straight, 1e-3)


class TestFindCritical:
    @pytest.fixture(scope="class")
    @staticmethod
    def result():
        ctx = CriticalContext(TanhWalls.straight(), CONST, G2, 5.0, 41, 11)
        return find_critical(ctx, 0.3, tol_m=1e-3)

    def test_bracket_near_sonic_flux(self, result):
        lo, hi = result.m_hat_bracket
        assert lo < hi and hi - lo <= 1e-3
        assert abs(lo - M_SONIC) <= 0.02 and abs(hi - M_SONIC) <= 0.02

    def test_bracket_labels(self, result):
        labels = {a.m: a.label for a in result.attempts}
        assert labels[result.m_lo] == SUBSONIC
        assert labels[result.m_hi] != SUBSONIC
        assert result.terminated_by == labels[result.m_hi]

    def test_margin_curve_monotone(self, result):
        assert result.margin_monotone()
        assert result.margin_table() == sorted(result.margin_curve)

    def test_subsonic_attempts_pass_bounds(self, result):
        sub = [a for a in result.attempts if a.label == SUBSONIC]
        assert sub and all(a.bounds_ok and a.monotone_ok for a in sub)

    def test_epsilon_sequence_decreasing(self, result):
        eps = result.epsilon_sequence
        assert all(b < a for a, b in zip(eps, eps[1:]))

    def test_reproducible(self, result):
        ctx = CriticalContext(TanhWalls.straight(), CONST, G2, 5.0, 41, 11)
        again = find_critical(ctx, 0.3, tol_m=1e-3)
        assert again.m_hat_bracket == result.m_hat_bracket
        # repr compares NaN margins of failed attempts as equal
        assert repr(again.margin_curve) == repr(result.margin_curve)

    def test_report_dict(self, result):
        d = result.as_dict()
        assert list(d)[:3] == ["m_lo", "m_hi", "terminated_by"]
        assert d["grid"] == {"L": 5.0, "nx": 41, "ny": 11}

    def test_seed_must_be_subsonic(self, straight):
        with pytest.raises(DomainError, match="not subsonic"):
            find_critical(straight, 0.6)

    def test_widening_nozzle_keeps_upstream_bound(self):
        ctx = CriticalContext(TanhWalls(0.0, 1.2, 2.0), CONST, G2, 25.0, 101, 26)
        res = find_critical(ctx, 0.3, tol_m=1e-3)
        m_tilde = mass_flux_range(CONST, G2, 1.2).m_tilde_up
        assert abs(res.m_lo - m_tilde) <= 0.02
