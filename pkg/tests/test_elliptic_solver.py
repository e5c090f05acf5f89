import numpy as np
import pytest
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from nozzleflow.elliptic_solver import (
    SolverConfig,
    assemble,
    boundary_data,
    discrete_asymptote,
    initial_guess,
    linear_solve,
    scaled_initial,
    solve,
)
from nozzleflow.errors import AssemblyError, ConvergenceError, DomainError, LinearSolveError
from nozzleflow.farfield import solve_farfield
from nozzleflow.gas_thermo import GasModel
from nozzleflow.geometry import TanhWalls, truncate
from nozzleflow.krylov import pcg
from nozzleflow.profiles import ConstantProfile, CutOff, PolynomialProfile, Profiles, constant_extension

G2 = GasModel(2.0)
CONST = Profiles.constant()
STRAIGHT = TanhWalls.straight()
NOZZLE = TanhWalls(0.0, 1.2, 2.0)


def perturbed():
    return Profiles(PolynomialProfile((1.0, 0.01, -0.01)), ConstantProfile(1.0))


@pytest.fixture(scope="module")
def nozzle_run():
    ff = solve_farfield(CONST, G2, 0.3, 0.0, 1.2)
    dom = truncate(NOZZLE, 25.0, 101, 26)
    return dom, ff, solve(dom, CONST, ff, G2, 0.3)


class TestSolverConfig:
    def test_defaults(self):
        c = SolverConfig()
        assert (c.tol_update, c.tol_residual, c.max_picard, c.relaxation) == (1e-9, 1e-8, 200, 0.7)
        assert c.face_bc_mode == "farfield"

    @pytest.mark.parametrize("kw", [{"tol_update": 0.0}, {"relaxation": 1.5}, {"relaxation": 0.0},
                                    {"epsilon": -1.0}, {"face_bc_mode": "periodic"}, {"max_picard": 0}])
    def test_rejects_invalid(self, kw):
        with pytest.raises(DomainError):
            SolverConfig(**kw)


class TestInitialGuess:
    def test_linear(self):
        dom = truncate(NOZZLE, 5.0, 11, 11)
        sf = initial_guess(dom, 1.0)
        assert sf.values[4, 3] == pytest.approx(0.3, abs=1e-15)
        assert np.all(sf.values[:, 0] == 0.0) and np.all(sf.values[:, -1] == 1.0)

    def test_cubic(self):
        dom = truncate(NOZZLE, 5.0, 11, 11)
        sf = initial_guess(dom, 2.0, "cubic")
        assert sf.values[0, 5] == pytest.approx(2.0 * 0.25 * 2.0, abs=1e-15)
        assert np.all(sf.values[:, -1] == 2.0)

    def test_unknown(self):
        with pytest.raises(DomainError):
            initial_guess(truncate(NOZZLE, 5.0, 5, 5), 1.0, "quadratic")


class TestBoundaryData:
    def test_constant_profiles_modes_coincide(self):
        ff = solve_farfield(CONST, G2, 0.3, 0.0, 1.2)
        dom = truncate(NOZZLE, 10.0, 21, 11)
        a = boundary_data(dom, ff, 0.3, "farfield")
        b = boundary_data(dom, ff, 0.3, "wallformula")
        rim = dom.boundary_mask()
        assert np.max(np.abs(a[rim] - b[rim])) < 1e-12
        assert np.all(np.isnan(a[~rim]))
        assert a[0, 0] == 0.0 and a[-1, 0] == 0.0 and a[0, -1] == 0.3 and a[-1, -1] == 0.3

    def test_varying_entropy_modes_differ(self):
        prof = perturbed()
        ff = solve_farfield(prof, G2, 0.3, 0.0, 1.2)
        dom = truncate(NOZZLE, 10.0, 21, 11)
        a = boundary_data(dom, ff, 0.3, "farfield")
        b = boundary_data(dom, ff, 0.3, "wallformula")
        gap = np.max(np.abs(a[0] - b[0]))
        assert 1e-6 < gap < prof.oscillation_delta() * 0.3

    def test_unknown_mode(self):
        with pytest.raises(DomainError):
            boundary_data(truncate(NOZZLE, 5.0, 5, 5), None, 0.3, "slip")

    def test_constant_column_is_linear(self):
        ext = constant_extension(1.0, 1.0, 0.3, 2.0)
        col = discrete_asymptote(0.3 * np.linspace(0, 1, 11), 1.2, ext, CutOff(1e-3), G2, 0.3)
        assert np.max(np.abs(col - 0.3 * np.linspace(0, 1, 11))) < 1e-15


class TestAssemble:
    def setup_method(self):
        self.ext = constant_extension(1.0, 1.0, 0.4, 2.0)
        self.cut = CutOff(1e-3)

    def test_linear_field_straight_channel(self):
        dom = truncate(STRAIGHT, 10.0, 21, 11)
        psi = initial_guess(dom, 0.4).values
        sys_ = assemble(psi, dom, self.ext, self.cut, G2)
        assert np.all(sys_.source == 0.0)
        assert np.max(np.abs(sys_.residual(psi))) < 1e-14

    def test_rows_sum_to_zero_single_cell(self):
        dom = truncate(NOZZLE, 1.0, 3, 3)
        psi = initial_guess(dom, 0.4).values
        full = assemble(psi, dom, self.ext, self.cut, G2).full
        assert np.max(np.abs(full @ np.ones(9))) < 1e-14
        assert full.nnz <= 81

    def test_symmetric_and_dominant_on_varying_nozzle(self):
        dom = truncate(TanhWalls(-0.3, 1.5, 1.5), 8.0, 41, 17)
        rng = np.random.default_rng(2)
        psi = initial_guess(dom, 0.3).values
        psi[1:-1, 1:-1] += 1e-3 * rng.standard_normal((39, 15))
        ext = constant_extension(1.0, 1.0, 0.3, 2.0)
        s = assemble(psi, dom, ext, self.cut, G2)
        assert abs(s.full - s.full.T).max() <= 1e-14
        A = s.matrix.toarray()
        off = A - np.diag(np.diag(A))
        assert np.all(off <= 1e-15)
        assert np.all(np.diag(A) >= np.abs(off).sum(axis=1) - 1e-13)
        # nine-point stencil
        assert np.max(np.diff(s.full.indptr)) == 9

    def test_nonfinite_rejected(self):
        dom = truncate(STRAIGHT, 2.0, 5, 5)
        psi = initial_guess(dom, 0.4).values
        psi[2, 2] = np.nan
        with pytest.raises(AssemblyError, match=r"node \(2, 2\)"):
            assemble(psi, dom, self.ext, self.cut, G2)

    def test_shape_mismatch(self):
        dom = truncate(STRAIGHT, 2.0, 5, 5)
        with pytest.raises(AssemblyError):
            assemble(np.zeros((4, 5)), dom, self.ext, self.cut, G2)


class TestLinearSolve:
    def test_laplacian_recovers_linear_field(self):
        dom = truncate(STRAIGHT, 4.0, 9, 9)
        ext = constant_extension(1.0, 1.0, 0.4, 2.0)
        exact = initial_guess(dom, 0.4).values
        s = assemble(exact, dom, ext, CutOff(1e-3), G2)
        assert np.all(s.source == 0.0)
        field, res = linear_solve(s, SolverConfig())
        assert res.iterations > 0
        assert np.max(np.abs(field.reshape(dom.shape) - exact)) < 1e-12

    def test_manufactured_quadratic(self):
        dom = truncate(NOZZLE, 6.0, 25, 13)
        ext = constant_extension(1.0, 1.0, 0.3, 2.0)
        T1, T2 = dom.nodes
        known = 0.3 * T2 + 0.01 * T2 * (1 - T2) * (1 + 0.1 * T1 * T1)
        s = assemble(known, dom, ext, CutOff(1e-3), G2)
        s.rhs = s.matrix @ known.ravel()[s.interior]
        field, res = linear_solve(s, SolverConfig(linear_tol=1e-13))
        assert np.max(np.abs(field.reshape(dom.shape) - known)) < 1e-11
        assert res.ritz_min > 0

    def test_singular_system_reports(self):
        n = 30
        lap = sp.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1], format="csr").tolil()
        lap[0, 0] = lap[-1, -1] = 1.0
        b = np.ones(n)  # not in the range of the pure-Neumann operator
        with pytest.raises(LinearSolveError) as info:
            pcg(lap.tocsr(), b, maxiter=200)
        assert len(info.value.history) > 1


class TestPCG:
    def test_against_direct_solve(self):
        rng = np.random.default_rng(0)
        n = 60
        M = rng.standard_normal((n, n))
        A = sp.csr_matrix(M @ M.T + n * np.eye(n))
        b = rng.standard_normal(n)
        res = pcg(A, b, rtol=1e-14)
        assert np.max(np.abs(res.x - spsolve(A.tocsc(), b))) < 1e-10

    def test_ritz_estimate_bounds_smallest_eigenvalue(self):
        n = 40
        A = sp.diags([-np.ones(n - 1), 2.5 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1], format="csr")
        res = pcg(A, np.ones(n), rtol=1e-14)
        d = A.diagonal()
        P = A.toarray() / np.sqrt(np.outer(d, d))
        lam = np.linalg.eigvalsh(P)[0]
        assert res.ritz_min >= lam - 1e-10
        assert res.ritz_min == pytest.approx(lam, rel=1e-3)

    def test_nonpositive_diagonal(self):
        with pytest.raises(LinearSolveError):
            pcg(sp.csr_matrix(np.array([[0.0, 1.0], [1.0, 2.0]])), np.ones(2))

    def test_zero_rhs(self):
        res = pcg(sp.identity(5, format="csr"), np.zeros(5))
        assert res.iterations == 0 and np.all(res.x == 0.0)


class TestSolve:
    def test_straight_channel_exact(self):
        ff = solve_farfield(CONST, G2, 0.4)
        dom = truncate(STRAIGHT, 10.0, 21, 11)
        sf = solve(dom, CONST, ff, G2, 0.4)
        assert sf.converged and not sf.cutoff_active
        assert sf.iterations <= 2
        assert np.max(np.abs(sf.values - 0.4 * dom.nodes[1])) <= 1e-10

    def test_nozzle_invariants(self, nozzle_run):
        dom, _, sf = nozzle_run
        assert sf.converged and not sf.cutoff_active
        m = sf.m
        assert sf.values.min() >= -1e-9 * m and sf.values.max() <= m * (1 + 1e-9)
        assert np.all(np.diff(sf.values, axis=1) > 0)
        assert sf.final_residual <= 1e-8
        mask = dom.boundary_mask()
        g = boundary_data(dom, nozzle_run[1], m)
        assert np.array_equal(sf.values[mask], g[mask])

    def test_positive_ritz_values_every_step(self, nozzle_run):
        assert all(h["ritz_min"] > 0 for h in nozzle_run[2].history if np.isfinite(h["ritz_min"]))

    def test_uniqueness_from_two_guesses(self, nozzle_run):
        dom, ff, sf = nozzle_run
        cfg = SolverConfig()
        other = solve(dom, CONST, ff, G2, 0.3, cfg, initial="cubic")
        assert np.max(np.abs(other.values - sf.values)) <= 10 * cfg.tol_update * 0.3

    def test_warm_start(self, nozzle_run):
        dom, _, sf = nozzle_run
        ff = solve_farfield(CONST, G2, 0.33, 0.0, 1.2)
        warm = solve(dom, CONST, ff, G2, 0.33, initial=scaled_initial(sf, 0.33))
        cold = solve(dom, CONST, ff, G2, 0.33)
        assert warm.iterations <= cold.iterations
        assert np.max(np.abs(warm.values - cold.values)) < 1e-8 * 0.33

    def test_perturbed_profiles_maximum_principle(self):
        prof = perturbed()
        ff = solve_farfield(prof, G2, 0.3, 0.0, 1.2)
        dom = truncate(NOZZLE, 25.0, 101, 26)
        cfg = SolverConfig()
        sf = solve(dom, prof, ff, G2, 0.3, cfg)
        assert sf.converged and not sf.cutoff_active
        assert sf.values.min() >= -cfg.tol_update * 0.3
        assert sf.values.max() <= 0.3 * (1 + cfg.tol_update)
        assert np.all(np.diff(sf.values, axis=1) > 0)

    def test_non_convergence_carries_last_iterate(self):
        ff = solve_farfield(CONST, G2, 0.3, 0.0, 1.2)
        dom = truncate(NOZZLE, 10.0, 41, 11)
        with pytest.raises(ConvergenceError) as info:
            solve(dom, CONST, ff, G2, 0.3, SolverConfig(max_picard=2))
        last = info.value.last
        assert last is not None and not last.converged
        assert len(info.value.history) == 2

    def test_mismatched_profiles(self):
        ff = solve_farfield(CONST, G2, 0.3)
        with pytest.raises(DomainError):
            solve(truncate(STRAIGHT, 5.0, 5, 5), perturbed(), ff, G2, 0.3)

    def test_wallformula_mode_matches_for_constant_data(self, nozzle_run):
        dom, ff, sf = nozzle_run
        wf = solve(dom, CONST, ff, G2, 0.3, SolverConfig(face_bc_mode="wallformula"))
        assert np.max(np.abs(wf.values - sf.values)) < 1e-8 * 0.3

    def test_second_order_with_perturbed_profiles(self):
        # in a straight channel the solution is the t1-independent column,
        # so the contraction measures the cross-stream discretization
        prof = perturbed()
        ff = solve_farfield(prof, G2, 0.4)
        cfg = SolverConfig(tol_update=1e-13, tol_residual=1e-12)
        sols = []
        for ny in (11, 21, 41):
            dom = truncate(STRAIGHT, 2.0, 5, ny)
            sols.append(solve(dom, prof, ff, G2, 0.4, cfg).values[2])
        d1 = np.max(np.abs(sols[0] - sols[1][::2]))
        d2 = np.max(np.abs(sols[1] - sols[2][::2]))
        assert 3.0 <= d1 / d2 <= 5.0
