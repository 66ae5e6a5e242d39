import numpy as np
import pytest

from enkfkit.errors import NotPositiveDefiniteError
from enkfkit.rng import make_rng
from enkfkit.solvers import SolverChoice, solve_analysis, solve_cholesky, solve_svd
from enkfkit.sherman import solve_sherman


def random_system(seed, nobs, nens):
    rng = make_rng(seed)
    r = rng.uniform(0.5, 2.0, nobs)
    v = rng.standard_normal((nobs, nens))
    d = rng.standard_normal((nobs, nens))
    return r, v, d


class TestCholeskySolver:
    def test_zero_v_scales_rows(self):
        r = np.array([2.0, 4.0])
        d = np.array([[2.0, 4.0], [8.0, 12.0]])
        z = solve_cholesky(r, np.zeros((2, 2)), d)
        assert np.allclose(z.z, [[1.0, 2.0], [2.0, 3.0]], atol=1e-14)

    def test_scalar_case(self):
        z = solve_cholesky(np.array([1.0]), np.array([[1.0]]), np.array([[1.0]]))
        assert np.allclose(z.z, [[0.5]], atol=1e-15)

    def test_agrees_with_sherman(self):
        r, v, d = random_system(7, 50, 8)
        z_chol = solve_cholesky(r, v, d).z
        z_sher = solve_sherman(r, v, d).z
        assert np.abs(z_chol - z_sher).max() <= 1e-10

    def test_propagates_not_positive_definite(self):
        # a negative variance sneaks past solve_cholesky and must surface
        # from the factorization
        with pytest.raises(NotPositiveDefiniteError):
            solve_cholesky(np.array([-1.0, 1.0]), np.zeros((2, 1)),
                           np.ones((2, 1)))


class TestSvdSolver:
    def test_zero_v_is_diagonal_solve(self):
        r = np.array([2.0, 4.0])
        d = np.array([[2.0, 4.0], [8.0, 12.0]])
        z = solve_svd(r, np.zeros((2, 2)), d)
        assert np.allclose(z.z, [[1.0, 2.0], [2.0, 3.0]], atol=1e-14)

    def test_rank_one_closed_form(self):
        # two symmetric members +/- a give (I + 2 a a') z = a, whose
        # closed form is a / (1 + 2 |a|^2); dense solve double-checks
        rng = make_rng(8)
        a = rng.standard_normal(12)
        v_raw = np.column_stack([a, -a])
        r = np.ones(12)
        d = np.column_stack([a, a])
        z = solve_svd(r, v_raw, d).z
        expected = a / (1.0 + 2.0 * (a @ a))
        assert np.abs(z[:, 0] - expected).max() <= 1e-12
        dense = np.linalg.solve(np.eye(12) + 2.0 * np.outer(a, a), a)
        assert np.abs(z[:, 0] - dense).max() <= 1e-12

    def test_agrees_with_sherman(self):
        r, v, d = random_system(9, 50, 8)
        z_svd = solve_svd(r, v * np.sqrt(7.0), d).z
        z_sher = solve_sherman(r, v, d).z
        assert np.abs(z_svd - z_sher).max() <= 1e-9

    def test_needs_two_columns(self):
        with pytest.raises(ValueError):
            solve_svd(np.ones(3), np.ones((3, 1)), np.ones((3, 1)))

    def test_thin_path_matches_full_factor_formula(self):
        # the thin factorization plus identity-complement handling must
        # reproduce the square-left-factor formula
        from enkfkit.linalg import svd_thin

        rng = make_rng(10)
        nobs, nens = 30, 5
        r = rng.uniform(0.5, 2.0, nobs)
        v_raw = rng.standard_normal((nobs, nens))
        d = rng.standard_normal((nobs, nens))

        root_r = np.sqrt(r)
        u_full, s, _ = svd_thin(v_raw / root_r[:, None], mode="full-left")
        inner = np.ones(nobs)
        inner[:nens] = 1.0 / (s * s / (nens - 1) + 1.0)
        z_full = (u_full @ (inner[:, None] * (u_full.T @ (d / root_r[:, None])))
                  ) / root_r[:, None]

        z_thin = solve_svd(r, v_raw, d).z
        assert np.abs(z_thin - z_full).max() <= 1e-9 * np.abs(z_full).max()


class TestThreeWayAgreement:
    @pytest.mark.parametrize("seed", range(5))
    def test_random_instances(self, seed):
        rng = make_rng(1000 + seed)
        nobs = int(rng.integers(10, 300))
        nens = int(rng.integers(2, 64))
        r, v, d = random_system(2000 + seed, nobs, nens)
        z_sher = solve_sherman(r, v, d).z
        z_chol = solve_cholesky(r, v, d).z
        z_svd = solve_svd(r, v * np.sqrt(nens - 1.0), d).z
        scale = np.abs(z_sher).max()
        assert np.abs(z_sher - z_chol).max() <= 1e-9 * scale
        assert np.abs(z_sher - z_svd).max() <= 1e-8 * scale


class TestDispatch:
    def test_by_name_and_enum(self):
        r, v, d = random_system(5, 20, 4)
        z1 = solve_analysis("sherman", r, v, d).z
        z2 = solve_analysis(SolverChoice.CHOLESKY, r, v, d).z
        z3 = solve_analysis("svd", r, v, d).z
        assert np.abs(z1 - z2).max() <= 1e-10 * np.abs(z1).max()
        assert np.abs(z1 - z3).max() <= 1e-9 * np.abs(z1).max()

    def test_workers_passthrough(self):
        r, v, d = random_system(6, 30, 4)
        z1 = solve_analysis("sherman", r, v, d, workers=4).z
        z0 = solve_analysis("sherman", r, v, d).z
        assert np.abs(z1 - z0).max() <= 1e-12

    def test_unknown_solver(self):
        r, v, d = random_system(5, 4, 2)
        with pytest.raises(ValueError):
            solve_analysis("qr", r, v, d)
