import numpy as np
import pytest

from enkfkit.errors import SingularUpdateError
from enkfkit.rng import make_rng
from enkfkit.sherman import (
    _sweep,
    _sweep_reference,
    level_blocks,
    long_op_count,
    solve_sherman,
    solve_sherman_blocked,
    solve_sherman_recursive,
)


def random_system(seed, nobs, nens, r_lo=0.5, r_hi=2.0):
    rng = make_rng(seed)
    r = rng.uniform(r_lo, r_hi, nobs)
    v = rng.standard_normal((nobs, nens))
    d = rng.standard_normal((nobs, nens))
    return r, v, d


def dense_solve(r, v, d):
    # independent oracle: assemble the full matrix and use Gaussian elimination
    return np.linalg.solve(np.diag(r) + v @ v.T, d)


class TestSolveSherman:
    def test_zero_v_is_diagonal_solve(self):
        r = np.array([2.0, 2.0])
        z = solve_sherman(r, np.zeros((2, 1)), np.array([[4.0], [6.0]])).z
        assert np.array_equal(z, [[2.0], [3.0]])

    def test_scalar_rank_one(self):
        # 1x1 system: (1 + 1*1) z = 1
        z = solve_sherman(np.array([1.0]), np.array([[1.0]]), np.array([[1.0]])).z
        assert np.allclose(z, [[0.5]], atol=1e-15)

    def test_against_dense_solve(self):
        r, v, d = random_system(31, 5, 3)
        z = solve_sherman(r, v, d).z
        assert np.abs(z - dense_solve(r, v, d)).max() <= 1e-11

    @pytest.mark.parametrize("nobs,nens", [(50, 2), (200, 16), (2000, 128)])
    def test_residual_bound(self, nobs, nens):
        r, v, d = random_system(40 + nens, nobs, nens)
        z = solve_sherman(r, v, d).z
        residual = np.abs(r[:, None] * z + v @ (v.T @ z) - d).max()
        v_norm = np.abs(v).sum(axis=1).max()
        bound = 1e-10 * (np.abs(d).max() + v_norm ** 2 * np.abs(z).max())
        assert residual <= bound

    def test_validation_errors(self):
        with pytest.raises(ValueError):
            solve_sherman(np.array([1.0, 1.0]), np.ones((3, 2)), np.ones((3, 2)))
        with pytest.raises(ValueError):
            solve_sherman(np.array([1.0, -1.0]), np.ones((2, 2)), np.ones((2, 2)))
        with pytest.raises(ValueError):
            solve_sherman(np.array([1.0, 1.0]), np.ones((2, 2)), np.ones((2, 3)))
        bad = np.ones((2, 2))
        bad[0, 0] = np.inf
        with pytest.raises(ValueError):
            solve_sherman(np.array([1.0, 1.0]), bad, np.ones((2, 2)))

    def test_singular_update_guard(self):
        # valid data keeps 1 + v'u >= 1; force the guard through the
        # unvalidated core with a sign-flipped diagonal
        r = np.array([-1.0])
        v = np.array([[1.0]])
        d = np.array([[1.0]])
        with pytest.raises(SingularUpdateError) as info:
            _sweep(r, v, d, workers=1)
        assert info.value.level == 1
        with pytest.raises(SingularUpdateError):
            _sweep_reference(r, v, d, count_ops=False, verify_frozen=False)

    def test_frozen_columns_never_mutated(self):
        r, v, d = random_system(55, 40, 8)
        z_plain = solve_sherman(r, v, d).z
        z_checked = solve_sherman(r, v, d, verify_frozen=True).z
        assert np.abs(z_plain - z_checked).max() <= 1e-12

    @pytest.mark.parametrize("nens", [1, 3, 8, 9, 16, 31])
    def test_grouped_path_matches_reference(self, nens):
        # the compound group update is algebraically the level-by-level
        # sweep; group boundaries (width 8) must not matter
        r, v, d = random_system(56 + nens, 150, nens)
        grouped = solve_sherman(r, v, d).z
        reference, _ = _sweep_reference(r, v, d, count_ops=False,
                                        verify_frozen=False)
        assert np.abs(grouped - reference).max() <= 1e-12 * max(
            1.0, np.abs(reference).max())


class TestRecursive:
    def test_base_case_is_diagonal_solve(self):
        r = np.array([2.0, 4.0])
        v = np.ones((2, 2))
        x = np.array([2.0, 8.0])
        assert np.array_equal(solve_sherman_recursive(r, v, x, k=0), [1.0, 2.0])

    @pytest.mark.parametrize("nens", [1, 2, 3, 4, 5, 6])
    def test_matches_iterative(self, nens):
        r, v, d = random_system(60 + nens, 17, nens)
        z = solve_sherman(r, v, d).z
        for i in range(nens):
            zi = solve_sherman_recursive(r, v, d[:, i])
            assert np.abs(zi - z[:, i]).max() <= 1e-12

    def test_first_pivot_solved_four_times_at_depth_three(self):
        # without memoization the base solve for the first pivot column
        # appears once per leaf path: exactly 4 times at depth 3
        r, v, d = random_system(71, 9, 3)
        log = []
        solve_sherman_recursive(r, v, d[:, 0], base_log=log)
        assert log.count(1) == 4
        assert log.count(0) == 1  # the right-hand side itself
        assert log.count(2) == 2
        assert log.count(3) == 1

    def test_size_cap(self):
        r, v, d = random_system(72, 10, 9)
        with pytest.raises(ValueError):
            solve_sherman_recursive(r, v, d[:, 0])

    def test_depth_out_of_range(self):
        r, v, d = random_system(73, 6, 2)
        with pytest.raises(ValueError):
            solve_sherman_recursive(r, v, d[:, 0], k=3)


class TestBlocked:
    def test_single_worker_bitwise_equal(self):
        r, v, d = random_system(81, 300, 12)
        serial = solve_sherman(r, v, d).z
        blocked = solve_sherman_blocked(r, v, d, workers=1).z
        assert np.array_equal(serial, blocked)

    @pytest.mark.parametrize("workers", [2, 4, 8])
    def test_worker_count_independence(self, workers):
        r, v, d = random_system(82, 200, 16)
        serial = solve_sherman(r, v, d).z
        blocked = solve_sherman_blocked(r, v, d, workers=workers).z
        assert np.abs(serial - blocked).max() <= 1e-12

    def test_level_zero_offers_all_columns(self):
        # with 3 ensemble columns the concatenated workspace has 6 columns
        blocks = level_blocks(nens=3, level=0, workers=2)
        assert blocks[0][0] == 0 and blocks[-1][1] == 6
        assert sum(hi - lo for lo, hi in blocks) == 6

    def test_level_blocks_shrink_with_level(self):
        for level in range(1, 4):
            blocks = level_blocks(nens=3, level=level, workers=4)
            assert blocks[0][0] == level and blocks[-1][1] == 6

    def test_worker_validation(self):
        r, v, d = random_system(83, 10, 2)
        with pytest.raises(ValueError):
            solve_sherman_blocked(r, v, d, workers=0)


class TestOpCount:
    def test_formula_examples(self):
        assert long_op_count(3, 3) == 108
        assert long_op_count(1, 1) == 6

    def test_instrumented_counter_matches(self):
        r, v, d = random_system(91, 10, 4)
        result = solve_sherman(r, v, d, count_ops=True)
        assert result.long_ops == long_op_count(4, 10) == 600

    @pytest.mark.parametrize("nens,nobs", [(1, 1), (2, 7), (5, 40), (16, 320)])
    def test_counter_equals_formula(self, nens, nobs):
        r, v, d = random_system(92 + nens, nobs, nens)
        result = solve_sherman(r, v, d, count_ops=True)
        assert result.long_ops == long_op_count(nens, nobs)

    def test_uncounted_by_default(self):
        r, v, d = random_system(93, 4, 2)
        assert solve_sherman(r, v, d).long_ops is None

    def test_formula_validation(self):
        with pytest.raises(ValueError):
            long_op_count(0, 5)
