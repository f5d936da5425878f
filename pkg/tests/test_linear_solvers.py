import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nttcompress.errors import InvalidArgumentError, NumericalBreakdownError
from nttcompress.linear_solvers import (
    KronPlusDiagOperator,
    batched_cg,
    batched_spd_solve,
    cg_solve,
    direct_spd_solve,
    kron_plus_diag_apply,
    least_squares_solve,
    truncated_svd,
)

seeds = st.integers(0, 2**32 - 1)


def spd(rng, m, shift=1.0):
    R = rng.standard_normal((m, m))
    return R.T @ R + shift * np.eye(m)


class TestTruncatedSVD:
    def test_rank_one(self, rng):
        u, v = rng.standard_normal(5), rng.standard_normal(4)
        Z = np.outer(u, v)
        L, R = truncated_svd(Z, 1)
        assert np.linalg.norm(L @ R - Z) <= 1e-12 * np.linalg.norm(Z)

    def test_identity_full_rank(self):
        L, R = truncated_svd(np.eye(4), 4)
        np.testing.assert_allclose(L @ R, np.eye(4), atol=1e-13)

    def test_tail_energy(self, rng):
        Z = rng.standard_normal((10, 8))
        L, R = truncated_svd(Z, 3)
        s = np.linalg.svd(Z, compute_uv=False)
        assert np.linalg.norm(Z - L @ R) == pytest.approx(np.sqrt(np.sum(s[3:] ** 2)), abs=1e-10)

    def test_right_factor_orthonormal(self, rng):
        _, R = truncated_svd(rng.standard_normal((6, 7)), 4)
        np.testing.assert_allclose(R @ R.T, np.eye(4), atol=1e-13)

    def test_rank_too_large(self):
        with pytest.raises(InvalidArgumentError):
            truncated_svd(np.ones((3, 2)), 3)

    @given(st.integers(1, 50), st.integers(1, 50), seeds, st.data())
    def test_property_tail_energy(self, m, n, seed, data):
        r = data.draw(st.integers(1, min(m, n)))
        Z = np.random.default_rng(seed).standard_normal((m, n))
        L, R = truncated_svd(Z, r)
        s = np.linalg.svd(Z, compute_uv=False)
        tail = np.sqrt(np.sum(s[r:] ** 2))
        err = np.linalg.norm(Z - L @ R)
        assert err == pytest.approx(tail, rel=1e-9, abs=1e-12 * s[0])


class TestKronPlusDiag:
    def test_identity(self, rng):
        v = rng.standard_normal(6)
        op = KronPlusDiagOperator(np.eye(2), np.eye(3), np.zeros(6))
        np.testing.assert_array_equal(kron_plus_diag_apply(op, v), v)

    def test_diag_only(self):
        op = KronPlusDiagOperator(np.zeros((2, 2)), np.zeros((2, 2)), np.array([1.0, 2, 3, 4]))
        np.testing.assert_array_equal(op(np.ones(4)), [1, 2, 3, 4])

    def test_length_mismatch(self):
        op = KronPlusDiagOperator(np.eye(2), np.eye(2), np.zeros(4))
        with pytest.raises(InvalidArgumentError):
            op(np.ones(5))
        with pytest.raises(InvalidArgumentError):
            KronPlusDiagOperator(np.eye(2), np.eye(2), np.zeros(3))

    @given(st.integers(1, 5), st.integers(1, 5), seeds)
    def test_property_matches_explicit_kron(self, a, b, seed):
        g = np.random.default_rng(seed)
        A, B = g.standard_normal((a, a)), g.standard_normal((b, b))
        diag = g.uniform(0, 2, a * b)
        v = g.standard_normal(a * b)
        op = KronPlusDiagOperator(A, B, diag)
        ref = (np.kron(A, B) + np.diag(diag)) @ v
        np.testing.assert_allclose(op(v), ref, rtol=1e-12, atol=1e-12)


class TestCG:
    def test_identity_one_iteration(self, rng):
        b = rng.standard_normal(5)
        x, it, res = cg_solve(np.eye(5), b)
        np.testing.assert_allclose(x, b)
        assert it == 1 and res == 0.0

    def test_two_by_two(self):
        A = np.array([[4.0, 1.0], [1.0, 3.0]])
        x, _, _ = cg_solve(A, np.array([1.0, 2.0]))
        np.testing.assert_allclose(x, np.linalg.solve(A, [1.0, 2.0]), atol=1e-10)

    def test_diagonal_preconditioning(self):
        d = np.logspace(0, 6, 30)
        b = np.ones(30)
        _, it_p, _ = cg_solve(np.diag(d), b, precond=d)
        _, it_u, _ = cg_solve(np.diag(d), b, max_iter=1000)
        assert it_p <= 2 and it_u > 10

    def test_zero_rhs(self):
        x, it, res = cg_solve(np.eye(3), np.zeros(3))
        assert it == 0 and not x.any()

    def test_breakdown_reports_iteration(self):
        with pytest.raises(NumericalBreakdownError) as exc:
            cg_solve(lambda v: np.full_like(v, np.nan), np.ones(3))
        assert exc.value.iteration == 1

    def test_indefinite_breakdown(self):
        with pytest.raises(NumericalBreakdownError):
            cg_solve(-np.eye(3), np.ones(3))

    def test_bad_tol(self):
        with pytest.raises(InvalidArgumentError):
            cg_solve(np.eye(2), np.ones(2), tol=0.0)

    @given(st.integers(1, 100), seeds)
    def test_property_converges_within_dimension(self, m, seed):
        g = np.random.default_rng(seed)
        # moderately conditioned SPD matrix
        Q, _ = np.linalg.qr(g.standard_normal((m, m)))
        A = Q @ np.diag(g.uniform(1.0, 10.0, m)) @ Q.T
        b = g.standard_normal(m)
        x, it, res = cg_solve(A, b, tol=1e-10, max_iter=2 * m)
        assert res <= 1e-10 and it <= 2 * m
        assert np.linalg.norm(A @ x - b) <= 1e-9 * np.linalg.norm(b)

    def test_batched_matches_single(self, rng):
        As = np.stack([spd(rng, 6) for _ in range(4)])
        B = rng.standard_normal((4, 6))
        X, iters, res = batched_cg(lambda P: np.einsum("bij,bj->bi", As, P), B, tol=1e-12)
        for j in range(4):
            np.testing.assert_allclose(X[j], np.linalg.solve(As[j], B[j]), rtol=1e-9)
        assert np.all(res <= 1e-12)

    def test_batched_zero_row(self, rng):
        A = spd(rng, 3)
        B = np.vstack([np.zeros(3), np.ones(3)])
        X, iters, _ = batched_cg(lambda P: P @ A.T, B)
        assert iters[0] == 0 and not X[0].any()


class TestDirect:
    def test_identity(self):
        np.testing.assert_array_equal(direct_spd_solve(np.eye(3), np.arange(3.0)), np.arange(3.0))

    def test_diagonal(self):
        np.testing.assert_allclose(direct_spd_solve(np.diag([2.0, 4.0]), np.array([2.0, 8.0])),
                                   [1.0, 2.0])

    def test_random_residual(self, rng):
        A = spd(rng, 5)
        b = rng.standard_normal(5)
        x = direct_spd_solve(A, b)
        assert np.linalg.norm(A @ x - b) <= 1e-11 * np.linalg.norm(b)

    def test_not_spd_names_pivot(self):
        A = np.diag([1.0, -1.0, 1.0])
        with pytest.raises(NumericalBreakdownError, match="pivot 1"):
            direct_spd_solve(A, np.ones(3))

    def test_batched(self, rng):
        A = np.stack([spd(rng, 4) for _ in range(3)])
        B = rng.standard_normal((3, 4))
        X = batched_spd_solve(A, B)
        for j in range(3):
            np.testing.assert_allclose(A[j] @ X[j], B[j], atol=1e-11)

    def test_batched_not_spd(self):
        A = np.stack([np.eye(2), -np.eye(2)])
        with pytest.raises(NumericalBreakdownError, match="matrix 1"):
            batched_spd_solve(A, np.ones((2, 2)))


class TestLeastSquares:
    def test_identity(self, rng):
        B = rng.standard_normal((3, 2))
        np.testing.assert_allclose(least_squares_solve(np.eye(3), B), B)

    def test_consistent_overdetermined(self, rng):
        A = rng.standard_normal((8, 3))
        X = rng.standard_normal((3, 2))
        np.testing.assert_allclose(least_squares_solve(A, A @ X), X, atol=1e-11)

    def test_zero_matrix(self):
        out = least_squares_solve(np.zeros((3, 2)), np.ones((3, 4)))
        assert out.shape == (2, 4) and not out.any()

    @given(st.integers(1, 12), st.integers(1, 12), seeds)
    def test_property_residual_orthogonal(self, m, n, seed):
        g = np.random.default_rng(seed)
        A = g.standard_normal((m, n))
        B = g.standard_normal((m, 3))
        X = least_squares_solve(A, B)
        assert np.max(np.abs(A.T @ (A @ X - B))) <= 1e-9 * max(1.0, np.linalg.norm(A) ** 2 * np.linalg.norm(B))
