import numpy as np
import pytest

from ctls.matrix_kernels import (
    EmptyBlock,
    FullRank,
    MatrixKernelException,
    NearSingular,
    NonFinite,
    NonSquare,
    WideMatrix,
    as_matrix,
    block,
    dense,
    is_empty,
    null_space_basis,
    numerical_rank,
    qr_decompose,
    solve_linear,
    svd,
    sym_eigen,
)


def characteristic_roots(s):
    """
    Eigenvalues as roots of det(S - lambda I), coefficients by Faddeev-LeVerrier
    """
    size = s.shape[0]
    coefficients = [1.0]
    m = np.zeros_like(s)
    for k in range(1, size + 1):
        m = s @ m + coefficients[-1] * np.eye(size)
        coefficients.append(-np.trace(s @ m) / k)
    return np.sort(np.roots(coefficients).real)


def random_orthogonal(rng, size):
    q, _ = np.linalg.qr(rng.standard_normal((size, size)))
    return q


class TestSymEigen:
    def test_diagonal(self):
        result = sym_eigen(np.diag([3.0, 1.0, 2.0]))
        np.testing.assert_allclose(result.values, [1.0, 2.0, 3.0])
        np.testing.assert_allclose(
            result.vectors, [[0, 0, 1], [1, 0, 0], [0, 1, 0]], atol=1e-12
        )

    def test_two_by_two(self):
        result = sym_eigen(np.array([[2.0, 1.0], [1.0, 2.0]]))
        np.testing.assert_allclose(result.values, [1.0, 3.0])
        np.testing.assert_allclose(
            result.vectors[:, 0], np.array([1.0, -1.0]) / np.sqrt(2), atol=1e-12
        )
        np.testing.assert_allclose(
            result.vectors[:, 1], np.array([1.0, 1.0]) / np.sqrt(2), atol=1e-12
        )

    def test_matches_characteristic_polynomial(self):
        rng = np.random.default_rng(6)
        q = random_orthogonal(rng, 6)
        s = q @ np.diag([0.5, 1.0, 2.0, 3.5, 5.0, 7.0]) @ q.T
        result = sym_eigen(s)
        np.testing.assert_allclose(result.values, characteristic_roots(s), atol=1e-8)

    def test_invariants(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal((40, 40))
        s = x + x.T
        result = sym_eigen(s)
        norm = np.linalg.norm(s)

        assert np.all(np.diff(result.values) >= 0)
        np.testing.assert_allclose(
            result.vectors.T @ result.vectors, np.eye(40), atol=1e-10
        )
        for value, vector in zip(result.values, result.vectors.T):
            assert np.linalg.norm(s @ vector - value * vector) <= 1e-8 * (1 + norm)
        assert abs(np.trace(s) - result.values.sum()) <= 1e-8 * (
            1 + abs(np.trace(s))
        )
        assert abs(norm**2 - np.sum(result.values**2)) <= 1e-8 * (1 + norm**2)

    def test_sign_convention(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal((5, 5))
        vectors = sym_eigen(x @ x.T).vectors
        for column in vectors.T:
            first = column[np.flatnonzero(np.abs(column) > 1e-12)[0]]
            assert first > 0

    def test_deterministic(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((7, 7))
        first, second = sym_eigen(x + x.T), sym_eigen(x + x.T)
        assert np.array_equal(first.values, second.values)
        assert np.array_equal(first.vectors, second.vectors)

    def test_symmetrizes(self):
        s = np.array([[2.0, 1.0 + 1e-15], [1.0, 2.0]])
        np.testing.assert_allclose(sym_eigen(s).values, [1.0, 3.0])

    def test_non_square(self):
        with pytest.raises(NonSquare):
            sym_eigen(np.ones((2, 3)))

    def test_non_finite(self):
        with pytest.raises(NonFinite):
            sym_eigen(np.array([[1.0, np.nan], [np.nan, 1.0]]))


class TestQrDecompose:
    def test_identity(self):
        result = qr_decompose(np.eye(3), full=True)
        np.testing.assert_allclose(result.q_full, np.eye(3), atol=1e-12)
        np.testing.assert_allclose(result.r_top, np.eye(3), atol=1e-12)

    def test_three_four_five(self):
        result = qr_decompose(np.array([[3.0], [4.0]]), full=True)
        np.testing.assert_allclose(result.r_top, [[5.0]])
        np.testing.assert_allclose(result.q1, [[0.6], [0.8]])
        assert result.q2.shape == (2, 1)

    def test_random(self):
        m = np.random.default_rng(8).standard_normal((8, 3))
        result = qr_decompose(m, full=True)
        np.testing.assert_allclose(
            result.q_full.T @ result.q_full, np.eye(8), atol=1e-10
        )
        np.testing.assert_allclose(result.q1 @ result.r_top, m, atol=1e-10)
        assert np.all(np.diag(result.r_top) >= 0)
        np.testing.assert_allclose(np.tril(result.r_top, -1), 0.0, atol=1e-15)

    def test_economic_by_default(self):
        m = np.random.default_rng(9).standard_normal((50, 2))
        result = qr_decompose(m)
        assert result.q_full is None and result.q2 is None
        assert result.q1.shape == (50, 2)
        assert np.linalg.norm(m - result.q1 @ result.r_top) <= 1e-8 * (
            1 + np.linalg.norm(m)
        )

    def test_wide(self):
        with pytest.raises(WideMatrix):
            qr_decompose(np.ones((2, 3)))

    def test_non_finite(self):
        with pytest.raises(NonFinite):
            qr_decompose(np.array([[np.inf], [1.0]]))


class TestSvd:
    def test_diagonal(self):
        result = svd(np.diag([2.0, 1.0]))
        np.testing.assert_allclose(result.singular_values, [2.0, 1.0])
        np.testing.assert_allclose(np.abs(result.u), np.eye(2), atol=1e-12)
        np.testing.assert_allclose(np.abs(result.v), np.eye(2), atol=1e-12)

    def test_zero(self):
        np.testing.assert_allclose(svd(np.zeros((2, 3))).singular_values, [0.0, 0.0])

    def test_matches_gram_eigenvalues(self):
        m = np.random.default_rng(4).standard_normal((4, 4))
        result = svd(m)
        expected = np.sqrt(sym_eigen(m.T @ m).values)[::-1]
        np.testing.assert_allclose(result.singular_values, expected, atol=1e-8)
        reconstructed = result.u @ np.diag(result.singular_values) @ result.v.T
        np.testing.assert_allclose(reconstructed, m, atol=1e-10)

    def test_non_finite(self):
        with pytest.raises(NonFinite):
            svd(np.array([[np.nan]]))


@pytest.mark.parametrize(
    "singular_values,expected",
    (
        (np.array([2.0, 1.0]), 2),
        (np.array([1.0, 1e-11]), 1),
        (np.array([0.0, 0.0]), 0),
        (np.array([]), 0),
    ),
)
def test_numerical_rank(singular_values, expected):
    assert numerical_rank(singular_values) == expected


class TestNullSpaceBasis:
    def test_unit_row(self):
        m = np.array([[1.0, 0.0, 0.0]])
        p = null_space_basis(m)
        assert p.shape == (3, 2)
        np.testing.assert_allclose(m @ p, 0.0, atol=1e-12)
        np.testing.assert_allclose(p.T @ p, np.eye(2), atol=1e-12)
        np.testing.assert_allclose(np.abs(p[0]), 0.0, atol=1e-12)

    def test_full_rank(self):
        with pytest.raises(FullRank):
            null_space_basis(np.eye(2))

    def test_random_wide(self):
        m = np.random.default_rng(5).standard_normal((2, 5))
        p = null_space_basis(m)
        assert p.shape == (5, 3)
        tolerance = 1e-10 * (1 + np.linalg.norm(m))
        assert np.max(np.abs(m @ p)) <= tolerance
        assert np.max(np.abs(p.T @ p - np.eye(3))) <= tolerance

    def test_rank_deficient_rows(self):
        m = np.array([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0]])
        assert null_space_basis(m).shape == (3, 2)

    def test_invalid_tolerance(self):
        with pytest.raises(MatrixKernelException):
            null_space_basis(np.ones((1, 2)), rank_tol=0.0)


class TestSolveLinear:
    def test_identity(self):
        b = np.array([[1.0, 2.0], [3.0, 4.0]])
        np.testing.assert_allclose(solve_linear(np.eye(2), b), b)

    def test_diagonal(self):
        x = solve_linear(np.diag([2.0, 4.0]), np.array([[2.0], [8.0]]))
        np.testing.assert_allclose(x, [[1.0], [2.0]])

    def test_recovers_solution(self):
        rng = np.random.default_rng(10)
        a = rng.standard_normal((5, 5)) + 5 * np.eye(5)
        x0 = rng.standard_normal((5, 2))
        np.testing.assert_allclose(solve_linear(a, a @ x0), x0, atol=1e-8)

    def test_near_singular(self):
        with pytest.raises(NearSingular) as e:
            solve_linear(np.array([[1.0, 1.0], [1.0, 1.0]]), np.ones((2, 1)))
        assert e.value.condition > 1e12

    def test_non_square(self):
        with pytest.raises(NonSquare):
            solve_linear(np.ones((2, 3)), np.ones((2, 1)))


class TestBlocks:
    def test_empty_slice(self):
        empty = block(np.zeros((0, 3)))
        assert empty == EmptyBlock(0, 3)
        assert is_empty(empty)
        assert dense(empty).shape == (0, 3)

    def test_non_empty_slice(self):
        values = np.ones((2, 2))
        assert block(values) is values
        assert not is_empty(values)

    @pytest.mark.parametrize(
        "values", (np.ones(3), np.zeros((0, 2)), np.array([[1.0, np.inf]]))
    )
    def test_as_matrix_rejects(self, values):
        with pytest.raises(MatrixKernelException):
            as_matrix(values)
