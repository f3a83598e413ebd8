"""
Dense linear algebra primitives every estimator is built on.

Matrices are plain two dimensional float64 numpy arrays. A block with zero
rows or columns is never an array, it is an EmptyBlock carrying its shape.
Eigenvalues are reported ascending, singular values descending.
"""

import logging
from typing import NamedTuple, Optional, Union

import numpy as np
import scipy.linalg

from ctls.consts import ASYMMETRY_RTOL, NEAR_SINGULAR_RTOL, RANK_TOL, SIGN_TOL
from ctls.ctls_exception import CtlsException

logger = logging.getLogger(__name__)


class MatrixKernelException(CtlsException):
    pass


class NonSquare(MatrixKernelException):
    pass


class NonFinite(MatrixKernelException):
    pass


class WideMatrix(MatrixKernelException):
    pass


class FullRank(MatrixKernelException):
    pass


class NearSingular(MatrixKernelException):
    def __init__(self, message: str, condition: float):
        super().__init__(message)
        self.condition = condition


class EmptyBlock(NamedTuple):
    """
    Placeholder for a block with zero rows or zero columns.
    """

    rows: int
    cols: int

    @property
    def shape(self):
        return (self.rows, self.cols)


Block = Union[np.ndarray, EmptyBlock]


class SymEigenResult(NamedTuple):
    values: np.ndarray
    vectors: np.ndarray


class QrResult(NamedTuple):
    # q_full and q2 are only formed on request, they are m x m and m x (m-k)
    q_full: Optional[np.ndarray]
    r_top: np.ndarray
    q1: np.ndarray
    q2: Optional[np.ndarray]


class SvdResult(NamedTuple):
    u: np.ndarray
    singular_values: np.ndarray
    v: np.ndarray


def as_matrix(values) -> np.ndarray:
    """
    Converts values to a finite, non empty, two dimensional float64 array
    """
    matrix = np.asarray(values, dtype=np.float64)
    if matrix.ndim != 2:
        raise MatrixKernelException(
            f"Expected a two dimensional matrix, got {matrix.ndim} dimensions"
        )
    if matrix.shape[0] < 1 or matrix.shape[1] < 1:
        raise MatrixKernelException(
            f"Matrix of shape {matrix.shape} is empty, use EmptyBlock instead"
        )
    _check_finite(matrix)
    return matrix


def block(values: np.ndarray) -> Block:
    """
    Wraps a possibly empty slice: arrays with a zero dimension become EmptyBlock
    """
    rows, cols = values.shape
    if rows == 0 or cols == 0:
        return EmptyBlock(rows, cols)
    return values


def is_empty(value: Block) -> bool:
    return isinstance(value, EmptyBlock)


def dense(value: Block) -> np.ndarray:
    """
    Returns an array for arithmetic, a zero sized one for an EmptyBlock
    """
    if is_empty(value):
        return np.zeros(value.shape)
    return value


def _check_finite(matrix: np.ndarray):
    if not np.all(np.isfinite(matrix)):
        raise NonFinite("Matrix contains NaN or infinite entries")


def _fix_column_signs(vectors: np.ndarray) -> np.ndarray:
    """
    Makes the first entry above SIGN_TOL of every column positive
    """
    vectors = vectors.copy()
    for col in range(vectors.shape[1]):
        significant = np.flatnonzero(np.abs(vectors[:, col]) > SIGN_TOL)
        if significant.size and vectors[significant[0], col] < 0:
            vectors[:, col] = -vectors[:, col]
    return vectors


def sym_eigen(s: np.ndarray) -> SymEigenResult:
    """
    All eigenpairs of a symmetric matrix, eigenvalues ascending.

    The input is symmetrized as (S + S^T) / 2 first, Gram products pick up
    asymmetry at rounding level.
    """
    s = np.asarray(s, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise NonSquare(f"Eigendecomposition needs a square matrix, got {s.shape}")
    _check_finite(s)

    asymmetry = np.linalg.norm(s - s.T)
    scale = np.linalg.norm(s)
    if asymmetry > ASYMMETRY_RTOL * max(scale, 1.0):
        logger.debug(
            "Symmetrizing input with relative asymmetry %.3e", asymmetry / scale
        )

    values, vectors = scipy.linalg.eigh((s + s.T) / 2)
    return SymEigenResult(values, _fix_column_signs(vectors))


def qr_decompose(m: np.ndarray, full: bool = False) -> QrResult:
    """
    QR decomposition with a nonnegative diagonal in R1.

    Only Q1 and R1 are formed unless full is set: the estimators call this on
    matrices with up to 1e5 rows where the square factor does not fit.
    """
    m = np.asarray(m, dtype=np.float64)
    rows, cols = m.shape
    if rows < cols:
        raise WideMatrix(f"QR needs rows >= cols, got {m.shape}")
    _check_finite(m)

    q, r = scipy.linalg.qr(m, mode="full" if full else "economic")
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    r_top = signs[:, None] * r[:cols, :]
    q = q.copy()
    q[:, :cols] *= signs

    if full:
        return QrResult(q, r_top, q[:, :cols], q[:, cols:])
    return QrResult(None, r_top, q, None)


def svd(m: np.ndarray) -> SvdResult:
    """
    Full singular value decomposition, singular values nonincreasing.
    Rank decisions are left to the caller.
    """
    m = np.asarray(m, dtype=np.float64)
    _check_finite(m)
    u, singular_values, vt = scipy.linalg.svd(m, full_matrices=True)
    return SvdResult(u, singular_values, vt.T)


def numerical_rank(singular_values: np.ndarray, rank_tol: float = RANK_TOL) -> int:
    if singular_values.size == 0 or singular_values[0] == 0:
        return 0
    return int(np.count_nonzero(singular_values > rank_tol * singular_values[0]))


def null_space_basis(m: np.ndarray, rank_tol: float = RANK_TOL) -> np.ndarray:
    """
    Orthonormal basis of the null space of m from its right singular vectors.

    Raises FullRank when the null space is empty.
    """
    if rank_tol <= 0:
        raise MatrixKernelException(f"rank_tol must be positive, got {rank_tol}")
    decomposition = svd(m)
    rank = numerical_rank(decomposition.singular_values, rank_tol)
    cols = decomposition.v.shape[0]
    logger.debug("Null space of a %s matrix: rank %d", m.shape, rank)
    if rank == cols:
        raise FullRank(f"Matrix of shape {m.shape} has full column rank {rank}")
    return decomposition.v[:, rank:]


def solve_linear(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """
    Solves A X = B for square, numerically nonsingular A
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NonSquare(f"Linear solve needs a square matrix, got {a.shape}")
    _check_finite(a)
    _check_finite(b)

    singular_values = scipy.linalg.svdvals(a)
    largest, smallest = singular_values[0], singular_values[-1]
    if smallest <= NEAR_SINGULAR_RTOL * largest:
        condition = np.inf if smallest == 0 else largest / smallest
        raise NearSingular(
            f"Matrix of shape {a.shape} is near singular (condition {condition:.3e})",
            condition,
        )

    try:
        return scipy.linalg.solve(a, b)
    except scipy.linalg.LinAlgError as e:
        raise NearSingular(
            f"Linear solve failed: {e}", largest / smallest
        ) from e
