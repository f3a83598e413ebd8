"""
Errors-in-variables estimators for A X ~ B.

Every estimator returns X through the same eigen-subspace formula: with Z the
(n+ell) x ell basis of the chosen subspace, X = -Z_upper Z_lower^{-1}. They
differ in the matrix that subspace is taken from:

    tls_solve             C^T C
    ctls_columns          the Schur Gram G of the free columns
    ctls_rowcol           G restricted to the null space of the exact rows
    projection_estimator  the shifted Gram F restricted to that null space

No inverse is ever formed explicitly, all of them are linear solves.
"""

import logging
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
import scipy.linalg

from ctls import config
from ctls.blocks import CBlocks, build_blocks, has_fixed_rows
from ctls.consts import EIG_GAP_RTOL, NEAR_SINGULAR_RTOL
from ctls.ctls_exception import CtlsException
from ctls.enums import Method, MuChoice
from ctls.matrix_kernels import (
    FullRank,
    NearSingular,
    QrResult,
    as_matrix,
    is_empty,
    numerical_rank,
    null_space_basis,
    qr_decompose,
    solve_linear,
    svd,
    sym_eigen,
)
from ctls.model_gen import ObservedData
from ctls.preconditioning import precondition_rowcol

logger = logging.getLogger(__name__)


class EstimatorException(CtlsException):
    pass


class LowerBlockSingular(EstimatorException):
    pass


class RankDeficientFixedColumns(EstimatorException):
    pass


class RankDeficientUpperRows(EstimatorException):
    pass


UpperRowsRankDeficient = RankDeficientUpperRows


class IncompatiblePartition(EstimatorException):
    pass


@dataclass
class Diagnostics:
    z_lower_min_singular: Optional[float] = None
    # cond(C21^T C21), only with fixed columns
    gram_condition: Optional[float] = None
    eig_gap: Optional[float] = None
    eig_gap_degenerate: bool = False
    precondition_rank: Optional[int] = None
    subspace_dim: Optional[int] = None
    g_eigs: Optional[np.ndarray] = None
    upper_rank: Optional[int] = None


@dataclass
class EstimateResult:
    x_hat: np.ndarray
    sigma2_hat: float
    smallest_eigs: np.ndarray
    diagnostics: Diagnostics = field(default_factory=Diagnostics)
    mu: Optional[float] = None


class SchurGram(NamedTuple):
    gram: np.ndarray
    # C22 with its component in range(C21) removed
    residual: np.ndarray
    qr: Optional[QrResult]


def schur_gram(c21, c22: np.ndarray, diagnostics: Diagnostics) -> SchurGram:
    """
    G = C22^T C22 - C22^T C21 (C21^T C21)^{-1} C21^T C22.

    Evaluated as W^T W with W = C22 - Q1 Q1^T C22 from the economic QR of C21,
    which avoids the cancellation of the subtraction. Without fixed columns
    G = C22^T C22.

    Raises NearSingular when C21^T C21 is numerically singular.
    """
    if is_empty(c21):
        return SchurGram(c22.T @ c22, c22, None)

    qr = qr_decompose(c21)
    singular_values = scipy.linalg.svdvals(qr.r_top)
    condition = (
        np.inf
        if singular_values[-1] == 0
        else (singular_values[0] / singular_values[-1]) ** 2
    )
    diagnostics.gram_condition = float(condition)
    logger.debug("Condition of C21^T C21: %.3e", condition)
    if condition * NEAR_SINGULAR_RTOL >= 1.0:
        raise NearSingular(
            f"C21^T C21 is near singular (condition {condition:.3e})", condition
        )

    residual = c22 - qr.q1 @ (qr.q1.T @ c22)
    return SchurGram(residual.T @ residual, residual, qr)


def _record_eig_gap(
    values: np.ndarray, ell: int, scale: float, diagnostics: Diagnostics
):
    if values.size <= ell:
        return
    gap = float(values[ell] - values[ell - 1])
    diagnostics.eig_gap = gap
    if gap < EIG_GAP_RTOL * scale:
        diagnostics.eig_gap_degenerate = True
        logger.warning(
            "Eigenvalues %d and %d are not separated (gap %.3e), "
            "the solution subspace is not unique",
            ell,
            ell + 1,
            gap,
        )


def subspace_solution(z: np.ndarray, ell: int, diagnostics: Diagnostics):
    """
    X = -Z_upper Z_lower^{-1} for an (n+ell) x ell subspace basis Z
    """
    z_upper, z_lower = z[:-ell], z[-ell:]
    diagnostics.z_lower_min_singular = float(scipy.linalg.svdvals(z_lower)[-1])
    try:
        return -solve_linear(z_lower.T, z_upper.T).T
    except NearSingular as e:
        raise LowerBlockSingular(
            f"Lower block of the solution subspace is singular "
            f"(condition {e.condition:.3e}), the instance is nongeneric"
        ) from e


def tls_correction(c: np.ndarray, x: np.ndarray) -> np.ndarray:
    """
    The minimal perturbation dC with (C + dC) [X; -I] = 0:
    dC = -C Y (Y^T Y)^{-1} Y^T with Y = [X; -I]
    """
    ell = x.shape[1]
    y = np.vstack((x, -np.eye(ell)))
    return -(c @ y) @ scipy.linalg.solve(y.T @ y, y.T, assume_a="pos")


def _check_rows(a: np.ndarray, b: np.ndarray):
    if a.shape[0] != b.shape[0]:
        raise IncompatiblePartition(
            f"A has {a.shape[0]} rows but B has {b.shape[0]} rows"
        )


def tls_solve(a: np.ndarray, b: np.ndarray) -> EstimateResult:
    a, b = as_matrix(a), as_matrix(b)
    _check_rows(a, b)
    rows = a.shape[0]
    ell = b.shape[1]
    c = np.hstack((a, b))
    f = c.T @ c

    eigen = sym_eigen(f)
    diagnostics = Diagnostics(subspace_dim=f.shape[0])
    _record_eig_gap(eigen.values, ell, np.linalg.norm(f), diagnostics)

    smallest = eigen.values[:ell]
    x_hat = subspace_solution(eigen.vectors[:, :ell], ell, diagnostics)
    return EstimateResult(
        x_hat=x_hat,
        sigma2_hat=max(float(np.mean(smallest)), 0.0) / rows,
        smallest_eigs=smallest,
        diagnostics=diagnostics,
    )


def ctls_columns(data: ObservedData) -> EstimateResult:
    """
    TLS where the first k columns of A are exact.

    The fixed columns are projected out through the QR of A1, the remaining
    small TLS problem gives X2, and X1 is solved from the first block row of
    the corrected data: R1 X1 = -Q1^T (C22 + dC22) [X2; -I].
    """
    partition = data.partition
    if partition.j != 0 or not 0 < partition.k < partition.n:
        raise IncompatiblePartition(
            f"Column constrained TLS needs j = 0 and 0 < k < n, got {partition}"
        )
    ell = partition.ell
    blocks = build_blocks(data)

    diagnostics = Diagnostics()
    try:
        schur = schur_gram(blocks.c21, blocks.c22, diagnostics)
    except NearSingular as e:
        raise RankDeficientFixedColumns(
            f"Fixed columns are rank deficient (condition {e.condition:.3e})"
        ) from e

    eigen = sym_eigen(schur.gram)
    diagnostics.subspace_dim = schur.gram.shape[0]
    _record_eig_gap(eigen.values, ell, np.linalg.norm(schur.gram), diagnostics)
    smallest = eigen.values[:ell]
    x_free = subspace_solution(eigen.vectors[:, :ell], ell, diagnostics)

    y = np.vstack((x_free, -np.eye(ell)))
    corrected = blocks.c22 + tls_correction(schur.residual, x_free)
    x_fixed = solve_linear(schur.qr.r_top, -(schur.qr.q1.T @ (corrected @ y)))

    return EstimateResult(
        x_hat=np.vstack((x_fixed, x_free)),
        sigma2_hat=max(float(np.mean(smallest)), 0.0) / partition.m,
        smallest_eigs=smallest,
        diagnostics=diagnostics,
    )


def ctls_rows(data: ObservedData) -> EstimateResult:
    """
    TLS where the first j rows of [A | B] are exact
    """
    partition = data.partition
    if partition.k != 0 or not 0 < partition.j < partition.n:
        raise IncompatiblePartition(
            f"Row constrained TLS needs k = 0 and 0 < j < n, got {partition}"
        )
    return ctls_rowcol(data)


def _upper_rank(a_upper: np.ndarray, diagnostics: Diagnostics):
    rank = numerical_rank(svd(a_upper).singular_values)
    diagnostics.upper_rank = rank
    if rank != a_upper.shape[0]:
        raise RankDeficientUpperRows(
            f"The {a_upper.shape[0]} exact rows of A have rank {rank}, "
            f"select independent rows first"
        )


def _row_null_space(upper: np.ndarray, diagnostics: Diagnostics) -> np.ndarray:
    """
    Orthonormal basis of the null space of the exact rows, of dimension
    cols - rows when the rows are independent
    """
    rows, cols = upper.shape
    try:
        basis = null_space_basis(upper)
    except FullRank as e:
        raise RankDeficientUpperRows(
            f"Exact rows of shape {upper.shape} leave no free direction"
        ) from e
    if diagnostics.upper_rank is None:
        diagnostics.upper_rank = cols - basis.shape[1]
    if basis.shape[1] != cols - rows:
        raise RankDeficientUpperRows(
            f"Exact rows have rank {cols - basis.shape[1]}, expected {rows}"
        )
    diagnostics.subspace_dim = basis.shape[1]
    return basis


def _rowcol_reduced(blocks: CBlocks, ell: int, diagnostics: Diagnostics):
    """
    Solves a row and column constrained problem whose upper left block is
    zero. Returns the stacked solution and the ell smallest Ritz values.
    """
    width = blocks.c22.shape[1]
    if has_fixed_rows(blocks):
        basis = _row_null_space(blocks.c12, diagnostics)
        if basis.shape[1] < ell:
            raise IncompatiblePartition(
                f"Only {basis.shape[1]} free directions left for {ell} right "
                f"hand sides"
            )
    else:
        basis = np.eye(width)
        diagnostics.subspace_dim = width

    schur = schur_gram(blocks.c21, blocks.c22, diagnostics)
    projected = basis.T @ schur.gram @ basis
    ritz = sym_eigen(projected)
    _record_eig_gap(ritz.values, ell, np.linalg.norm(schur.gram), diagnostics)

    z = basis @ ritz.vectors[:, :ell]
    x_free = subspace_solution(z, ell, diagnostics)

    if schur.qr is None:
        return x_free, ritz.values[:ell]

    y = np.vstack((x_free, -np.eye(ell)))
    x_fixed = solve_linear(schur.qr.r_top, -(schur.qr.q1.T @ (blocks.c22 @ y)))
    return np.vstack((x_fixed, x_free)), ritz.values[:ell]


def ctls_rowcol(data: ObservedData) -> EstimateResult:
    """
    TLS with the first j rows of [A | B] and the first k columns of A exact.

    With both present the upper left block is zeroed first. The free part of
    the solution is the Ritz subspace of G over the null space of the exact
    rows, the fixed-column part is solved from C21^T [C21 C22] [X; -I] = 0.
    """
    partition = data.partition
    j, k, ell = partition.j, partition.k, partition.ell
    if j == 0 and k == 0:
        return tls_solve(data.a, data.b)

    diagnostics = Diagnostics()
    if j:
        _upper_rank(data.a[:j], diagnostics)

    blocks = build_blocks(data)
    record = None
    if j and k:
        blocks, record = precondition_rowcol(blocks)
        diagnostics.precondition_rank = record.rank

    x_reduced, smallest = _rowcol_reduced(blocks, ell, diagnostics)
    x_hat = record.recover(x_reduced) if record else x_reduced

    return EstimateResult(
        x_hat=x_hat,
        sigma2_hat=max(float(np.mean(smallest)), 0.0) / partition.m,
        smallest_eigs=smallest,
        diagnostics=diagnostics,
    )


def choose_mu(g_eigs: np.ndarray, choice: MuChoice) -> float:
    if choice is MuChoice.MIN:
        return float(g_eigs[0])
    if choice is MuChoice.MAX:
        return float(g_eigs[-1])
    return float(np.mean(g_eigs))


def projection_estimator(
    data: ObservedData, mu_choice: Optional[MuChoice] = None
) -> EstimateResult:
    """
    Rayleigh-Ritz estimator.

    mu is taken from the ell smallest eigenvalues of the Schur Gram G and
    shifted off the noisy diagonal block of F = C_lower^T C_lower. X is read
    off the ell smallest Ritz vectors of F over the null space of the exact
    rows, and mu / m estimates sigma^2.
    """
    if mu_choice is None:
        mu_choice = MuChoice(config.MU_CHOICE)
    partition = data.partition
    j, k, ell = partition.j, partition.k, partition.ell
    blocks = build_blocks(data)
    diagnostics = Diagnostics()

    schur = schur_gram(blocks.c21, blocks.c22, diagnostics)
    g_eigs = sym_eigen(schur.gram).values[:ell]
    diagnostics.g_eigs = g_eigs
    mu = choose_mu(g_eigs, mu_choice)
    logger.debug("Projection shift mu = %.6e (%s)", mu, mu_choice.value)

    lower = blocks.lower()
    f = lower.T @ lower
    f[k:, k:] -= mu * np.eye(f.shape[0] - k)

    if j:
        basis = _row_null_space(blocks.upper(), diagnostics)
    else:
        basis = np.eye(f.shape[0])
        diagnostics.subspace_dim = f.shape[0]

    ritz = sym_eigen(basis.T @ f @ basis)
    _record_eig_gap(ritz.values, ell, np.linalg.norm(f), diagnostics)
    z = basis @ ritz.vectors[:, :ell]

    return EstimateResult(
        x_hat=subspace_solution(z, ell, diagnostics),
        sigma2_hat=max(mu, 0.0) / partition.m,
        smallest_eigs=ritz.values[:ell],
        diagnostics=diagnostics,
        mu=mu,
    )


def estimate_sigma(result: EstimateResult, m: int) -> float:
    """
    mu / m for the projection estimator, the mean of the ell smallest
    eigenvalues over m otherwise
    """
    if result.mu is not None:
        value = result.mu
    else:
        value = float(np.mean(result.smallest_eigs))
    return max(value, 0.0) / m


def estimate(
    data: ObservedData, method: Method, mu_choice: Optional[MuChoice] = None
) -> EstimateResult:
    if method is Method.TLS:
        return tls_solve(data.a, data.b)
    if method is Method.CTLS_COLS:
        return ctls_columns(data)
    if method is Method.CTLS_ROWS:
        return ctls_rows(data)
    if method is Method.CTLS_ROWCOL:
        return ctls_rowcol(data)
    return projection_estimator(data, mu_choice)
