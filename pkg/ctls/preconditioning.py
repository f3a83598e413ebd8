"""
Zeroes the upper left block of a row and column constrained problem.

With A11 = U S V^T of rank r, the rows of the exact block are rotated by U^T
and the fixed columns by V, so the upper left block becomes diag(s_1..s_r).
Gaussian elimination against those r pivot rows clears the first r columns of
the lower left block. Pivot rows and columns then decouple from the rest: the
problem left over has j - r exact rows, k - r fixed columns and an upper left
block that is exactly zero.

The elimination only adds multiples of exact rows to noisy rows. A
perturbation of the noisy block is not affected by it, so the minimal
perturbation of the reduced problem is the one of the original problem.
"""

import logging
from dataclasses import dataclass

import numpy as np

from ctls.blocks import CBlocks
from ctls.consts import RANK_TOL
from ctls.ctls_exception import CtlsException
from ctls.matrix_kernels import block, is_empty, numerical_rank, svd

logger = logging.getLogger(__name__)


class PreconditioningException(CtlsException):
    pass


@dataclass
class PreconditionRecord:
    u: np.ndarray  # j x j
    v: np.ndarray  # k x k
    pivots: np.ndarray  # s_1..s_r
    pivot_rows: np.ndarray  # first r rows of U^T C12
    multiplier: np.ndarray  # (m-j) x r, A21 V_r S_r^{-1}
    transformed: CBlocks  # the full problem after rotation and elimination

    @property
    def rank(self) -> int:
        return self.pivots.size

    @property
    def k(self) -> int:
        return self.v.shape[0]

    def reduce_lower(self, c22: np.ndarray) -> np.ndarray:
        """
        Applies the elimination of the pivot rows to another lower right block
        """
        if not self.rank:
            return c22
        return c22 - self.multiplier @ self.pivot_rows

    def recover(self, x_reduced: np.ndarray) -> np.ndarray:
        """
        Maps the solution of the reduced problem back to the original
        coordinates.

        x_reduced stacks the k - r reduced fixed-column rows over the n - k
        free rows. The pivot coordinates follow from the exact pivot rows:
        S_r X'_r + pivot_rows [X_free; -I] = 0.
        """
        k_reduced = self.k - self.rank
        x_top, x_free = x_reduced[:k_reduced], x_reduced[k_reduced:]
        ell = x_reduced.shape[1]
        if self.rank:
            y_free = np.vstack((x_free, -np.eye(ell)))
            x_pivot = -(self.pivot_rows @ y_free) / self.pivots[:, None]
            x_rotated = np.vstack((x_pivot, x_top))
        else:
            x_rotated = x_top
        return np.vstack((self.v @ x_rotated, x_free))


def precondition_rowcol(blocks: CBlocks, rank_tol: float = RANK_TOL):
    """
    Returns the reduced blocks, whose upper left block is exactly zero (or
    empty), and the record to map the reduced solution back.
    """
    if is_empty(blocks.c11):
        raise PreconditioningException(
            f"Preconditioning needs j > 0 and k > 0, got j={blocks.j}, k={blocks.k}"
        )
    j, k = blocks.j, blocks.k
    a11, c12, a21, c22 = blocks.c11, blocks.c12, blocks.c21, blocks.c22

    decomposition = svd(a11)
    rank = numerical_rank(decomposition.singular_values, rank_tol)
    if rank:
        u, v = decomposition.u, decomposition.v
    else:
        u, v = np.eye(j), np.eye(k)
    pivots = decomposition.singular_values[:rank].copy()
    logger.debug("Preconditioning A11 of shape %s: rank %d", a11.shape, rank)

    rotated_c12 = u.T @ c12
    rotated_a21 = a21 @ v
    pivot_rows = rotated_c12[:rank]
    multiplier = rotated_a21[:, :rank] / pivots

    rotated_a11 = np.zeros((j, k))
    rotated_a11[np.arange(rank), np.arange(rank)] = pivots
    eliminated_a21 = rotated_a21.copy()
    eliminated_a21[:, :rank] = 0.0
    eliminated_c22 = c22 - multiplier @ pivot_rows if rank else c22.copy()

    record = PreconditionRecord(
        u=u,
        v=v,
        pivots=pivots,
        pivot_rows=pivot_rows,
        multiplier=multiplier,
        transformed=CBlocks(rotated_a11, rotated_c12, eliminated_a21, eliminated_c22),
    )

    reduced = CBlocks(
        c11=block(np.zeros((j - rank, k - rank))),
        c12=block(rotated_c12[rank:]),
        c21=block(rotated_a21[:, rank:]),
        c22=eliminated_c22,
    )
    return reduced, record
