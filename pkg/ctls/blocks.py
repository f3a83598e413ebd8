from dataclasses import dataclass

import numpy as np

from ctls.matrix_kernels import Block, block, dense, is_empty
from ctls.model_gen import InvalidPartition, ObservedData


@dataclass
class CBlocks:
    """
    The 2 x 2 block partition of C = [A | B]:

        [ c11  c12 ]     c11 = A11 (j x k),      c12 = [A12 B1]
        [ c21  c22 ]     c21 = A21 ((m-j) x k),  c22 = [A22 B2]

    Only c22 carries noise. Blocks vanish as EmptyBlock when j = 0 or k = 0.
    """

    c11: Block
    c12: Block
    c21: Block
    c22: Block

    @property
    def j(self) -> int:
        return self.c11.shape[0]

    @property
    def k(self) -> int:
        return self.c11.shape[1]

    @property
    def width(self) -> int:
        """n + ell"""
        return self.k + self.c22.shape[1]

    def upper(self) -> np.ndarray:
        """[C11 C12] as a dense j x (n+ell) array"""
        return np.hstack((dense(self.c11), dense(self.c12)))

    def lower(self) -> np.ndarray:
        """[C21 C22] as a dense (m-j) x (n+ell) array"""
        return np.hstack((dense(self.c21), dense(self.c22)))

    def assemble(self) -> np.ndarray:
        return np.vstack((self.upper(), self.lower()))


def split_blocks(c: np.ndarray, j: int, k: int) -> CBlocks:
    if not 0 <= j < c.shape[0] or not 0 <= k < c.shape[1]:
        raise InvalidPartition(f"Cannot split a {c.shape} matrix at j={j}, k={k}")
    return CBlocks(
        c11=block(c[:j, :k]),
        c12=block(c[:j, k:]),
        c21=block(c[j:, :k]),
        c22=block(c[j:, k:]),
    )


def build_blocks(data: ObservedData) -> CBlocks:
    return split_blocks(data.c, data.partition.j, data.partition.k)


def has_fixed_rows(blocks: CBlocks) -> bool:
    return not is_empty(blocks.c12)
