"""
Brute force checks of estimator outputs on small instances.

Nothing here goes through the estimator code paths: objectives are evaluated
in closed form with scipy directly, competitors are sampled on the feasible
manifold and, for the smallest instances, minimized numerically.
"""

import logging
from typing import List, NamedTuple

import numpy as np
import scipy.linalg
import scipy.optimize

from ctls.blocks import CBlocks
from ctls.ctls_exception import CtlsException

logger = logging.getLogger(__name__)

FEASIBILITY_RTOL = 1e-8


class OracleException(CtlsException):
    pass


class InfeasibleCandidate(OracleException):
    pass


class ObjectiveProbe(NamedTuple):
    x_candidate: np.ndarray
    # minimal ||dA||_F^2 + ||dB||_F^2 for the candidate, inf when infeasible
    objective: float
    feasible: bool


def _perturbation_cost(residual: np.ndarray, x_noisy: np.ndarray) -> float:
    """
    tr(R N^{-1} R^T) with N = X^T X + I, the least squares cost of absorbing
    each residual row by a perturbation of the columns X multiplies
    """
    ell = residual.shape[1]
    gram = x_noisy.T @ x_noisy + np.eye(ell)
    factor = scipy.linalg.cho_factor(gram)
    return float(np.trace(scipy.linalg.cho_solve(factor, residual.T @ residual)))


def tls_objective(a: np.ndarray, b: np.ndarray, x: np.ndarray) -> float:
    """
    min ||[dA dB]||_F^2 subject to (A + dA) X = B + dB, for a fixed X
    """
    if a.shape[1] != x.shape[0] or b.shape[1] != x.shape[1]:
        raise OracleException(
            f"Inconsistent shapes A {a.shape}, B {b.shape}, X {x.shape}"
        )
    return _perturbation_cost(a @ x - b, x)


def is_feasible(blocks: CBlocks, x: np.ndarray) -> bool:
    if not blocks.j:
        return True
    ell = x.shape[1]
    upper = blocks.upper()
    residual = upper @ np.vstack((x, -np.eye(ell)))
    b_upper = upper[:, -ell:]
    return bool(
        np.linalg.norm(residual) <= FEASIBILITY_RTOL * (1 + np.linalg.norm(b_upper))
    )


def constrained_objective(
    blocks: CBlocks, x: np.ndarray, strict: bool = False
) -> ObjectiveProbe:
    """
    Minimal perturbation of the noisy block [A22 B2] that makes X exact.

    The exact rows must already hold for X. Residual rows of the lower block
    can only be absorbed by the columns multiplying X2 (the last n - k rows of
    X) and -I, so N = X2^T X2 + I.
    """
    if not is_feasible(blocks, x):
        if strict:
            raise InfeasibleCandidate("Candidate violates the exact rows")
        return ObjectiveProbe(x, np.inf, False)

    ell = x.shape[1]
    residual = blocks.lower() @ np.vstack((x, -np.eye(ell)))
    return ObjectiveProbe(x, _perturbation_cost(residual, x[blocks.k :]), True)


def feasible_sampler(
    blocks: CBlocks, center: np.ndarray, radius: float, count: int, seed: int
) -> List[np.ndarray]:
    """
    Candidates center + W D with W spanning the null space of [A11 A12] and
    ||W D||_F = radius, so every candidate keeps the exact rows
    """
    n, ell = center.shape
    if blocks.j:
        directions = scipy.linalg.null_space(blocks.upper()[:, :n])
    else:
        directions = np.eye(n)

    rng = np.random.default_rng(seed)
    candidates = []
    for _ in range(count):
        step = directions @ rng.standard_normal((directions.shape[1], ell))
        norm = np.linalg.norm(step)
        if norm > 0:
            step *= radius / norm
        candidates.append(center + step)
    return candidates


def probe_local_optimality(
    blocks: CBlocks, x_hat: np.ndarray, radii, count: int, seed: int
) -> float:
    """
    Smallest objective increase over the sampled competitors of x_hat.
    Negative means a competitor was better.
    """
    baseline = constrained_objective(blocks, x_hat).objective
    best_gain = np.inf
    for index, radius in enumerate(radii):
        for candidate in feasible_sampler(blocks, x_hat, radius, count, seed + index):
            probe = constrained_objective(blocks, candidate)
            if probe.feasible:
                best_gain = min(best_gain, probe.objective - baseline)
    logger.debug("Smallest objective gain over %d competitors: %.3e", count, best_gain)
    return best_gain


def scan_tls_objective(a: np.ndarray, b: np.ndarray, grid: np.ndarray) -> float:
    """
    Global argmin of q(x) = ||A x - B||^2 / (1 + x^2) over a grid, n = ell = 1
    """
    if a.shape[1] != 1 or b.shape[1] != 1:
        raise OracleException("The grid scan needs n = ell = 1")
    a, b = a[:, 0], b[:, 0]
    # ||a x - b||^2 expanded so the scan is vectorized over the grid
    aa, ab, bb = a @ a, a @ b, b @ b
    values = (aa * grid**2 - 2 * ab * grid + bb) / (1 + grid**2)
    return float(grid[np.argmin(values)])


def minimize_perturbation(a: np.ndarray, b: np.ndarray, x: np.ndarray) -> float:
    """
    Minimizes ||[dA dB]||_F^2 subject to (A + dA) X = B + dB numerically.
    Only meant for tiny instances, to validate the closed form objectives.
    """
    rows, n = a.shape
    ell = b.shape[1]

    def unpack(values):
        return values[: rows * n].reshape(rows, n), values[rows * n :].reshape(
            rows, ell
        )

    def constraint(values):
        delta_a, delta_b = unpack(values)
        return ((a + delta_a) @ x - b - delta_b).ravel()

    result = scipy.optimize.minimize(
        lambda values: values @ values,
        np.zeros(rows * (n + ell)),
        method="SLSQP",
        constraints=[{"type": "eq", "fun": constraint}],
        options={"ftol": 1e-14, "maxiter": 500},
    )
    if not result.success:
        raise OracleException(f"Direct minimization failed: {result.message}")
    return float(result.fun)
