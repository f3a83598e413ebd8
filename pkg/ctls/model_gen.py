"""
Ground truth errors-in-variables instances.

A model is A_bar X = B_bar with the first j rows of [A_bar | B_bar] and the
first k columns of A_bar known exactly. Observing a model adds i.i.d. noise
with variance sigma^2 to the lower right block [A22 B2] only.
"""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ctls.ctls_exception import CtlsException
from ctls.enums import DesignKind, NoiseKind
from ctls.matrix_kernels import as_matrix, numerical_rank, svd

logger = logging.getLogger(__name__)

X_RANGE = 2.0
GOLDEN_RATIO_FRACTION = (np.sqrt(5.0) - 1.0) / 2.0


class ModelGenException(CtlsException):
    pass


class InvalidPartition(ModelGenException):
    pass


class NotPositiveDefinite(ModelGenException):
    pass


@dataclass(frozen=True)
class PartitionSpec:
    j: int  # exact leading rows
    k: int  # exact leading columns of A
    n: int
    ell: int
    m: int

    def validate(self):
        if self.j < 0 or self.k < 0:
            raise InvalidPartition(f"j and k must be nonnegative: {self}")
        if self.k > self.n:
            raise InvalidPartition(f"k must not exceed n: {self}")
        if self.j >= self.n:
            raise InvalidPartition(f"j must be smaller than n: {self}")
        if self.ell < 1:
            raise InvalidPartition(f"ell must be positive: {self}")
        if self.m <= self.n + self.ell:
            raise InvalidPartition(f"m must exceed n + ell: {self}")
        return self

    @property
    def noisy_cols(self) -> int:
        """Columns of the noisy block [A22 B2]"""
        return self.n - self.k + self.ell

    def with_rows(self, m: int) -> "PartitionSpec":
        return PartitionSpec(self.j, self.k, self.n, self.ell, m)


@dataclass
class RegressionModel:
    a_bar: np.ndarray
    b_bar: np.ndarray
    x_true: np.ndarray
    sigma: float
    partition: PartitionSpec


@dataclass
class ObservedData:
    a: np.ndarray
    b: np.ndarray
    partition: PartitionSpec

    @property
    def c(self) -> np.ndarray:
        return np.hstack((self.a, self.b))


def observed_partition(a: np.ndarray, b: np.ndarray, j: int, k: int) -> PartitionSpec:
    """
    Builds the partition of observed data read from files, where only j and k
    are modeling knowledge
    """
    if a.shape[0] != b.shape[0]:
        raise InvalidPartition(
            f"A has {a.shape[0]} rows but B has {b.shape[0]} rows"
        )
    return PartitionSpec(j, k, a.shape[1], b.shape[1], a.shape[0])


def _iid_design(rng: np.random.Generator, m: int, n: int) -> np.ndarray:
    return rng.standard_normal((m, n))


def _grid_design(m: int, n: int) -> np.ndarray:
    """
    Chebyshev columns T_0..T_{n-1} on a golden ratio sequence in [-1, 1]
    """
    points = 2.0 * np.modf(np.arange(1, m + 1) * GOLDEN_RATIO_FRACTION)[0] - 1.0
    return np.polynomial.chebyshev.chebvander(points, n - 1)


def generate_model(
    partition: PartitionSpec,
    seed: int,
    design: DesignKind = DesignKind.IID,
    sigma: float = 0.0,
) -> RegressionModel:
    """
    Draws X uniformly from [-2, 2] and a design A_bar, then sets B_bar = A_bar X.
    The same seed always produces the same model.
    """
    partition.validate()
    if sigma < 0:
        raise ModelGenException(f"sigma must be nonnegative, got {sigma}")

    rng = np.random.default_rng(seed)
    x_true = rng.uniform(-X_RANGE, X_RANGE, size=(partition.n, partition.ell))

    if design is DesignKind.IID:
        a_bar = _iid_design(rng, partition.m, partition.n)
    else:
        a_bar = _grid_design(partition.m, partition.n)
    b_bar = a_bar @ x_true

    if partition.j:
        upper = np.hstack((a_bar[: partition.j], b_bar[: partition.j]))
        upper_rank = numerical_rank(svd(upper).singular_values)
        if upper_rank != partition.j:
            raise InvalidPartition(
                f"The {partition.j} exact rows have rank {upper_rank}"
            )

    return RegressionModel(a_bar, b_bar, x_true, float(sigma), partition)


def _draw_noise(
    rng: np.random.Generator, shape, sigma: float, noise: NoiseKind
) -> np.ndarray:
    if noise is NoiseKind.GAUSS:
        return sigma * rng.standard_normal(shape)
    if noise is NoiseKind.UNIFORM:
        half_width = sigma * np.sqrt(3.0)
        return rng.uniform(-half_width, half_width, size=shape)
    return sigma * rng.choice(np.array([-1.0, 1.0]), size=shape)


def observe(
    model: RegressionModel, seed: int, noise: NoiseKind = NoiseKind.GAUSS
) -> ObservedData:
    """
    Adds noise to [A22 B2]; the first j rows and first k columns stay exact
    """
    partition = model.partition
    j, k, n = partition.j, partition.k, partition.n
    a = model.a_bar.copy()
    b = model.b_bar.copy()

    if model.sigma > 0:
        rng = np.random.default_rng(seed)
        e = _draw_noise(
            rng, (partition.m - j, partition.noisy_cols), model.sigma, noise
        )
        a[j:, k:] += e[:, : n - k]
        b[j:, :] += e[:, n - k :]

    return ObservedData(a, b, partition)


def noise_block(model: RegressionModel, data: ObservedData) -> np.ndarray:
    """
    Recovers E = [A22 B2] - [A22_bar B2_bar] from an observation of the model
    """
    j, k = model.partition.j, model.partition.k
    return np.hstack(
        (data.a[j:, k:] - model.a_bar[j:, k:], data.b[j:, :] - model.b_bar[j:, :])
    )


def whiten(data: ObservedData, sigma_cov: np.ndarray):
    """
    Reduces a general noise covariance Sigma = L L^T to the identity by right
    multiplying the noisy columns with L^{-T}.

    Returns the whitened data and the (n+ell) x (n+ell) transform that maps a
    solution [X'; -I] of the whitened problem back to the original one.
    """
    partition = data.partition
    k, n = partition.k, partition.n
    sigma_cov = as_matrix(sigma_cov)
    if sigma_cov.shape != (partition.noisy_cols, partition.noisy_cols):
        raise ModelGenException(
            f"Noise covariance must be {partition.noisy_cols} square, "
            f"got {sigma_cov.shape}"
        )
    try:
        lower = scipy.linalg.cholesky((sigma_cov + sigma_cov.T) / 2, lower=True)
    except scipy.linalg.LinAlgError as e:
        raise NotPositiveDefinite("Noise covariance is not positive definite") from e

    noisy = data.c[:, k:]
    # noisy @ L^{-T} == (L^{-1} noisy^T)^T
    whitened = scipy.linalg.solve_triangular(lower, noisy.T, lower=True).T
    a = np.hstack((data.a[:, :k], whitened[:, : n - k]))
    b = whitened[:, n - k :].copy()

    transform = np.eye(n + partition.ell)
    transform[k:, k:] = scipy.linalg.solve_triangular(
        lower.T, np.eye(partition.noisy_cols), lower=False
    )
    logger.debug("Whitened %d noisy columns", partition.noisy_cols)
    return ObservedData(a, b, partition), transform


def unwhiten_estimate(x_hat: np.ndarray, transform: np.ndarray) -> np.ndarray:
    """
    Maps X' estimated on whitened data to the original coordinates:
    Y = T [X'; -I] and X = -Y_upper Y_lower^{-1}
    """
    ell = x_hat.shape[1]
    y = transform @ np.vstack((x_hat, -np.eye(ell)))
    upper, lower = y[:-ell], y[-ell:]
    return -scipy.linalg.solve(lower.T, upper.T).T
