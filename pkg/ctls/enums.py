from enum import Enum


class DesignKind(Enum):
    """
    How the noise-free design matrix is produced
    """

    IID = "iid"  # rows drawn i.i.d. from a standard Gaussian
    GRID = "grid"  # deterministic Chebyshev design on a low-discrepancy grid


class NoiseKind(Enum):
    """
    Distribution of the noise entries; all kinds have mean 0 and variance sigma^2
    """

    GAUSS = "gauss"
    UNIFORM = "uniform"
    RADEMACHER = "rademacher"


class MuChoice(Enum):
    """
    Which point of [lambda_1, lambda_ell] the projection estimator shifts by
    """

    MIN = "min"
    MEAN = "mean"
    MAX = "max"


class Method(Enum):
    """
    Estimation methods exposed on the command line
    """

    TLS = "tls"
    CTLS_COLS = "ctls-cols"
    CTLS_ROWS = "ctls-rows"
    CTLS_ROWCOL = "ctls-rowcol"
    PROJECTION = "projection"


class MatrixFormat(Enum):
    CSV = "csv"
    MTXJSON = "mtxjson"


class TrialStatus(Enum):
    OK = "ok"
    FAILED = "failed"
