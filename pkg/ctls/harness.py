"""
Monte-Carlo consistency sweeps.

A sweep draws `trials` instances for every row count m and runs each
configured estimator on them. The instance of cell (m, t) depends on
(base_seed, m, t) only, so all estimators see the same data and any cell can
be recomputed in isolation. Failed trials are recorded with the error name.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, NamedTuple, Optional, Tuple

import numpy as np

from ctls import config
from ctls.blocks import build_blocks, split_blocks
from ctls.consts import MAX_FAILURE_RATE
from ctls.ctls_exception import CtlsException
from ctls.enums import DesignKind, MuChoice, NoiseKind, TrialStatus
from ctls.estimators import (
    Diagnostics,
    EstimateResult,
    choose_mu,
    ctls_columns,
    ctls_rowcol,
    ctls_rows,
    projection_estimator,
    schur_gram,
    tls_solve,
)
from ctls.matrix_kernels import (
    dense,
    is_empty,
    null_space_basis,
    numerical_rank,
    solve_linear,
    svd,
    sym_eigen,
)
from ctls.model_gen import (
    InvalidPartition,
    ObservedData,
    PartitionSpec,
    RegressionModel,
    generate_model,
    noise_block,
    observe,
)
from ctls.preconditioning import precondition_rowcol
from ctls.utilities import derive_seed

logger = logging.getLogger(__name__)


class HarnessException(CtlsException):
    pass


class IncompatibleConfig(HarnessException):
    pass


def naive_ls(data: ObservedData) -> EstimateResult:
    """
    Ordinary least squares through the normal equations. Inconsistent under
    noise in A, kept as the baseline.
    """
    a, b = data.a, data.b
    x_hat = solve_linear(a.T @ a, a.T @ b)
    residual = a @ x_hat - b
    return EstimateResult(
        x_hat=x_hat,
        sigma2_hat=float(np.sum(residual**2)) / (data.partition.m * b.shape[1]),
        smallest_eigs=np.zeros(0),
        diagnostics=Diagnostics(),
    )


ESTIMATORS: Dict[str, Callable[[ObservedData], EstimateResult]] = {
    "naive_ls": naive_ls,
    "tls": lambda data: tls_solve(data.a, data.b),
    "ctls_columns": ctls_columns,
    "ctls_rows": ctls_rows,
    "ctls_rowcol": ctls_rowcol,
    "projection": projection_estimator,
}


def check_compatible(name: str, partition: PartitionSpec):
    if name not in ESTIMATORS:
        raise IncompatibleConfig(f"Unknown estimator {name}")
    j, k, n = partition.j, partition.k, partition.n
    if name == "tls" and (j or k):
        raise IncompatibleConfig("tls ignores exact rows and columns, use j = k = 0")
    if name == "ctls_columns" and (j or not 0 < k < n):
        raise IncompatibleConfig("ctls_columns needs j = 0 and 0 < k < n")
    if name == "ctls_rows" and (k or not 0 < j < n):
        raise IncompatibleConfig("ctls_rows needs k = 0 and 0 < j < n")


@dataclass
class SweepConfig:
    n: int
    ell: int
    j: int
    k: int
    m_values: List[int]
    trials: int
    sigma: float
    estimators: List[str]
    base_seed: int = 0
    design: DesignKind = DesignKind.IID
    noise: NoiseKind = NoiseKind.GAUSS

    def partition(self, m: int) -> PartitionSpec:
        return PartitionSpec(self.j, self.k, self.n, self.ell, m)

    def validate(self):
        if not self.m_values:
            raise IncompatibleConfig("m_values must not be empty")
        if any(low >= high for low, high in zip(self.m_values, self.m_values[1:])):
            raise IncompatibleConfig(
                f"m_values must be strictly ascending, got {self.m_values}"
            )
        if self.trials < 1:
            raise IncompatibleConfig(f"trials must be positive, got {self.trials}")
        if self.sigma < 0:
            raise IncompatibleConfig(f"sigma must be nonnegative, got {self.sigma}")
        if not self.estimators:
            raise IncompatibleConfig("No estimators configured")
        try:
            self.partition(self.m_values[0]).validate()
        except InvalidPartition as e:
            raise IncompatibleConfig(str(e)) from e
        for name in self.estimators:
            check_compatible(name, self.partition(self.m_values[0]))
        return self


@dataclass
class LemmaResiduals:
    # ||m^-1 F - m^-1 F_bar||_max, F shifted by mu
    lemma_f_residual: float
    # ||m^-1 P^T G P - m^-1 P^T G_bar P - sigma^2 I||_max
    lemma_pdp_residual: float
    # ||m^-1 E^T E - sigma^2 I||_max
    e_gram_residual: float
    # ||m^-1 C21_bar^T E||_max, absent without fixed columns
    c21_cross_residual: Optional[float] = None
    # smallest eigenvalue of m^-1 C21^T C21, reported never enforced
    c21_gram_min_eig: Optional[float] = None


def _max_norm(matrix: np.ndarray) -> float:
    return float(np.max(np.abs(matrix)))


def lemma_residuals(
    model: RegressionModel, data: ObservedData, mu_choice: Optional[MuChoice] = None
) -> LemmaResiduals:
    """
    Finite m counterparts of the limits the consistency argument rests on.
    The ground truth Gram matrices of the model stand in for the limits.
    """
    if mu_choice is None:
        mu_choice = MuChoice(config.MU_CHOICE)
    partition = data.partition
    m, ell, sigma2 = partition.m, partition.ell, model.sigma**2
    blocks = build_blocks(data)
    truth = split_blocks(
        np.hstack((model.a_bar, model.b_bar)), partition.j, partition.k
    )
    scratch = Diagnostics()

    # shifted Gram F against its noise free counterpart
    g_eigs = sym_eigen(schur_gram(blocks.c21, blocks.c22, scratch).gram).values
    mu = choose_mu(g_eigs[:ell], mu_choice)
    lower, lower_bar = blocks.lower(), truth.lower()
    f = lower.T @ lower
    f[partition.k :, partition.k :] -= mu * np.eye(partition.noisy_cols)
    f_residual = _max_norm((f - lower_bar.T @ lower_bar) / m)

    # Schur Gram over the null space of the exact rows, in the coordinates the
    # row and column constrained estimator works in
    reduced, reduced_c22_bar = blocks, truth.c22
    if partition.j and partition.k:
        reduced, record = precondition_rowcol(blocks)
        reduced_c22_bar = record.reduce_lower(truth.c22)
    if is_empty(reduced.c12):
        basis = np.eye(partition.noisy_cols)
    else:
        basis = null_space_basis(reduced.c12)
    gram = schur_gram(reduced.c21, reduced.c22, scratch).gram
    gram_bar = schur_gram(reduced.c21, reduced_c22_bar, scratch).gram
    pdp_residual = _max_norm(
        basis.T @ (gram - gram_bar) @ basis / m - sigma2 * np.eye(basis.shape[1])
    )

    noise = noise_block(model, data)
    residuals = LemmaResiduals(
        lemma_f_residual=f_residual,
        lemma_pdp_residual=pdp_residual,
        e_gram_residual=_max_norm(
            noise.T @ noise / m - sigma2 * np.eye(noise.shape[1])
        ),
    )
    if partition.k:
        c21_bar = dense(truth.c21)
        c21 = dense(blocks.c21)
        residuals.c21_cross_residual = _max_norm(c21_bar.T @ noise / m)
        residuals.c21_gram_min_eig = float(sym_eigen(c21.T @ c21 / m).values[0])
    return residuals


@dataclass
class TrialRecord:
    estimator: str
    m: int
    trial: int
    seed: int
    status: TrialStatus
    error: Optional[str] = None
    err: Optional[float] = None
    sigma2_hat: Optional[float] = None
    mu_over_m: Optional[float] = None
    lemma_f_residual: Optional[float] = None
    lemma_pdp_residual: Optional[float] = None
    e_gram_residual: Optional[float] = None
    c21_cross_residual: Optional[float] = None
    c21_gram_min_eig: Optional[float] = None
    # ||A1 X - B1||_F over the exact rows
    constraint_residual: Optional[float] = None
    diagnostics: dict = field(default_factory=dict)


@dataclass
class CellAggregate:
    estimator: str
    m: int
    trials: int
    failed: int
    median_err: Optional[float]
    q1_err: Optional[float]
    q3_err: Optional[float]
    median_sigma2_hat: Optional[float]


@dataclass
class ConvergenceTrace:
    sweep: SweepConfig
    cells: Dict[Tuple[str, int], List[TrialRecord]] = field(default_factory=dict)

    def records(self, estimator: str, m: int) -> List[TrialRecord]:
        return self.cells[(estimator, m)]

    def ok_values(self, estimator: str, m: int, name: str) -> np.ndarray:
        return np.array(
            [
                getattr(record, name)
                for record in self.records(estimator, m)
                if record.status is TrialStatus.OK
                and getattr(record, name) is not None
            ]
        )

    def failure_rate(self, estimator: str, m: int) -> float:
        records = self.records(estimator, m)
        failed = sum(record.status is TrialStatus.FAILED for record in records)
        return failed / len(records)

    def median(self, estimator: str, m: int, name: str = "err") -> float:
        values = self.ok_values(estimator, m, name)
        return float(np.median(values)) if values.size else float("nan")

    def aggregate(self, estimator: str, m: int) -> CellAggregate:
        records = self.records(estimator, m)
        errs = self.ok_values(estimator, m, "err")
        sigmas = self.ok_values(estimator, m, "sigma2_hat")
        q1, median, q3 = (
            np.percentile(errs, [25, 50, 75]) if errs.size else (None, None, None)
        )
        return CellAggregate(
            estimator=estimator,
            m=m,
            trials=len(records),
            failed=len(records) - errs.size,
            median_err=None if median is None else float(median),
            q1_err=None if q1 is None else float(q1),
            q3_err=None if q3 is None else float(q3),
            median_sigma2_hat=float(np.median(sigmas)) if sigmas.size else None,
        )

    def aggregate_rows(self) -> List[CellAggregate]:
        return [self.aggregate(estimator, m) for estimator, m in sorted(self.cells)]

    def all_records(self) -> List[TrialRecord]:
        return [
            record for key in sorted(self.cells) for record in self.cells[key]
        ]

    def exceeds_failure_rate(self) -> bool:
        return any(
            self.failure_rate(estimator, m) > MAX_FAILURE_RATE
            for estimator, m in self.cells
        )


def _diagnostics_snapshot(diagnostics: Diagnostics) -> dict:
    snapshot = asdict(diagnostics)
    if snapshot["g_eigs"] is not None:
        snapshot["g_eigs"] = [float(value) for value in snapshot["g_eigs"]]
    return snapshot


def _failed_records(sweep: SweepConfig, m: int, trial: int, seed: int, error):
    return [
        TrialRecord(name, m, trial, seed, TrialStatus.FAILED, type(error).__name__)
        for name in sweep.estimators
    ]


def run_trial(sweep: SweepConfig, m: int, trial: int) -> List[TrialRecord]:
    """
    Draws the instance of cell (m, trial) and runs every estimator on it
    """
    seed = derive_seed(sweep.base_seed, m, trial)
    try:
        model = generate_model(sweep.partition(m), seed, sweep.design, sweep.sigma)
    except CtlsException as e:
        logger.warning("Instance m=%d trial=%d is invalid: %s", m, trial, e)
        return _failed_records(sweep, m, trial, seed, e)
    data = observe(model, derive_seed(seed, "observe"), sweep.noise)

    residuals = None
    try:
        residuals = lemma_residuals(model, data)
    except CtlsException as e:
        logger.warning("Lemma residuals failed for m=%d trial=%d: %s", m, trial, e)

    j = sweep.j
    records = []
    for name in sweep.estimators:
        try:
            result = ESTIMATORS[name](data)
        except CtlsException as e:
            logger.warning(
                "%s failed on m=%d trial=%d: %s", name, m, trial, type(e).__name__
            )
            records.append(
                TrialRecord(name, m, trial, seed, TrialStatus.FAILED, type(e).__name__)
            )
            continue

        record = TrialRecord(
            estimator=name,
            m=m,
            trial=trial,
            seed=seed,
            status=TrialStatus.OK,
            err=float(np.linalg.norm(result.x_hat - model.x_true)),
            sigma2_hat=result.sigma2_hat,
            mu_over_m=None if result.mu is None else result.mu / m,
            diagnostics=_diagnostics_snapshot(result.diagnostics),
        )
        if j:
            record.constraint_residual = float(
                np.linalg.norm(data.a[:j] @ result.x_hat - data.b[:j])
            )
        if residuals is not None:
            record.e_gram_residual = residuals.e_gram_residual
            record.c21_cross_residual = residuals.c21_cross_residual
            record.c21_gram_min_eig = residuals.c21_gram_min_eig
        if residuals is not None and name == "projection":
            record.lemma_f_residual = residuals.lemma_f_residual
        if residuals is not None and name == "ctls_rowcol":
            record.lemma_pdp_residual = residuals.lemma_pdp_residual
        records.append(record)
    return records


def run_sweep(sweep: SweepConfig) -> ConvergenceTrace:
    sweep.validate()
    cells = [(m, trial) for m in sweep.m_values for trial in range(sweep.trials)]
    logger.info(
        "Sweeping %d cells over m=%s with %d thread(s)",
        len(cells),
        sweep.m_values,
        config.THREADS,
    )

    with ThreadPoolExecutor(max_workers=config.THREADS) as executor:
        results = list(executor.map(lambda cell: run_trial(sweep, *cell), cells))

    # keyed cells, so the trace does not depend on completion order
    trace = ConvergenceTrace(sweep)
    for records in results:
        for record in records:
            trace.cells.setdefault((record.estimator, record.m), []).append(record)
    for records in trace.cells.values():
        records.sort(key=lambda record: record.trial)

    for m in sweep.m_values:
        logger.info(
            "m=%d: %s",
            m,
            ", ".join(
                f"{name} median err {trace.median(name, m):.3e}"
                for name in sweep.estimators
            ),
        )
    return trace


class AssumptionCheck(NamedTuple):
    name: str
    value: str
    passed: Optional[bool]  # None for values that are only reported


def check_assumptions(data: ObservedData) -> List[AssumptionCheck]:
    """
    Checks the structural requirements of the constrained estimators on
    observed data and reports the conditioning of the fixed columns
    """
    partition = data.partition
    j, k, n, ell, m = (
        partition.j,
        partition.k,
        partition.n,
        partition.ell,
        partition.m,
    )
    checks = [
        AssumptionCheck("m > n + ell", f"{m} > {n + ell}", m > n + ell),
        AssumptionCheck("j <= n - k", f"{j} <= {n - k}", j <= n - k),
    ]
    if j:
        rank = numerical_rank(svd(data.a[:j]).singular_values)
        checks.append(
            AssumptionCheck("rank [A11 A12] = j", f"{rank} = {j}", rank == j)
        )
    if k:
        fixed = data.a[j:, :k]
        gram = fixed.T @ fixed / m
        eigenvalues = sym_eigen(gram).values
        condition = (
            np.inf if eigenvalues[0] <= 0 else eigenvalues[-1] / eigenvalues[0]
        )
        checks.append(
            AssumptionCheck(
                "min eig m^-1 C21^T C21",
                f"{eigenvalues[0]:.6e}",
                bool(eigenvalues[0] > 0),
            )
        )
        checks.append(AssumptionCheck("cond m^-1 C21^T C21", f"{condition:.6e}", None))
    return checks
