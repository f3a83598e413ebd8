import csv
import logging
from pathlib import Path
from typing import Optional

import numpy as np
from tabulate import tabulate

from ctls.consts import FLOAT_FORMAT
from ctls.estimators import EstimateResult
from ctls.harness import ConvergenceTrace

logger = logging.getLogger(__name__)

TRACE_CSV_COLUMNS = (
    "estimator",
    "m",
    "trial",
    "seed",
    "status",
    "err",
    "sigma2_hat",
    "mu_over_m",
    "lemma_f_residual",
    "lemma_pdp_residual",
    "e_gram_residual",
    "c21_cross_residual",
    "c21_gram_min_eig",
)

AGGREGATE_HEADERS = (
    "Estimator",
    "m",
    "Trials",
    "Failed",
    "Median err",
    "IQR err",
    "Median sigma2",
)


def _format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return FLOAT_FORMAT.format(value)
    return str(value)


def aggregate_table(trace: ConvergenceTrace) -> str:
    rows = []
    for cell in trace.aggregate_rows():
        iqr = (
            None
            if cell.median_err is None
            else f"[{cell.q1_err:.3e}, {cell.q3_err:.3e}]"
        )
        rows.append(
            (
                cell.estimator,
                cell.m,
                cell.trials,
                cell.failed,
                cell.median_err,
                iqr,
                cell.median_sigma2_hat,
            )
        )
    return tabulate(rows, AGGREGATE_HEADERS, tablefmt="pretty", floatfmt=".3e")


def write_trace_csv(trace: ConvergenceTrace, path: Path):
    """
    One row per trial in TRACE_CSV_COLUMNS order, the failed ones carry the
    error name in the err column
    """
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(TRACE_CSV_COLUMNS)
        for record in trace.all_records():
            err = record.error if record.err is None else record.err
            writer.writerow(
                (
                    record.estimator,
                    record.m,
                    record.trial,
                    record.seed,
                    record.status.value,
                    _format_value(err),
                    _format_value(record.sigma2_hat),
                    _format_value(record.mu_over_m),
                    _format_value(record.lemma_f_residual),
                    _format_value(record.lemma_pdp_residual),
                    _format_value(record.e_gram_residual),
                    _format_value(record.c21_cross_residual),
                    _format_value(record.c21_gram_min_eig),
                )
            )
    logger.info("Wrote %d trace rows to %s", len(trace.all_records()), path)


def write_gnuplot(trace: ConvergenceTrace, path: Path):
    """
    One data block per estimator, selected with `index` in gnuplot:
    m, median err, first quartile, third quartile, median sigma2_hat
    """
    blocks = []
    for estimator in trace.sweep.estimators:
        lines = [f"# {estimator}", "# m median_err q1_err q3_err median_sigma2_hat"]
        for m in trace.sweep.m_values:
            cell = trace.aggregate(estimator, m)
            values = (
                cell.median_err,
                cell.q1_err,
                cell.q3_err,
                cell.median_sigma2_hat,
            )
            formatted = [
                "NaN" if value is None else FLOAT_FORMAT.format(value)
                for value in values
            ]
            lines.append(" ".join([str(m)] + formatted))
        blocks.append("\n".join(lines))
    # gnuplot separates indexed data blocks by two blank lines
    Path(path).write_text("\n\n\n".join(blocks) + "\n")
    logger.info("Wrote gnuplot data for %d estimators to %s", len(blocks), path)


def _format_vector(values: Optional[np.ndarray]) -> str:
    if values is None:
        return "-"
    return " ".join(FLOAT_FORMAT.format(value) for value in values)


def diagnostics_block(result: EstimateResult) -> str:
    diagnostics = result.diagnostics
    rows = [
        ("sigma2_hat", FLOAT_FORMAT.format(result.sigma2_hat)),
        ("mu", "-" if result.mu is None else FLOAT_FORMAT.format(result.mu)),
        ("smallest_eigs", _format_vector(result.smallest_eigs)),
        ("z_lower_min_singular", diagnostics.z_lower_min_singular),
        ("gram_condition", diagnostics.gram_condition),
        ("eig_gap", diagnostics.eig_gap),
        ("eig_gap_degenerate", diagnostics.eig_gap_degenerate),
        ("precondition_rank", diagnostics.precondition_rank),
        ("subspace_dim", diagnostics.subspace_dim),
        ("upper_rank", diagnostics.upper_rank),
    ]
    return "\n".join(
        f"# {name}: {'-' if value is None else value}" for name, value in rows
    )
