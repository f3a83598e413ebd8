import argparse
import json
import logging
import sys
from pathlib import Path

from marshmallow import ValidationError
from tabulate import tabulate

from ctls import config
from ctls.ctls_exception import CtlsException
from ctls.enums import DesignKind, MatrixFormat, Method, MuChoice, NoiseKind
from ctls.estimators import estimate
from ctls.harness import IncompatibleConfig, check_assumptions, run_sweep
from ctls.matrix_file import (
    MatrixFileException,
    format_matrix,
    infer_format,
    read_matrix,
    write_matrix,
)
from ctls.model_gen import (
    ModelGenException,
    ObservedData,
    PartitionSpec,
    generate_model,
    observe,
    observed_partition,
    unwhiten_estimate,
    whiten,
)
from ctls.report import (
    aggregate_table,
    diagnostics_block,
    write_gnuplot,
    write_trace_csv,
)
from ctls.schemas import ModelMetadataSchema, SweepConfigSchema, TraceSchema
from ctls.utilities import derive_seed

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_ESTIMATOR_ERROR = 2
EXIT_FAILURE_RATE = 3


class CliArgumentParser(argparse.ArgumentParser):
    """
    Flag errors exit with 1 like every other input error
    """

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT_ERROR, f"{self.prog}: error: {message}\n")


def setup_logging():
    logging.basicConfig(format="%(levelname)s - %(message)s", level=config.LOG_LEVEL)


def _values(enum):
    return [member.value for member in enum]


def _add_data_flags(parser):
    parser.add_argument("--a", required=True, type=Path, help="Matrix A (csv or .json)")
    parser.add_argument("--b", required=True, type=Path, help="Matrix B (csv or .json)")
    parser.add_argument(
        "--j", type=int, default=0, help="Number of exact leading rows of [A | B]"
    )
    parser.add_argument(
        "--k", type=int, default=0, help="Number of exact leading columns of A"
    )


def parse_args(argv=None):
    parser = CliArgumentParser(prog="ctls")
    subparsers = parser.add_subparsers(dest="which", required=True)

    parser_estimate = subparsers.add_parser(
        "estimate", help="Estimates X from observed A and B"
    )
    _add_data_flags(parser_estimate)
    parser_estimate.add_argument(
        "--method", required=True, choices=_values(Method), help="The estimator"
    )
    parser_estimate.add_argument(
        "--mu",
        choices=_values(MuChoice),
        default=config.MU_CHOICE,
        help="Shift of the projection estimator",
    )
    parser_estimate.add_argument(
        "--sigma-cov",
        type=Path,
        help="Noise covariance of the noisy columns, whitened before estimating",
    )
    parser_estimate.add_argument(
        "--out", type=Path, help="Where to write X, stdout if not specified"
    )
    parser_estimate.add_argument(
        "--format", choices=_values(MatrixFormat), help="Output format of X"
    )

    parser_simulate = subparsers.add_parser(
        "simulate", help="Generates a synthetic errors-in-variables instance"
    )
    for name in ("n", "ell", "m"):
        parser_simulate.add_argument(f"--{name}", type=int, required=True)
    parser_simulate.add_argument("--j", type=int, default=0)
    parser_simulate.add_argument("--k", type=int, default=0)
    parser_simulate.add_argument("--sigma", type=float, default=0.0)
    parser_simulate.add_argument("--seed", type=int, default=0)
    parser_simulate.add_argument(
        "--design", choices=_values(DesignKind), default=DesignKind.IID.value
    )
    parser_simulate.add_argument(
        "--noise", choices=_values(NoiseKind), default=NoiseKind.GAUSS.value
    )
    parser_simulate.add_argument("--out-dir", type=Path, required=True)

    parser_sweep = subparsers.add_parser(
        "sweep", help="Runs a Monte-Carlo consistency sweep"
    )
    parser_sweep.add_argument(
        "--config", type=Path, required=True, help="JSON sweep configuration"
    )
    parser_sweep.add_argument(
        "--out-trace", type=Path, required=True, help="Where to write the JSON trace"
    )
    parser_sweep.add_argument("--csv", type=Path, help="Flat per trial CSV")
    parser_sweep.add_argument(
        "--gnuplot", type=Path, help="Per estimator gnuplot data blocks"
    )

    parser_check = subparsers.add_parser(
        "check", help="Checks the estimator assumptions on observed data"
    )
    _add_data_flags(parser_check)

    return parser.parse_args(argv)


def _read_data(args) -> ObservedData:
    a, b = read_matrix(args.a), read_matrix(args.b)
    partition = observed_partition(a, b, args.j, args.k)
    return ObservedData(a, b, partition)


def cmd_estimate(args) -> int:
    try:
        data = _read_data(args)
        data.partition.validate()
        sigma_cov = read_matrix(args.sigma_cov) if args.sigma_cov else None
        transform = None
        if sigma_cov is not None:
            data, transform = whiten(data, sigma_cov)
    except (OSError, MatrixFileException, ModelGenException) as e:
        logger.error("%s", e)
        return EXIT_INPUT_ERROR

    method = Method(args.method)
    try:
        result = estimate(data, method, MuChoice(args.mu))
        if transform is not None:
            result.x_hat = unwhiten_estimate(result.x_hat, transform)
    except CtlsException as e:
        logger.error("%s failed with %s: %s", method.value, type(e).__name__, e)
        return EXIT_ESTIMATOR_ERROR

    if args.format:
        fmt = MatrixFormat(args.format)
    else:
        fmt = infer_format(args.out) if args.out else MatrixFormat.CSV

    if args.out:
        try:
            write_matrix(result.x_hat, args.out, fmt)
        except OSError as e:
            logger.error("%s", e)
            return EXIT_INPUT_ERROR
        logger.info("Wrote X to %s", args.out)
    else:
        print(format_matrix(result.x_hat, fmt).rstrip("\n"))
    print(diagnostics_block(result))
    return EXIT_OK


def cmd_simulate(args) -> int:
    partition = PartitionSpec(args.j, args.k, args.n, args.ell, args.m)
    design, noise = DesignKind(args.design), NoiseKind(args.noise)
    try:
        model = generate_model(partition, args.seed, design, args.sigma)
        data = observe(model, derive_seed(args.seed, "observe"), noise)
        args.out_dir.mkdir(parents=True, exist_ok=True)
        write_matrix(data.a, args.out_dir / "A.csv")
        write_matrix(data.b, args.out_dir / "B.csv")
        write_matrix(model.x_true, args.out_dir / "X_true.csv")
        metadata = ModelMetadataSchema().dump(
            {
                "n": args.n,
                "ell": args.ell,
                "j": args.j,
                "k": args.k,
                "m": args.m,
                "sigma": args.sigma,
                "seed": args.seed,
                "design": design,
                "noise": noise,
            }
        )
        with open(args.out_dir / "model.json", "w") as f:
            json.dump(metadata, f, indent=2, sort_keys=True)
    except (OSError, CtlsException) as e:
        logger.error("%s", e)
        return EXIT_INPUT_ERROR

    logger.info("Wrote instance with seed %d to %s", args.seed, args.out_dir)
    return EXIT_OK


def cmd_sweep(args) -> int:
    try:
        with open(args.config) as f:
            sweep = SweepConfigSchema().load(json.load(f))
        sweep.validate()
    except (OSError, json.JSONDecodeError, ValidationError, IncompatibleConfig) as e:
        logger.error("Invalid sweep configuration %s: %s", args.config, e)
        return EXIT_INPUT_ERROR

    trace = run_sweep(sweep)

    try:
        with open(args.out_trace, "w") as f:
            json.dump(TraceSchema().dump(trace), f, indent=2)
        logger.info("Wrote trace to %s", args.out_trace)
        if args.csv:
            write_trace_csv(trace, args.csv)
        if args.gnuplot:
            write_gnuplot(trace, args.gnuplot)
    except OSError as e:
        logger.error("%s", e)
        return EXIT_INPUT_ERROR

    print(aggregate_table(trace))
    if trace.exceeds_failure_rate():
        logger.error("Failure rate above 5%% in at least one cell")
        return EXIT_FAILURE_RATE
    return EXIT_OK


def cmd_check(args) -> int:
    try:
        data = _read_data(args)
    except (OSError, CtlsException) as e:
        logger.error("%s", e)
        return EXIT_INPUT_ERROR

    checks = check_assumptions(data)
    rows = [
        (check.name, check.value, "-" if check.passed is None else check.passed)
        for check in checks
    ]
    print(tabulate(rows, ("Check", "Value", "Passed"), tablefmt="pretty"))
    if all(check.passed is not False for check in checks):
        return EXIT_OK
    return EXIT_ESTIMATOR_ERROR


COMMANDS = {
    "estimate": cmd_estimate,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "check": cmd_check,
}


def main(argv=None) -> int:
    setup_logging()
    args = parse_args(argv)
    return COMMANDS[args.which](args)


if "__main__" == __name__:
    sys.exit(main())
