import csv
import io
import json
import logging
from pathlib import Path
from typing import Sequence, Union

import numpy as np
from marshmallow import ValidationError

from ctls.consts import FLOAT_FORMAT
from ctls.ctls_exception import CtlsException
from ctls.enums import MatrixFormat
from ctls.schemas import MatrixJsonSchema, matrix_to_json

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


class MatrixFileException(CtlsException):
    pass


class InvalidMatrixFile(MatrixFileException):
    def __init__(self, path, message: str, row: int = None, col: int = None):
        position = ""
        if row is not None:
            position = f" at row {row}" + (f", column {col}" if col is not None else "")
        super().__init__(f"{path}{position}: {message}")
        self.row = row
        self.col = col


def infer_format(path: PathLike) -> MatrixFormat:
    """
    .json files hold mtxjson, anything else is read as csv
    """
    if Path(path).suffix.lower() == ".json":
        return MatrixFormat.MTXJSON
    return MatrixFormat.CSV


def parse_csv_rows(rows: Sequence[Sequence[str]], path: PathLike = "<csv>"):
    """
    Parses headerless csv rows of decimal floats. Positions in errors are one
    based.
    """
    values = []
    for row_index, row in enumerate(rows, start=1):
        if not row:
            continue
        parsed = []
        for col_index, field in enumerate(row, start=1):
            try:
                value = float(field)
            except ValueError:
                raise InvalidMatrixFile(
                    path, f"'{field}' is not a number", row_index, col_index
                ) from None
            if not np.isfinite(value):
                raise InvalidMatrixFile(
                    path, f"'{field}' is not finite", row_index, col_index
                )
            parsed.append(value)
        if values and len(parsed) != len(values[0]):
            raise InvalidMatrixFile(
                path,
                f"expected {len(values[0])} columns, got {len(parsed)}",
                row_index,
            )
        values.append(parsed)

    if not values:
        raise InvalidMatrixFile(path, "no rows")
    return np.array(values, dtype=np.float64)


def read_matrix(path: PathLike) -> np.ndarray:
    path = Path(path)
    try:
        with open(path, encoding="utf-8-sig", newline="") as f:
            if infer_format(path) is MatrixFormat.CSV:
                return parse_csv_rows(list(csv.reader(f)), path)
            document = json.load(f)
    except json.JSONDecodeError as e:
        raise InvalidMatrixFile(path, e.msg, e.lineno, e.colno) from e
    except csv.Error as e:
        raise InvalidMatrixFile(path, str(e)) from e

    try:
        return MatrixJsonSchema().load(document)
    except ValidationError as e:
        raise InvalidMatrixFile(path, str(e.messages)) from e


def format_matrix(matrix: np.ndarray, fmt: MatrixFormat = MatrixFormat.CSV) -> str:
    """
    Every value keeps 17 significant digits so reading it back is exact
    """
    if fmt is MatrixFormat.MTXJSON:
        return json.dumps(matrix_to_json(matrix))

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    for row in matrix:
        writer.writerow(FLOAT_FORMAT.format(value) for value in row)
    return buffer.getvalue()


def write_matrix(
    matrix: np.ndarray, path: PathLike, fmt: MatrixFormat = None
) -> Path:
    path = Path(path)
    if fmt is None:
        fmt = infer_format(path)
    with open(path, "w", newline="") as f:
        f.write(format_matrix(matrix, fmt))
    logger.debug("Wrote a %s matrix to %s", matrix.shape, path)
    return path
