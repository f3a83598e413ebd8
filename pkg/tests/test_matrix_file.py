import json
from pathlib import Path

import numpy as np
import pytest

from ctls.enums import MatrixFormat
from ctls.matrix_file import (
    InvalidMatrixFile,
    format_matrix,
    infer_format,
    parse_csv_rows,
    read_matrix,
    write_matrix,
)

TESTDATA_DIR = Path(__file__).parent / "test_data"


@pytest.mark.parametrize(
    "name,expected",
    (
        ("A.csv", MatrixFormat.CSV),
        ("A.txt", MatrixFormat.CSV),
        ("A.json", MatrixFormat.MTXJSON),
        ("A.JSON", MatrixFormat.MTXJSON),
    ),
)
def test_infer_format(name, expected):
    assert infer_format(name) is expected


class TestParseCsvRows:
    def test_values(self):
        matrix = parse_csv_rows([["1", "-2.5"], [" 3e-2", "4"]])
        np.testing.assert_array_equal(matrix, [[1.0, -2.5], [0.03, 4.0]])

    def test_blank_lines_skipped(self):
        assert parse_csv_rows([["1"], [], ["2"]]).shape == (2, 1)

    @pytest.mark.parametrize(
        "rows,position",
        (
            ([["1", "2"], ["3", "x"]], "at row 2, column 2"),
            ([["1", "nan"]], "at row 1, column 2"),
            ([["inf"]], "at row 1, column 1"),
            ([["1", "2"], ["3"]], "at row 2:"),
        ),
    )
    def test_invalid(self, rows, position):
        with pytest.raises(InvalidMatrixFile) as e:
            parse_csv_rows(rows, "A.csv")
        assert position in str(e.value)
        assert str(e.value).startswith("A.csv")

    def test_empty(self):
        with pytest.raises(InvalidMatrixFile, match="no rows"):
            parse_csv_rows([])


class TestReadMatrix:
    def test_fixture(self):
        a = read_matrix(TESTDATA_DIR / "exact_A.csv")
        assert a.shape == (6, 2)
        np.testing.assert_array_equal(a[3], [2.0, 1.0])

    def test_malformed_fixture(self):
        with pytest.raises(InvalidMatrixFile) as e:
            read_matrix(TESTDATA_DIR / "malformed_A.csv")
        assert e.value.row == 2
        assert e.value.col == 2

    def test_mtxjson(self, tmp_path):
        path = tmp_path / "A.json"
        path.write_text(json.dumps({"rows": 2, "cols": 2, "data": [1, 2, 3, 4]}))
        np.testing.assert_array_equal(read_matrix(path), [[1.0, 2.0], [3.0, 4.0]])

    @pytest.mark.parametrize(
        "document",
        (
            {"rows": 2, "cols": 2, "data": [1, 2, 3]},
            {"rows": 0, "cols": 2, "data": []},
            {"cols": 1, "data": [1]},
            {"rows": 1, "cols": 1, "data": ["x"]},
        ),
    )
    def test_invalid_mtxjson(self, tmp_path, document):
        path = tmp_path / "A.json"
        path.write_text(json.dumps(document))
        with pytest.raises(InvalidMatrixFile):
            read_matrix(path)

    def test_broken_json(self, tmp_path):
        path = tmp_path / "A.json"
        path.write_text('{"rows": 1,\n "cols": }')
        with pytest.raises(InvalidMatrixFile) as e:
            read_matrix(path)
        assert e.value.row == 2


class TestWriteMatrix:
    def test_format_csv(self):
        assert format_matrix(np.array([[1.0, 0.5], [-2.0, 0.1]])) == (
            "1,0.5\n-2,0.10000000000000001\n"
        )

    def test_format_mtxjson(self):
        document = json.loads(format_matrix(np.eye(2), MatrixFormat.MTXJSON))
        assert document["rows"] == 2 and document["cols"] == 2
        assert document["data"] == [1.0, 0.0, 0.0, 1.0]

    @pytest.mark.parametrize("name", ("X.csv", "X.json"))
    def test_exact_round_trip(self, tmp_path, name):
        matrix = np.random.default_rng(3).standard_normal((7, 3)) * 10.0 ** np.arange(
            -5, 16, 7
        )
        read = read_matrix(write_matrix(matrix, tmp_path / name))
        assert np.array_equal(read, matrix)

    def test_explicit_format(self, tmp_path):
        path = write_matrix(np.ones((1, 2)), tmp_path / "X.out", MatrixFormat.MTXJSON)
        assert json.loads(path.read_text())["cols"] == 2
