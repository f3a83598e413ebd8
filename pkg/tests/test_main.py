import csv
import json
import logging
from pathlib import Path

import numpy as np
import pytest

from ctls.estimators import LowerBlockSingular
from ctls.matrix_file import read_matrix, write_matrix
from ctls.report import TRACE_CSV_COLUMNS
from ctls.schemas import TraceSchema
from main import main

TESTDATA_DIR = Path(__file__).parent / "test_data"
EXACT_A = str(TESTDATA_DIR / "exact_A.csv")
EXACT_B = str(TESTDATA_DIR / "exact_B.csv")


def estimate_args(method, *extra):
    return ["estimate", "--a", EXACT_A, "--b", EXACT_B, "--method", method, *extra]


def simulate_args(out_dir, *extra):
    return [
        "simulate",
        "--n",
        "3",
        "--ell",
        "1",
        "--m",
        "40",
        "--j",
        "1",
        "--k",
        "1",
        "--seed",
        "9",
        "--out-dir",
        str(out_dir),
        *extra,
    ]


class TestEstimate:
    def test_exact_fixture(self, tmp_path, capsys):
        out = tmp_path / "X.csv"
        assert main(estimate_args("tls", "--out", str(out))) == 0
        expected = read_matrix(TESTDATA_DIR / "exact_X.csv")
        np.testing.assert_allclose(read_matrix(out), expected, atol=1e-8)
        assert "# sigma2_hat:" in capsys.readouterr().out

    def test_stdout(self, capsys):
        assert main(estimate_args("tls")) == 0
        lines = capsys.readouterr().out.splitlines()
        np.testing.assert_allclose(
            [float(lines[0]), float(lines[1])], [2.0, -1.0], atol=1e-8
        )
        assert lines[2].startswith("# ")

    def test_rowcol_without_constraints_is_tls(self, capsys):
        assert main(estimate_args("tls")) == 0
        tls_output = capsys.readouterr().out
        assert main(estimate_args("ctls-rowcol", "--j", "0", "--k", "0")) == 0
        assert capsys.readouterr().out == tls_output

    @pytest.mark.parametrize(
        "method,j,k",
        (("ctls-cols", 0, 1), ("ctls-rows", 1, 0), ("ctls-rowcol", 1, 1), ("projection", 1, 1)),
    )
    def test_constrained_methods(self, tmp_path, method, j, k):
        out = tmp_path / "X.json"
        args = estimate_args(method, "--j", str(j), "--k", str(k), "--out", str(out))
        assert main(args) == 0
        np.testing.assert_allclose(read_matrix(out), [[2.0], [-1.0]], atol=1e-8)

    def test_identity_covariance(self, tmp_path, capsys):
        sigma_cov = write_matrix(np.eye(2), tmp_path / "sigma.csv")
        assert main(estimate_args("ctls-cols", "--k", "1")) == 0
        plain = capsys.readouterr().out.splitlines()[:2]
        args = estimate_args("ctls-cols", "--k", "1", "--sigma-cov", str(sigma_cov))
        assert main(args) == 0
        whitened = capsys.readouterr().out.splitlines()[:2]
        np.testing.assert_allclose(
            np.array(whitened, dtype=float), np.array(plain, dtype=float), atol=1e-12
        )

    def test_format_flag(self, capsys):
        assert main(estimate_args("tls", "--format", "mtxjson")) == 0
        document = json.loads(capsys.readouterr().out.splitlines()[0])
        assert (document["rows"], document["cols"]) == (2, 1)

    def test_malformed_csv(self, caplog):
        args = estimate_args("tls")
        args[2] = str(TESTDATA_DIR / "malformed_A.csv")
        with caplog.at_level(logging.ERROR):
            assert main(args) == 1
        assert "at row 2, column 2" in caplog.text

    def test_missing_file(self, tmp_path):
        args = estimate_args("tls")
        args[2] = str(tmp_path / "missing.csv")
        assert main(args) == 1

    def test_invalid_partition(self):
        assert main(estimate_args("ctls-rows", "--j", "2")) == 1

    def test_incompatible_method(self, caplog):
        with caplog.at_level(logging.ERROR):
            assert main(estimate_args("ctls-cols", "--k", "0")) == 2
        assert "IncompatiblePartition" in caplog.text

    def test_estimator_error(self, mocker, caplog):
        mocker.patch("main.estimate", side_effect=LowerBlockSingular("nongeneric"))
        with caplog.at_level(logging.ERROR):
            assert main(estimate_args("tls")) == 2
        assert "LowerBlockSingular" in caplog.text

    def test_not_positive_definite(self, tmp_path):
        sigma_cov = write_matrix(-np.eye(2), tmp_path / "sigma.csv")
        args = estimate_args("ctls-cols", "--k", "1", "--sigma-cov", str(sigma_cov))
        assert main(args) == 1

    @pytest.mark.parametrize(
        "argv",
        (
            [],
            ["estimate", "--a", EXACT_A, "--b", EXACT_B, "--method", "lasso"],
            ["estimate", "--a", EXACT_A, "--method", "tls"],
            ["estimate", "--a", EXACT_A, "--b", EXACT_B, "--method", "tls", "--j", "x"],
            ["solve"],
        ),
    )
    def test_flag_errors(self, argv):
        with pytest.raises(SystemExit) as e:
            main(argv)
        assert e.value.code == 1


class TestSimulate:
    def test_files(self, tmp_path):
        assert main(simulate_args(tmp_path, "--sigma", "0.1", "--noise", "uniform")) == 0
        assert read_matrix(tmp_path / "A.csv").shape == (40, 3)
        assert read_matrix(tmp_path / "B.csv").shape == (40, 1)
        assert read_matrix(tmp_path / "X_true.csv").shape == (3, 1)
        with open(tmp_path / "model.json") as f:
            metadata = json.load(f)
        assert metadata == {
            "format_version": 1,
            "n": 3,
            "ell": 1,
            "j": 1,
            "k": 1,
            "m": 40,
            "sigma": 0.1,
            "seed": 9,
            "design": "iid",
            "noise": "uniform",
        }

    def test_deterministic(self, tmp_path):
        first, second = tmp_path / "first", tmp_path / "second"
        assert main(simulate_args(first, "--sigma", "0.2")) == 0
        assert main(simulate_args(second, "--sigma", "0.2")) == 0
        for name in ("A.csv", "B.csv", "X_true.csv", "model.json"):
            assert (first / name).read_bytes() == (second / name).read_bytes()

    def test_noise_free_round_trip(self, tmp_path):
        assert main(simulate_args(tmp_path, "--design", "grid")) == 0
        out = tmp_path / "X_hat.csv"
        args = [
            "estimate",
            "--a",
            str(tmp_path / "A.csv"),
            "--b",
            str(tmp_path / "B.csv"),
            "--j",
            "1",
            "--k",
            "1",
            "--method",
            "ctls-rowcol",
            "--out",
            str(out),
        ]
        assert main(args) == 0
        np.testing.assert_allclose(
            read_matrix(out), read_matrix(tmp_path / "X_true.csv"), atol=1e-8
        )

    def test_invalid_partition(self, tmp_path):
        assert main(simulate_args(tmp_path, "--m", "4")) == 1


class TestSweep:
    def test_outputs(self, tmp_path, capsys):
        trace_path, csv_path = tmp_path / "trace.json", tmp_path / "trace.csv"
        gnuplot_path = tmp_path / "trace.dat"
        args = [
            "sweep",
            "--config",
            str(TESTDATA_DIR / "sweep_config.json"),
            "--out-trace",
            str(trace_path),
            "--csv",
            str(csv_path),
            "--gnuplot",
            str(gnuplot_path),
        ]
        assert main(args) == 0

        with open(trace_path) as f:
            trace = TraceSchema().load(json.load(f))
        assert len(trace.all_records()) == 4 * 2 * 3

        with open(csv_path, newline="") as f:
            rows = list(csv.reader(f))
        assert tuple(rows[0]) == TRACE_CSV_COLUMNS
        assert len(rows) == 1 + 4 * 2 * 3

        blocks = gnuplot_path.read_text().split("\n\n\n")
        assert [block.splitlines()[0] for block in blocks] == [
            "# naive_ls",
            "# ctls_columns",
            "# ctls_rowcol",
            "# projection",
        ]
        assert blocks[0].splitlines()[2].startswith("50 ")

        out = capsys.readouterr().out
        assert "Median err" in out
        assert "ctls_rowcol" in out

    def test_empty_m_values(self, tmp_path):
        with open(TESTDATA_DIR / "sweep_config.json") as f:
            document = json.load(f)
        document["m_values"] = []
        config_path = tmp_path / "sweep.json"
        config_path.write_text(json.dumps(document))
        args = ["sweep", "--config", str(config_path), "--out-trace", str(tmp_path / "t")]
        assert main(args) == 1

    def test_incompatible_estimator(self, tmp_path):
        with open(TESTDATA_DIR / "sweep_config.json") as f:
            document = json.load(f)
        document["estimators"] = ["tls"]
        config_path = tmp_path / "sweep.json"
        config_path.write_text(json.dumps(document))
        args = ["sweep", "--config", str(config_path), "--out-trace", str(tmp_path / "t")]
        assert main(args) == 1

    def test_failure_rate(self, tmp_path, mocker):
        failing = mocker.Mock(side_effect=LowerBlockSingular("nongeneric"))
        mocker.patch.dict("ctls.harness.ESTIMATORS", {"projection": failing})
        trace_path = tmp_path / "trace.json"
        args = [
            "sweep",
            "--config",
            str(TESTDATA_DIR / "sweep_config.json"),
            "--out-trace",
            str(trace_path),
            "--csv",
            str(tmp_path / "trace.csv"),
        ]
        assert main(args) == 3
        assert trace_path.exists()
        with open(tmp_path / "trace.csv", newline="") as f:
            failed = [row for row in csv.DictReader(f) if row["status"] == "failed"]
        assert len(failed) == 6
        assert {row["err"] for row in failed} == {"LowerBlockSingular"}


class TestCheck:
    def test_passes(self, capsys):
        args = ["check", "--a", EXACT_A, "--b", EXACT_B, "--j", "1", "--k", "1"]
        assert main(args) == 0
        out = capsys.readouterr().out
        assert "rank [A11 A12] = j" in out
        assert "min eig m^-1 C21^T C21" in out

    def test_fails(self, tmp_path):
        a = read_matrix(EXACT_A)
        a[:, 0] = 0.0
        a_path = write_matrix(a, tmp_path / "A.csv")
        args = ["check", "--a", str(a_path), "--b", EXACT_B, "--k", "1"]
        assert main(args) == 2
