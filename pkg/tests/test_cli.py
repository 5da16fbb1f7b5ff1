"""
Tests for the ges-bench command line.
"""

import json

import numpy as np
import pytest

from src.cli import build_parser, experiment_overrides, main
from src.config import config
from src.tools.matrix_io import read_covariance_csv, read_matrix_csv


@pytest.fixture(autouse=True)
def isolated_config(monkeypatch, tmp_path):
    """main() mutates the process config and LangSmith variables; restore them."""
    monkeypatch.setattr(config, "log_level", "INFO")
    monkeypatch.setattr(config, "output_dir", tmp_path / "results")
    monkeypatch.setattr(config, "jobs", 1)
    monkeypatch.setenv("LANGSMITH_TRACING", "false")


@pytest.fixture
def small_toml(tmp_path):
    path = tmp_path / "small.toml"
    path.write_text(
        'model = "AR"\n'
        "n = 120\n"
        "p = 8\n"
        "replications = 1\n"
        'estimators = ["glasso", "pcortest"]\n'
        "\n"
        "[cv]\n"
        "folds = 5\n"
        "grid_size = 5\n"
    )
    return path


class TestParser:
    def test_overrides(self):
        args = build_parser().parse_args(
            ["benchmark", "--n", "100", "--estimators", "ges,glasso", "--burn-in", "10"]
        )
        overrides = experiment_overrides(args)
        assert overrides["n"] == 100
        assert overrides["p"] is None
        assert overrides["estimators"] == ["ges", "glasso"]
        assert overrides["mh"] == {"burn_in": 10, "samples": None}

    def test_command_is_required(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args([])


class TestBenchmark:
    def test_csv_report(self, small_toml, tmp_path, capsys):
        out = tmp_path / "report.csv"
        assert main(["benchmark", "--config", str(small_toml), "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0].startswith("model,n,p,estimator,replication")
        assert len(lines) == 5
        assert "Report written to" in capsys.readouterr().out

    def test_flags_beat_the_file(self, small_toml, tmp_path):
        out = tmp_path / "report.json"
        argv = ["benchmark", "--config", str(small_toml), "--p", "6", "--format", "json"]
        assert main([*argv, "--out", str(out)]) == 0
        payload = json.loads(out.read_text())
        assert {row["p"] for row in payload["rows"]} == {6}
        assert payload["rows"][0]["diagnostics"]["lambda"] >= 0.0

    def test_unknown_config_key(self, tmp_path, capsys):
        path = tmp_path / "bad.toml"
        path.write_text("replicates = 3\n")
        assert main(["benchmark", "--config", str(path)]) == 2
        assert "unknown config keys" in capsys.readouterr().out

    def test_zero_jobs(self, small_toml):
        assert main(["benchmark", "--config", str(small_toml), "--jobs", "0"]) == 2

    def test_bad_log_level(self, small_toml):
        assert main(["--log-level", "loud", "benchmark", "--config", str(small_toml)]) == 2

    def test_mostly_failed_run(self, tmp_path):
        argv = ["benchmark", "--n", "20", "--p", "20", "--reps", "1", "--estimators", "pcortest"]
        assert main([*argv, "--out", str(tmp_path / "r.csv")]) == 1


class TestDataCommands:
    def test_ingest(self, tmp_path):
        raw = tmp_path / "raw.csv"
        raw.write_text("x,y\n1,10\n2,30\n3,20\n4,60\n")
        out = tmp_path / "clean.csv"
        argv = ["ingest", "--input", str(raw), "--out", str(out), "--header", "--standardize"]
        assert main(argv) == 0
        X = read_matrix_csv(out)
        assert X.shape == (4, 2)
        assert np.allclose(X.mean(axis=0), 0.0)
        assert np.allclose(X.std(axis=0), 1.0)

    def test_ingest_parse_error(self, tmp_path, capsys):
        raw = tmp_path / "raw.csv"
        raw.write_text("1,2\n3,oops\n")
        assert main(["ingest", "--input", str(raw), "--out", str(tmp_path / "o.csv")]) == 1
        assert "row 2, column 2" in capsys.readouterr().out

    def test_simulate(self, tmp_path):
        out = tmp_path / "sim"
        assert main(["simulate", "--p", "5", "--n", "30", "--seed", "3", "--out", str(out)]) == 0
        assert read_matrix_csv(out / "data.csv").shape == (30, 5)
        precision = read_matrix_csv(out / "precision.csv")
        covariance = read_matrix_csv(out / "covariance.csv")
        assert np.allclose(precision @ covariance, np.eye(5), atol=1e-10)
        assert len((out / "edges.txt").read_text().splitlines()) == 4


class TestEstimate:
    @pytest.fixture
    def simulated(self, tmp_path):
        out = tmp_path / "sim"
        main(["simulate", "--p", "5", "--n", "100", "--seed", "11", "--out", str(out)])
        return out / "data.csv"

    def test_pcortest(self, simulated, tmp_path):
        out = tmp_path / "est"
        argv = ["estimate", "--data", str(simulated), "--estimator", "pcortest"]
        assert main([*argv, "--out", str(out)]) == 0
        theta = read_matrix_csv(out / "precision.csv")
        assert theta.shape == (5, 5)
        assert np.allclose(theta, theta.T)
        diagnostics = json.loads((out / "diagnostics.json").read_text())
        assert diagnostics["estimator"] == "pcortest"
        assert diagnostics["n"] == 100
        assert diagnostics["level"] == pytest.approx(0.005)

    def test_ges_with_trace(self, simulated, tmp_path):
        out = tmp_path / "est"
        trace = tmp_path / "trace.csv"
        argv = ["estimate", "--data", str(simulated), "--burn-in", "50", "--samples", "100"]
        assert main([*argv, "--trace", str(trace), "--out", str(out)]) == 0
        assert (out / "candidates.txt").exists()
        assert (out / "edges.txt").exists()
        lines = trace.read_text().splitlines()
        assert lines[0] == "replication,iteration,edges,accepted,log_weight"
        assert len(lines) == 151

        S = read_covariance_csv(out / "S.csv")
        assert S.kind == "empirical"
        assert S.gamma is None
        assert read_covariance_csv(out / "cov1.csv").p == 5

    def test_glasso_path(self, simulated, tmp_path):
        path = tmp_path / "path.csv"
        argv = ["estimate", "--data", str(simulated), "--estimator", "glasso"]
        assert main([*argv, "--path", str(path), "--out", str(tmp_path / "est")]) == 0
        assert path.read_text().startswith("lambda,edges,objective,converged")

    def test_compare_writes_overlap_counts(self, simulated, tmp_path, capsys):
        out = tmp_path / "est"
        argv = ["estimate", "--data", str(simulated), "--estimator", "pcortest"]
        assert main([*argv, "--compare", "glasso,pcortest", "--out", str(out)]) == 0
        diagnostics = json.loads((out / "diagnostics.json").read_text())
        counts = diagnostics["overlap"]["glasso"]
        assert set(counts) == {"only_pcortest", "only_glasso", "both"}
        assert list(diagnostics["overlap"]) == ["glasso"]
        edges = (out / "edges.txt").read_text().splitlines()
        assert counts["only_pcortest"] + counts["both"] == len(edges)
        assert "shared with glasso" in capsys.readouterr().out

    def test_unknown_compare(self, simulated, tmp_path):
        argv = ["estimate", "--data", str(simulated), "--compare", "lasso"]
        assert main([*argv, "--out", str(tmp_path / "est")]) == 2

    def test_truth_adds_scores(self, simulated, tmp_path):
        out = tmp_path / "est"
        argv = ["estimate", "--data", str(simulated), "--estimator", "glasso"]
        assert main([*argv, "--truth", str(simulated.parent), "--out", str(out)]) == 0
        scores = json.loads((out / "diagnostics.json").read_text())["scores"]
        assert scores["n_true"] == 4
        assert 0.0 <= scores["f1"] <= 1.0
        assert scores["kl"] >= 0.0

    def test_missing_truth(self, simulated, tmp_path):
        argv = ["estimate", "--data", str(simulated), "--estimator", "pcortest"]
        assert main([*argv, "--truth", str(tmp_path / "nowhere")]) == 1

    def test_saved_s_reproduces_the_estimate(self, simulated, tmp_path):
        first, second = tmp_path / "first", tmp_path / "second"
        argv = ["estimate", "--data", str(simulated), "--burn-in", "50", "--samples", "100"]
        argv += ["--s-matrix", "thresholded"]
        assert main([*argv, "--out", str(first)]) == 0
        assert main([*argv, "--s-file", str(first / "S.csv"), "--out", str(second)]) == 0
        assert np.array_equal(
            read_matrix_csv(first / "precision.csv"), read_matrix_csv(second / "precision.csv")
        )
        gammas = [
            json.loads((d / "diagnostics.json").read_text())["gamma"] for d in (first, second)
        ]
        assert gammas[0] == gammas[1]
        assert gammas[0] is not None

    def test_s_file_needs_ges(self, simulated, tmp_path):
        argv = ["estimate", "--data", str(simulated), "--estimator", "pcortest"]
        assert main([*argv, "--s-file", str(tmp_path / "S.csv")]) == 2


class TestSummarize:
    def test_json_report(self, small_toml, tmp_path, capsys):
        report = tmp_path / "report.json"
        argv = ["benchmark", "--config", str(small_toml), "--format", "json"]
        assert main([*argv, "--out", str(report)]) == 0
        capsys.readouterr()
        assert main(["summarize", "--report", str(report)]) == 0
        out = capsys.readouterr().out
        assert "glasso" in out
        assert "pcortest" in out

    def test_csv_report_is_rejected(self, small_toml, tmp_path):
        report = tmp_path / "report.csv"
        assert main(["benchmark", "--config", str(small_toml), "--out", str(report)]) == 0
        assert main(["summarize", "--report", str(report)]) == 1

    def test_missing_report(self, tmp_path):
        assert main(["summarize", "--report", str(tmp_path / "none.json")]) == 1
