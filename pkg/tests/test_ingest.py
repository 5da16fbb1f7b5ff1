"""
Tests for real-data ingestion.
"""

import numpy as np
import pytest
from scipy import stats

from src.errors import ConfigError, ParseError
from src.tools.ingest import (
    ingest_csv,
    normal_scores,
    read_numeric_csv,
    standardize_columns,
    winsor_level,
)


def _write(tmp_path, text: str):
    path = tmp_path / "data.csv"
    path.write_text(text)
    return path


class TestNormalScores:
    def test_three_distinct_values(self):
        scores = normal_scores(np.array([[1.0], [2.0], [3.0]]))
        expected = [stats.norm.ppf(0.25), 0.0, stats.norm.ppf(0.75)]
        assert np.allclose(scores[:, 0], expected, atol=1e-12)

    def test_constant_column_scores_zero(self):
        scores = normal_scores(np.full((6, 1), 4.2))
        assert np.allclose(scores, 0.0)

    def test_rank_based(self):
        X = np.array([[10.0, -1.0], [0.1, 5.0], [3.0, 2.0]])
        assert np.allclose(normal_scores(X), normal_scores(np.exp(X)))

    def test_extremes_are_winsorized(self):
        n = 1000
        scores = normal_scores(np.arange(n, dtype=float)[:, None])
        delta = winsor_level(n)
        assert 1 / (n + 1) < delta
        assert scores.min() == pytest.approx(stats.norm.ppf(delta))
        assert scores.max() == pytest.approx(stats.norm.ppf(1 - delta))

    def test_winsor_level_small_n(self):
        assert winsor_level(1) == 0.0


class TestStandardize:
    def test_center_only(self):
        X = np.array([[1.0, 10.0], [3.0, 30.0]])
        assert np.allclose(standardize_columns(X, scale=False), [[-1, -10], [1, 10]])

    def test_unit_variance(self, rng):
        X = rng.normal(5.0, 3.0, size=(50, 3))
        Z = standardize_columns(X)
        assert np.allclose(Z.mean(axis=0), 0.0)
        assert np.allclose(Z.std(axis=0), 1.0)

    def test_constant_column_left_unscaled(self, caplog):
        Z = standardize_columns(np.array([[1.0, 2.0], [1.0, 4.0]]))
        assert np.allclose(Z[:, 0], 0.0)
        assert "constant" in caplog.text


class TestReadCSV:
    def test_header(self, tmp_path):
        X, names = read_numeric_csv(_write(tmp_path, "a,b\n1,2\n3,4\n"), header=True)
        assert names == ["a", "b"]
        assert np.array_equal(X, [[1, 2], [3, 4]])

    def test_blank_lines_skipped(self, tmp_path):
        X, _ = read_numeric_csv(_write(tmp_path, "1,2\n\n3,4\n"))
        assert X.shape == (2, 2)

    def test_ragged_rows(self, tmp_path):
        with pytest.raises(ParseError) as info:
            read_numeric_csv(_write(tmp_path, "1,2\n3,4,5\n"))
        assert info.value.row == 2

    def test_non_numeric_cell(self, tmp_path):
        with pytest.raises(ParseError) as info:
            read_numeric_csv(_write(tmp_path, "1,2\n3,x\n"))
        assert (info.value.row, info.value.column) == (2, 2)
        assert "row 2, column 2" in str(info.value)

    def test_non_finite_cell(self, tmp_path):
        with pytest.raises(ParseError):
            read_numeric_csv(_write(tmp_path, "1,nan\n"))

    def test_no_rows(self, tmp_path):
        with pytest.raises(ParseError):
            read_numeric_csv(_write(tmp_path, "a,b\n"), header=True)


class TestIngest:
    def test_centered_by_default(self, tmp_path):
        X = ingest_csv(_write(tmp_path, "1,5\n3,7\n5,9\n"))
        assert np.allclose(X.mean(axis=0), 0.0)
        assert np.allclose(X[:, 0], [-2, 0, 2])

    def test_raw(self, tmp_path):
        X = ingest_csv(_write(tmp_path, "1,5\n3,7\n"), center=False)
        assert np.array_equal(X, [[1, 5], [3, 7]])

    def test_normal_score_transform(self, tmp_path):
        X = ingest_csv(_write(tmp_path, "1\n2\n3\n"), transform="normal_score")
        assert np.allclose(X[:, 0], [stats.norm.ppf(0.25), 0.0, stats.norm.ppf(0.75)])

    def test_log_transform_standardizes(self, tmp_path):
        X = ingest_csv(_write(tmp_path, "1,2\n10,3\n100,9\n"), transform="log")
        assert np.allclose(X.std(axis=0), 1.0)
        assert np.allclose(X[:, 0], [-np.sqrt(1.5), 0.0, np.sqrt(1.5)])

    def test_log_needs_positive_values(self, tmp_path):
        with pytest.raises(ParseError) as info:
            ingest_csv(_write(tmp_path, "h1,h2\n1,2\n3,0\n"), transform="log", header=True)
        assert (info.value.row, info.value.column) == (3, 2)

    def test_unknown_transform(self, tmp_path):
        with pytest.raises(ConfigError):
            ingest_csv(_write(tmp_path, "1\n2\n"), transform="sqrt")
