"""
Tests for empirical covariance, hard thresholding and threshold selection.
"""

import math

import numpy as np
import pytest

from src.covariance import (
    CovarianceEstimate,
    empirical_covariance,
    hard_threshold,
    second_stage_covariance,
    select_threshold,
    split_sizes,
)
from src.errors import ConfigError, DegenerateSplitError, GESError


def _orthogonal_columns(n: int) -> np.ndarray:
    """Two columns with disjoint support: every sub-sample covariance is diagonal."""
    X = np.zeros((n, 2))
    X[0::2, 0] = 1.0
    X[1::2, 1] = 1.0
    return X


class TestEmpiricalCovariance:
    def test_single_row(self):
        cov = empirical_covariance(np.array([[1.0, 2.0]]))
        assert np.array_equal(cov.matrix, [[1, 2], [2, 4]])
        assert cov.n == 1
        assert cov.kind == "empirical"

    def test_two_unit_rows(self):
        cov = empirical_covariance(np.array([[1.0, 0.0], [0.0, 1.0]]))
        assert np.array_equal(cov.matrix, [[0.5, 0], [0, 0.5]])

    def test_does_not_center(self):
        cov = empirical_covariance(np.full((10, 2), 3.0))
        assert np.allclose(cov.matrix, 9.0)

    def test_large_sample_near_identity(self):
        X = np.random.default_rng(2024).standard_normal((1000, 3))
        assert np.max(np.abs(empirical_covariance(X).matrix - np.eye(3))) < 0.15

    def test_empty_data(self):
        with pytest.raises(GESError):
            empirical_covariance(np.zeros((0, 3)))

    def test_fingerprint_tracks_content(self):
        a = empirical_covariance(np.eye(3))
        b = CovarianceEstimate(matrix=a.matrix.copy(), n=7)
        c = CovarianceEstimate(matrix=2 * a.matrix, n=3)
        assert a.fingerprint == b.fingerprint
        assert a.fingerprint != c.fingerprint


class TestHardThreshold:
    def setup_method(self):
        self.cov = CovarianceEstimate(
            matrix=np.array([[2.0, 0.3, -0.1], [0.3, 1.0, 0.05], [-0.1, 0.05, 0.5]]), n=10
        )

    def test_zero_threshold_is_identity_map(self):
        out = hard_threshold(self.cov, 0.0)
        assert np.array_equal(out.matrix, self.cov.matrix)
        assert out.kind == "thresholded"
        assert out.gamma == 0.0

    def test_above_max_keeps_only_diagonal(self):
        out = hard_threshold(self.cov, 0.31)
        assert np.array_equal(out.matrix, np.diag([2.0, 1.0, 0.5]))

    def test_two_by_two(self):
        cov = CovarianceEstimate(matrix=np.array([[1.0, 0.2], [0.2, 1.0]]), n=5)
        assert np.array_equal(hard_threshold(cov, 0.3).matrix, np.eye(2))

    def test_entries_at_threshold_survive(self):
        out = hard_threshold(self.cov, 0.1)
        assert out.matrix[0, 2] == -0.1
        assert out.matrix[1, 2] == 0.0

    def test_negative_threshold(self):
        with pytest.raises(ConfigError):
            hard_threshold(self.cov, -0.1)

    def test_input_untouched(self):
        before = self.cov.matrix.copy()
        hard_threshold(self.cov, 1.0)
        assert np.array_equal(self.cov.matrix, before)

    @pytest.mark.parametrize("gamma", [0.0, 0.05, 0.1, 0.3, 5.0])
    def test_idempotent(self, gamma):
        once = hard_threshold(self.cov, gamma)
        assert np.array_equal(hard_threshold(once, gamma).matrix, once.matrix)

    def test_support_shrinks_as_gamma_grows(self, rng):
        A = rng.standard_normal((6, 6))
        cov = CovarianceEstimate(matrix=A + A.T, n=10)
        gammas = np.linspace(0.0, np.abs(cov.matrix).max(), 12)
        supports = [hard_threshold(cov, g).matrix != 0 for g in gammas]
        for looser, tighter in zip(supports, supports[1:]):
            assert np.all(looser | ~tighter)


class TestSelectThreshold:
    def test_split_sizes(self):
        train, validation = split_sizes(200)
        assert train == math.floor(200 * (1 - 1 / math.log(200))) == 162
        assert validation == 38

    def test_too_few_samples(self):
        with pytest.raises(DegenerateSplitError) as info:
            select_threshold(np.ones((5, 2)), B=2, grid=[0.0])
        assert info.value.minimum == 8
        assert "8" in str(info.value)

    def test_singleton_grid(self, rng):
        X = rng.standard_normal((40, 3))
        selection = select_threshold(X, B=3, grid=[0.0], rng=rng)
        assert selection.gamma == 0.0
        assert selection.scores.shape == (1,)

    def test_ties_go_to_smallest(self, rng):
        selection = select_threshold(_orthogonal_columns(20), B=5, grid=[0.0, 10.0], rng=rng)
        assert selection.scores[0] == selection.scores[1]
        assert selection.gamma == 0.0

    def test_bad_grid(self, rng):
        with pytest.raises(ConfigError):
            select_threshold(np.ones((20, 2)), B=2, grid=[-1.0], rng=rng)
        with pytest.raises(ConfigError):
            select_threshold(np.ones((20, 2)), B=0, grid=[0.0], rng=rng)

    def test_same_seed_same_choice(self, ar_data):
        _, X = ar_data(6, 80, seed=1)
        a = select_threshold(X, B=5, rng=np.random.default_rng(9))
        b = select_threshold(X, B=5, rng=np.random.default_rng(9))
        assert a.gamma == b.gamma
        assert np.array_equal(a.scores, b.scores)

    def test_interior_optimum_on_ar(self, ar_data):
        _, X = ar_data(10, 200, seed=11)
        selection = select_threshold(X, B=20, rng=np.random.default_rng(5))
        top = empirical_covariance(X).max_off_diagonal()
        assert 0.0 < selection.gamma < top
        assert selection.gamma in selection.grid
        assert selection.scores.min() == selection.scores[selection.grid == selection.gamma][0]

    def test_scores_follow_grid_permutation(self, ar_data):
        _, X = ar_data(6, 60, seed=4)
        grid = np.linspace(0.0, 0.6, 7)
        order = np.random.default_rng(3).permutation(grid.size)
        a = select_threshold(X, B=6, grid=grid, rng=np.random.default_rng(12))
        b = select_threshold(X, B=6, grid=grid[order], rng=np.random.default_rng(12))
        assert np.array_equal(b.scores, a.scores[order])
        assert a.gamma == b.gamma


class TestSecondStage:
    def test_empirical_mode(self, rng):
        X = rng.standard_normal((30, 3))
        S, selection = second_stage_covariance(X, mode="empirical")
        assert selection is None
        assert S.kind == "empirical"
        assert np.array_equal(S.matrix, empirical_covariance(X).matrix)

    def test_thresholded_mode(self, rng):
        X = rng.standard_normal((60, 4))
        S, selection = second_stage_covariance(X, B=3, grid_size=5, rng=rng)
        assert S.kind == "thresholded"
        assert S.gamma == selection.gamma
        assert selection.grid.size == 5

    def test_unknown_mode(self, rng):
        with pytest.raises(ConfigError):
            second_stage_covariance(rng.standard_normal((20, 2)), mode="banded")
