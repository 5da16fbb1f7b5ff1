"""
Covariance Estimates and Hard Thresholding

Builds the two covariance inputs of the aggregation:
    - the empirical covariance of the first subsample (fits the individual
      constrained estimators)
    - S, the thresholded (or plain) empirical covariance of the second
      subsample (scores them)

The model is N_p(0, Σ), so nothing here centers the data. Real data must be
centered during ingestion (see src.tools.ingest).
"""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from src.errors import ConfigError, DegenerateSplitError, GESError
from src.graph_model import upper_indices

logger = logging.getLogger(__name__)

CovarianceKind = Literal["empirical", "thresholded"]

MIN_SELECTION_SAMPLES = 8


@dataclass(frozen=True)
class CovarianceEstimate:
    """A symmetric p x p covariance matrix with its provenance."""

    matrix: np.ndarray
    n: int
    kind: CovarianceKind = "empirical"
    gamma: float | None = None

    @property
    def p(self) -> int:
        return self.matrix.shape[0]

    @property
    def fingerprint(self) -> str:
        """Content hash, used to key cached fits."""
        data = np.ascontiguousarray(self.matrix, dtype=float).tobytes()
        return hashlib.sha1(data).hexdigest()

    def max_off_diagonal(self) -> float:
        rows, cols = upper_indices(self.p)
        return float(np.abs(self.matrix[rows, cols]).max()) if rows.size else 0.0


@dataclass(frozen=True)
class ThresholdSelection:
    """Outcome of the random-split threshold search."""

    gamma: float
    B: int
    grid: np.ndarray
    scores: np.ndarray
    train_size: int
    validation_size: int


def empirical_covariance(X: np.ndarray) -> CovarianceEstimate:
    """
    (1/n) XᵀX without centering.

    Raises:
        GESError: X has no rows
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise GESError("empirical covariance needs a non-empty n x p data matrix")
    n = X.shape[0]
    matrix = X.T @ X / n
    matrix = (matrix + matrix.T) / 2
    return CovarianceEstimate(matrix=matrix, n=n, kind="empirical")


def hard_threshold(cov: CovarianceEstimate, gamma: float) -> CovarianceEstimate:
    """
    T_γ: zero every off-diagonal entry with |σ_ij| < γ. The diagonal is kept.
    """
    if gamma < 0:
        raise ConfigError(f"threshold must be non-negative, got {gamma}")
    matrix = cov.matrix.copy()
    small = np.abs(matrix) < gamma
    np.fill_diagonal(small, False)
    matrix[small] = 0.0
    return CovarianceEstimate(matrix=matrix, n=cov.n, kind="thresholded", gamma=float(gamma))


def split_sizes(n2: int) -> tuple[int, int]:
    """Sizes floor(n2(1 - 1/log n2)) and the rest."""
    if n2 < MIN_SELECTION_SAMPLES:
        raise DegenerateSplitError(
            f"threshold selection needs at least {MIN_SELECTION_SAMPLES} samples, got {n2}",
            minimum=MIN_SELECTION_SAMPLES,
        )
    train = math.floor(n2 * (1 - 1 / math.log(n2)))
    validation = n2 - train
    if train < 1 or validation < 1:
        raise DegenerateSplitError(
            f"split of {n2} samples leaves an empty piece ({train}, {validation})",
            minimum=MIN_SELECTION_SAMPLES,
        )
    return train, validation


def default_grid(cov: CovarianceEstimate, size: int = 20) -> np.ndarray:
    """size evenly spaced thresholds from 0 to the largest off-diagonal |σ_ij|."""
    return np.linspace(0.0, cov.max_off_diagonal(), size)


def select_threshold(
    D2: np.ndarray,
    B: int = 20,
    grid=None,
    rng: np.random.Generator | None = None,
) -> ThresholdSelection:
    """
    Choose γ by repeated random splits of the second subsample.

    Each split b draws a piece of size floor(n2(1 - 1/log n2)) and its
    complement; every γ is scored by ||T_γ(Σ̂_train) - Σ̂_validation||_F²
    averaged over the B splits. The smallest γ attaining the minimum wins.

    Args:
        D2: Second-subsample data (n2 x p)
        B: Number of random splits
        grid: Candidate thresholds (default: 20 points, see default_grid)
        rng: Seeded generator; each split gets its own child stream

    Returns:
        ThresholdSelection with the per-candidate mean scores in grid order
    """
    D2 = np.asarray(D2, dtype=float)
    if B < 1:
        raise ConfigError(f"B must be at least 1, got {B}")
    n2 = D2.shape[0]
    train, validation = split_sizes(n2)
    if rng is None:
        rng = np.random.default_rng()

    if grid is None:
        grid = default_grid(empirical_covariance(D2))
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ConfigError("threshold grid must be a non-empty list")
    if np.any(grid < 0):
        raise ConfigError("threshold grid values must be non-negative")

    children = np.random.SeedSequence(int(rng.integers(2**63))).spawn(B)
    totals = np.zeros(grid.size)
    for child in children:
        order = np.random.default_rng(child).permutation(n2)
        fit_piece = empirical_covariance(D2[order[:train]])
        check_piece = empirical_covariance(D2[order[train:]])
        for g, gamma in enumerate(grid):
            diff = hard_threshold(fit_piece, gamma).matrix - check_piece.matrix
            totals[g] += float(np.sum(diff * diff))
    scores = totals / B

    best = scores.min()
    gamma = float(grid[scores == best].min())
    logger.debug("threshold selection: gamma=%.4g over %d candidates, B=%d", gamma, grid.size, B)
    return ThresholdSelection(
        gamma=gamma,
        B=B,
        grid=grid,
        scores=scores,
        train_size=train,
        validation_size=validation,
    )


def second_stage_covariance(
    D2: np.ndarray,
    mode: Literal["thresholded", "empirical"] = "thresholded",
    B: int = 20,
    grid_size: int = 20,
    rng: np.random.Generator | None = None,
) -> tuple[CovarianceEstimate, ThresholdSelection | None]:
    """
    S for the aggregation weights: T_γ(Σ̂₂) with γ from select_threshold, or Σ̂₂ itself.
    """
    cov2 = empirical_covariance(D2)
    if mode == "empirical":
        return cov2, None
    if mode != "thresholded":
        raise ConfigError(f"unknown S matrix mode {mode!r}; choose thresholded or empirical")
    selection = select_threshold(D2, B=B, grid=default_grid(cov2, grid_size), rng=rng)
    return hard_threshold(cov2, selection.gamma), selection
