"""
Pre-screening and Baselines

Three ways of turning data into an edge set:
    - prescreen: a cheap first-stage filter on the first subsample that
      produces the candidate slots Q_p restricting the MH search
    - glasso_fit: the graphical lasso, both as a pre-screen and as the
      cross-validated baseline
    - pcor_test: Bonferroni-corrected tests of vanishing partial correlation

Key Concept: Keep the screen loose
    The pre-screen only decides which slots the MH chain may touch. A true
    edge it misses can never be recovered, while a false one merely costs
    search time, so the default glasso penalty is small (10% of the largest
    off-diagonal covariance) and the candidate list is capped at 3p.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy import stats
from sklearn.covariance import graphical_lasso
from sklearn.exceptions import ConvergenceWarning

from src.constrained_mle import inverse_pd, logdet_pd
from src.covariance import CovarianceEstimate, empirical_covariance
from src.errors import (
    ConfigError,
    DegenerateSplitError,
    NonconvergenceError,
    NotPositiveDefiniteError,
)
from src.graph_model import SparsityPattern, n_slots, upper_indices

logger = logging.getLogger(__name__)

ScreenMethod = Literal["glasso", "corr_threshold"]

DEFAULT_SCREEN_FRACTION = 0.1
DEFAULT_CORR_THRESHOLD = 0.1
CV_GRID_SIZE = 10


# =============================================================================
# Types
# =============================================================================


@dataclass(frozen=True)
class GlassoFit:
    """A graphical-lasso solution with its solver diagnostics."""

    theta: np.ndarray
    lam: float
    iterations: int
    converged: bool
    dual_gap: float
    objective: float
    # glasso_objective after each sweep
    objective_trace: tuple[float, ...] = ()

    @property
    def pattern(self) -> SparsityPattern:
        return SparsityPattern.from_adjacency(self.theta)


@dataclass(frozen=True)
class ScreenResult:
    """Candidate slots Q_p (sorted) and the statistic that ranked each one."""

    candidates: tuple[int, ...]
    method: ScreenMethod
    param: float
    statistics: np.ndarray = field(repr=False)

    @property
    def count(self) -> int:
        return len(self.candidates)


@dataclass(frozen=True)
class LambdaSelection:
    lam: float
    lambdas: np.ndarray
    scores: np.ndarray
    folds: int


@dataclass(frozen=True)
class PcorResult:
    """Edges kept by the partial-correlation test, with per-slot statistics."""

    edges: SparsityPattern
    partial_correlations: np.ndarray
    pvalues: np.ndarray
    alpha: float

    @property
    def level(self) -> float:
        """Bonferroni-corrected per-test level."""
        return self.alpha / max(n_slots(self.edges.p), 1)


# =============================================================================
# Graphical lasso
# =============================================================================


def glasso_objective(theta: np.ndarray, cov_matrix: np.ndarray, lam: float) -> float:
    """-logdet Θ + tr(Σ̂Θ) + λ Σ_{i≠j} |θ_ij|."""
    off = np.abs(theta).sum() - np.abs(np.diag(theta)).sum()
    return -logdet_pd(theta) + float(np.sum(cov_matrix * theta)) + lam * float(off)


def glasso_fit(
    cov: CovarianceEstimate,
    lam: float,
    tol: float = 1e-4,
    max_iter: int = 100,
) -> GlassoFit:
    """
    Graphical lasso by block coordinate descent (scikit-learn's row-by-row
    solver with a coordinate-descent lasso inside). Only off-diagonal entries
    are penalized.

    Convergence is judged by the duality gap of the final sweep: converged
    means |dual_gap| < tol. A run that hits max_iter is returned with
    converged=False.

    Raises:
        ConfigError: negative lambda
        NonconvergenceError: the solver broke down on an ill-conditioned Σ̂
    """
    if lam < 0:
        raise ConfigError(f"lambda must be non-negative, got {lam}")
    S = np.asarray(cov.matrix, dtype=float)
    if np.any(np.diag(S) <= 0):
        raise NotPositiveDefiniteError("covariance diagonal must be strictly positive")

    if lam == 0:
        theta = inverse_pd(S)
        gap = float(np.sum(S * theta)) - S.shape[0]
        return GlassoFit(
            theta=theta,
            lam=0.0,
            iterations=0,
            converged=True,
            dual_gap=gap,
            objective=glasso_objective(theta, S, 0.0),
        )

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        try:
            _, theta, costs, n_iter = graphical_lasso(
                S,
                alpha=lam,
                mode="cd",
                tol=tol,
                enet_tol=min(1e-4, tol),
                max_iter=max_iter,
                return_costs=True,
                return_n_iter=True,
            )
        except FloatingPointError as e:
            raise NonconvergenceError(f"graphical lasso broke down at lambda={lam:.4g}: {e}") from e

    # scikit-learn reports glasso_objective + 2p·log(2π)
    offset = 2 * S.shape[0] * math.log(2 * math.pi)
    theta = (theta + theta.T) / 2
    dual_gap = float(costs[-1][1]) if len(costs) else float("nan")
    converged = abs(dual_gap) < tol
    if not converged:
        logger.warning(
            "graphical lasso did not converge at lambda=%.4g (dual gap %.3g after %d sweeps)",
            lam,
            dual_gap,
            n_iter,
        )
    return GlassoFit(
        theta=theta,
        lam=float(lam),
        iterations=int(n_iter),
        converged=converged,
        dual_gap=dual_gap,
        objective=glasso_objective(theta, S, lam),
        objective_trace=tuple(float(c[0]) - offset for c in costs),
    )


def glasso_path(
    cov: CovarianceEstimate,
    lambdas,
    tol: float = 1e-4,
    max_iter: int = 100,
) -> list[GlassoFit]:
    """One fit per lambda, in the order given."""
    return [glasso_fit(cov, float(lam), tol=tol, max_iter=max_iter) for lam in lambdas]


def default_lambda_grid(cov: CovarianceEstimate, size: int = CV_GRID_SIZE) -> np.ndarray:
    """size log-spaced values from 1% of the largest off-diagonal |σ̂_ij| up to it."""
    top = cov.max_off_diagonal()
    if top <= 0:
        return np.zeros(1)
    return np.geomspace(0.01 * top, top, size)


def select_glasso_lambda(
    X: np.ndarray,
    lambdas=None,
    folds: int = 10,
    rng: np.random.Generator | None = None,
    tol: float = 1e-4,
    max_iter: int = 100,
) -> LambdaSelection:
    """
    K-fold cross-validation of the glasso penalty.

    Rows are shuffled once with rng and row r of the shuffle goes to fold
    r mod K. Each lambda is scored by the mean held-out Gaussian
    log-likelihood logdet Θ̂ - tr(Σ̂_test Θ̂). Ties go to the larger lambda.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    if folds < 2:
        raise ConfigError(f"cross-validation needs at least 2 folds, got {folds}")
    if n < folds:
        raise DegenerateSplitError(
            f"{folds}-fold cross-validation needs at least {folds} rows, got {n}", minimum=folds
        )
    if rng is None:
        rng = np.random.default_rng()
    if lambdas is None:
        lambdas = default_lambda_grid(empirical_covariance(X))
    lambdas = np.asarray(lambdas, dtype=float)

    order = rng.permutation(n)
    assignment = np.empty(n, dtype=int)
    assignment[order] = np.arange(n) % folds

    scores = np.zeros(lambdas.size)
    for f in range(folds):
        train = empirical_covariance(X[assignment != f])
        test = empirical_covariance(X[assignment == f])
        for g, lam in enumerate(lambdas):
            try:
                fit = glasso_fit(train, float(lam), tol=tol, max_iter=max_iter)
                scores[g] += logdet_pd(fit.theta) - float(np.sum(test.matrix * fit.theta))
            except (NonconvergenceError, NotPositiveDefiniteError):
                scores[g] = -np.inf
    scores /= folds

    if not np.any(np.isfinite(scores)):
        raise NonconvergenceError("graphical lasso failed on every fold for every lambda")
    best = scores.max()
    lam = float(lambdas[scores == best].max())
    logger.debug("glasso cross-validation: lambda=%.4g over %d candidates", lam, lambdas.size)
    return LambdaSelection(lam=lam, lambdas=lambdas, scores=scores, folds=folds)


# =============================================================================
# Pre-screening
# =============================================================================


def correlation_matrix(cov: CovarianceEstimate) -> np.ndarray:
    scale = 1.0 / np.sqrt(np.diag(cov.matrix))
    return cov.matrix * np.outer(scale, scale)


def prescreen(
    D1: np.ndarray,
    method: ScreenMethod = "glasso",
    param: float | None = None,
    max_candidates: int | None = None,
) -> ScreenResult:
    """
    Build the candidate slots Q_p from the first subsample.

    Args:
        D1: First-subsample data (n1 x p)
        method: "glasso" keeps the support of a glasso fit at lambda=param;
                "corr_threshold" keeps slots with |correlation| >= param
        param: lambda or tau; defaults to 0.1·max|σ̂_ij| for glasso and 0.1
               for corr_threshold
        max_candidates: Cap on |Q_p| (default 3p); the slots with the largest
               |statistic| survive

    Returns:
        ScreenResult with candidates in slot order
    """
    cov = empirical_covariance(D1)
    p = cov.p
    rows, cols = upper_indices(p)

    if method == "glasso":
        lam = DEFAULT_SCREEN_FRACTION * cov.max_off_diagonal() if param is None else param
        fit = glasso_fit(cov, lam)
        statistic = np.abs(fit.theta[rows, cols])
        keep = statistic > 0
    elif method == "corr_threshold":
        lam = DEFAULT_CORR_THRESHOLD if param is None else param
        statistic = np.abs(correlation_matrix(cov)[rows, cols])
        keep = statistic >= lam
    else:
        raise ConfigError(f"unknown screening method {method!r}; choose glasso or corr_threshold")

    slots = np.flatnonzero(keep)
    if max_candidates is None:
        max_candidates = 3 * p
    if slots.size > max_candidates:
        ranked = slots[np.argsort(-statistic[slots], kind="stable")]
        slots = np.sort(ranked[:max_candidates])
        logger.debug("pre-screen capped at %d of %d candidates", max_candidates, int(keep.sum()))

    return ScreenResult(
        candidates=tuple(int(k) for k in slots),
        method=method,
        param=float(lam),
        statistics=statistic[slots],
    )


# =============================================================================
# Partial-correlation test
# =============================================================================


def pcor_test(D: np.ndarray, alpha: float = 0.05) -> PcorResult:
    """
    Select edges whose full-order partial correlation differs from zero.

    ρ̂_ij = -θ̂_ij / sqrt(θ̂_ii θ̂_jj) with Θ̂ = Σ̂⁻¹; the Fisher transform
    atanh(ρ̂)·sqrt(n - p - 1) is compared two-sided against N(0, 1), and an
    edge is kept when its p-value is below alpha / (p(p-1)/2).

    Raises:
        ConfigError: n <= p + 2, or alpha outside (0, 1)
        NotPositiveDefiniteError: Σ̂ is singular
    """
    D = np.asarray(D, dtype=float)
    n, p = D.shape
    if not 0 < alpha < 1:
        raise ConfigError(f"alpha must lie in (0, 1), got {alpha}")
    if n <= p + 2:
        raise ConfigError(f"partial-correlation test needs n > p + 2, got n={n}, p={p}")

    cov = empirical_covariance(D)
    try:
        theta = inverse_pd(cov.matrix)
    except NotPositiveDefiniteError as e:
        raise NotPositiveDefiniteError(
            "sample covariance is singular; the partial-correlation test "
            f"only applies when n > p: {e}"
        ) from e

    rows, cols = upper_indices(p)
    scale = np.sqrt(np.diag(theta))
    rho = -theta[rows, cols] / (scale[rows] * scale[cols])
    rho = np.clip(rho, -1 + 1e-15, 1 - 1e-15)
    z = np.arctanh(rho) * math.sqrt(n - p - 1)
    pvalues = 2 * stats.norm.sf(np.abs(z))

    level = alpha / max(n_slots(p), 1)
    edges = SparsityPattern(p, pvalues < level)
    logger.debug("pcor test kept %d of %d slots at level %.3g", edges.size, n_slots(p), level)
    return PcorResult(edges=edges, partial_correlations=rho, pvalues=pvalues, alpha=alpha)
