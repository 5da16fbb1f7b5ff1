"""
Evaluation Metrics

Scores an estimated precision matrix against the ground truth:
    1. squared Frobenius error
    2. Kullback-Leibler loss
    3-5. precision, recall and F1 of the recovered edge set

plus the excess-risk check of the aggregate against its best component.

Key Concept: Where the edges come from
    A gES mixture is dense, so its edges cannot be read off the nonzeros.
    Its edges are the slots whose averaged inclusion probability reaches
    DEFAULT_INCLUSION_THRESHOLD (edges_from_inclusion), or alternatively
    the slots visited in at least half of the retained MH iterations
    (edges_from_frequency). For everything else an edge is a slot with
    |θ̂_ij| > zero_tol.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np
from scipy import special

from src.aggregation import AggregationResult, PriorSpec, log_prior_unnormalized
from src.constrained_mle import PrecisionEstimate, logdet_pd
from src.covariance import CovarianceEstimate
from src.errors import ConfigError, EnumerationError, ShapeError
from src.graph_model import SparsityPattern, TrueModel

logger = logging.getLogger(__name__)

DEFAULT_ZERO_TOL = 1e-8
DEFAULT_FREQUENCY_THRESHOLD = 0.5
# About the complexity prior's per-edge odds at |m|₁ ≈ p for p in the tens
DEFAULT_INCLUSION_THRESHOLD = 0.03
EDGE_RULES = ("inclusion", "frequency")
DEFAULT_TRACE_BOUND = 10.0


@dataclass(frozen=True)
class StructureScores:
    precision: float
    recall: float
    f1: float
    n_estimated: int
    n_true: int
    n_common: int


@dataclass(frozen=True)
class EvalReport:
    """All five criteria for one estimate, with the edge counts behind them."""

    frobenius_sq: float
    kl: float
    precision: float
    recall: float
    f1: float
    n_estimated: int
    n_true: int
    n_common: int

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class EdgeOverlap:
    only_first: int
    only_second: int
    both: int


@dataclass(frozen=True)
class OracleGap:
    """
    Excess KL of the aggregate over its best component, and the slack of the
    exponential-weights bound

        KL(Θ̂_gES) <= min_m KL(Θ̂_m) + (2/n₂) log(1/π_m) + tr((Θ̂_m - Θ̂_gES)(S - Σ))
    """

    gap: float
    kl_aggregate: float
    best_kl: float
    bound: float
    slack: float


# =============================================================================
# Losses
# =============================================================================


def _check_shape(theta_hat: np.ndarray, truth: TrueModel) -> np.ndarray:
    theta_hat = np.asarray(theta_hat, dtype=float)
    if theta_hat.shape != truth.precision.shape:
        raise ShapeError(
            f"estimate of shape {theta_hat.shape} does not match truth {truth.precision.shape}"
        )
    return theta_hat


def kl_loss(theta_hat: np.ndarray, truth: TrueModel) -> float:
    """
    -logdet Θ̂ + tr(Θ̂Σ) - (-logdet Θ + p).

    Raises:
        NotPositiveDefiniteError: Θ̂ is not positive definite
    """
    theta_hat = _check_shape(theta_hat, truth)
    risk_hat = -logdet_pd(theta_hat) + float(np.sum(theta_hat * truth.covariance))
    risk_true = -logdet_pd(truth.precision) + truth.p
    return risk_hat - risk_true


def frobenius_sq(theta_hat: np.ndarray, truth: TrueModel) -> float:
    theta_hat = _check_shape(theta_hat, truth)
    diff = theta_hat - truth.precision
    return float(np.sum(diff * diff))


# =============================================================================
# Structure recovery
# =============================================================================


def structure_scores_from_edges(
    estimated: SparsityPattern,
    true: SparsityPattern,
) -> StructureScores:
    """
    Precision |Ê ∩ E|/|Ê|, recall |Ê ∩ E|/|E| and their harmonic mean.

    An empty side scores 1 when the other side is empty too, else 0.
    """
    if estimated.p != true.p:
        raise ShapeError(f"edge sets on {estimated.p} and {true.p} vertices")
    n_est = estimated.size
    n_true = true.size
    common = int(np.sum(estimated.bits & true.bits))

    if n_est == 0:
        precision = 1.0 if n_true == 0 else 0.0
    else:
        precision = common / n_est
    if n_true == 0:
        recall = 1.0 if n_est == 0 else 0.0
    else:
        recall = common / n_true
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return StructureScores(precision, recall, f1, n_est, n_true, common)


def structure_scores(
    theta_hat: np.ndarray,
    truth: TrueModel,
    zero_tol: float = DEFAULT_ZERO_TOL,
) -> StructureScores:
    """Scores for the edge set {|θ̂_ij| > zero_tol}."""
    theta_hat = _check_shape(theta_hat, truth)
    estimated = SparsityPattern.from_adjacency(theta_hat, tol=zero_tol)
    return structure_scores_from_edges(estimated, truth.pattern)


def edges_from_frequency(
    result: AggregationResult,
    threshold: float = DEFAULT_FREQUENCY_THRESHOLD,
) -> SparsityPattern:
    """Slots whose inclusion frequency over the retained iterations is >= threshold."""
    p = result.estimate.shape[0]
    return SparsityPattern(p, result.edge_frequency >= threshold)


def edges_from_inclusion(
    result: AggregationResult,
    threshold: float = DEFAULT_INCLUSION_THRESHOLD,
) -> SparsityPattern:
    """
    Slots whose averaged inclusion probability is >= threshold.

    Results without an inclusion vector use their edge frequency.
    """
    p = result.estimate.shape[0]
    inclusion = result.edge_frequency if result.inclusion is None else result.inclusion
    return SparsityPattern(p, inclusion >= threshold)


def select_edges(
    result: AggregationResult,
    rule: str = "inclusion",
    threshold: float | None = None,
) -> SparsityPattern:
    """
    The gES edge set under the named rule; threshold=None takes the rule's default.

    Raises:
        ConfigError: unknown rule
    """
    if rule == "inclusion":
        return edges_from_inclusion(
            result, DEFAULT_INCLUSION_THRESHOLD if threshold is None else threshold
        )
    if rule == "frequency":
        return edges_from_frequency(
            result, DEFAULT_FREQUENCY_THRESHOLD if threshold is None else threshold
        )
    raise ConfigError(f"unknown edge rule {rule!r}; choose {' or '.join(EDGE_RULES)}")


def edge_overlap(first: SparsityPattern, second: SparsityPattern) -> EdgeOverlap:
    if first.p != second.p:
        raise ShapeError(f"edge sets on {first.p} and {second.p} vertices")
    both = int(np.sum(first.bits & second.bits))
    return EdgeOverlap(only_first=first.size - both, only_second=second.size - both, both=both)


def evaluate(
    theta_hat: np.ndarray,
    truth: TrueModel,
    edges: SparsityPattern | None = None,
    zero_tol: float = DEFAULT_ZERO_TOL,
) -> EvalReport:
    """
    Full report for one estimate.

    Args:
        theta_hat: Estimated precision matrix
        truth: Ground truth
        edges: Selected edge set, when it is not the support of theta_hat
               (gES edge rule, test decisions)
        zero_tol: Support threshold used when edges is None
    """
    if edges is None:
        scores = structure_scores(theta_hat, truth, zero_tol)
    else:
        scores = structure_scores_from_edges(edges, truth.pattern)
    return EvalReport(
        frobenius_sq=frobenius_sq(theta_hat, truth),
        kl=kl_loss(theta_hat, truth),
        precision=scores.precision,
        recall=scores.recall,
        f1=scores.f1,
        n_estimated=scores.n_estimated,
        n_true=scores.n_true,
        n_common=scores.n_common,
    )


# =============================================================================
# Aggregation checks
# =============================================================================


def oracle_gap(
    result: AggregationResult,
    fits: list[PrecisionEstimate] | tuple[PrecisionEstimate, ...],
    truth: TrueModel,
    n2: int,
    prior: PriorSpec,
    S: CovarianceEstimate,
) -> OracleGap:
    """
    Excess risk of an exact mixture and the slack of its oracle bound.

    The prior is normalized exactly over the patterns of fits, which must be
    the components that were mixed.

    Raises:
        EnumerationError: fits is empty
    """
    if not fits:
        raise EnumerationError("oracle gap needs at least one enumerated fit")
    kl_aggregate = kl_loss(result.estimate, truth)
    kls = np.array([kl_loss(f.matrix, truth) for f in fits])

    log_priors = np.array([log_prior_unnormalized(f.pattern, prior) for f in fits])
    log_priors -= special.logsumexp(log_priors)

    noise = S.matrix - truth.covariance
    terms = [
        kl + (2.0 / n2) * (-lp) + float(np.sum((f.matrix - result.estimate) * noise))
        for f, kl, lp in zip(fits, kls, log_priors)
    ]
    bound = float(min(terms))
    best = float(kls.min())
    return OracleGap(
        gap=kl_aggregate - best,
        kl_aggregate=kl_aggregate,
        best_kl=best,
        bound=bound,
        slack=bound - kl_aggregate,
    )


def check_trace_bound(
    result: AggregationResult,
    p: int,
    bound: float = DEFAULT_TRACE_BOUND,
) -> bool:
    """True when every visited estimate has tr(Θ̂_m)/p <= bound; warns otherwise."""
    if result.max_trace_ratio > bound:
        logger.warning(
            "visited estimate with tr/p = %.3g above the bound %.3g (p=%d)",
            result.max_trace_ratio,
            bound,
            p,
        )
        return False
    return True
