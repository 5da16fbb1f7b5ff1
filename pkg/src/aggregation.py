"""
Exponential-Weight Aggregation over Sparsity Patterns

The gES estimator mixes constrained fits Θ̂_m with weights

    v_m ∝ exp{(n₂/2)(logdet Θ̂_m - tr(Θ̂_m S))} · π_m

where the fits come from the first subsample and S from the second.

Two ways to compute it:
    - exact_ges: fit every pattern of a small space and mix exactly
    - mh_run: a Metropolis-Hastings walk on the pattern hypercube whose
      ergodic average of Θ̂_{m_t} approximates the mixture

Key Concept: Log space
    (n₂/2)·logdet terms are in the hundreds for realistic n₂, so weights are
    only ever handled as logarithms; normalization is a max-shifted softmax
    and the MH acceptance uses log-weight differences. The prior's
    normalizing constant H cancels in both and is only computed when an
    exactly normalized prior is needed (oracle-inequality checks).
"""

from __future__ import annotations

import itertools
import logging
import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Literal

import numpy as np
from scipy import special

from src.constrained_mle import (
    FitCache,
    PrecisionEstimate,
    SolverConfig,
    logdet_pd,
)
from src.covariance import CovarianceEstimate
from src.errors import (
    ConfigError,
    EnumerationError,
    GESError,
    InvalidEdgeError,
    NonconvergenceError,
    NotPositiveDefiniteError,
    WeightError,
)
from src.graph_model import SparsityPattern, n_slots

logger = logging.getLogger(__name__)

PriorVariant = Literal["complexity", "uniform", "flat"]
SpaceKind = Literal["full", "restricted", "explicit"]

DEFAULT_ENUMERATION_CAP = 2**16


# =============================================================================
# Priors
# =============================================================================


@dataclass(frozen=True)
class PriorSpec:
    """
    Prior over patterns, a function of |m|₁ only.

    - complexity: (|m|₁ / (e·p(p-1)))^|m|₁
    - uniform: uniform over the cardinality, then uniform within it
    - flat: constant

    log_normalizer is subtracted from every log-prior; leave it at 0 for the
    unnormalized prior (all the weights need) or set it to prior_normalizer()
    for an exactly normalized one.
    """

    variant: PriorVariant = "complexity"
    p: int = 0
    log_normalizer: float = 0.0

    def __post_init__(self):
        if self.variant not in ("complexity", "uniform", "flat"):
            raise ConfigError(
                f"unknown prior {self.variant!r}; choose complexity, uniform or flat"
            )


def _log_prior_by_size(size: int, variant: PriorVariant, p: int) -> float:
    if variant == "flat":
        return 0.0
    if variant == "uniform":
        total = n_slots(p)
        log_binom = special.gammaln(total + 1) - special.gammaln(size + 1) - special.gammaln(
            total - size + 1
        )
        return float(-math.log(total + 1) - log_binom)
    if size == 0:
        return 0.0
    return size * (math.log(size) - 1.0 - math.log(p * (p - 1)))


def log_prior_unnormalized(m: SparsityPattern, prior: PriorSpec) -> float:
    """
    log π_m without the normalizing constant H.

    complexity at |m|₁ = 0 returns 0 (the empty product, 0⁰ = 1).
    """
    return _log_prior_by_size(m.size, prior.variant, prior.p or m.p)


def log_prior(m: SparsityPattern, prior: PriorSpec) -> float:
    """log π_m minus the prior's log_normalizer."""
    return log_prior_unnormalized(m, prior) - prior.log_normalizer


# =============================================================================
# Pattern spaces
# =============================================================================


@dataclass(frozen=True)
class PatternSpace:
    """
    The candidate set M.

    - full: every pattern on p vertices
    - restricted: bits may be set only on the candidate slots Q_p
      (M = ∏ C_k with C_k = {0,1} on Q_p and {0} elsewhere)
    - explicit: a de-duplicated list of patterns
    """

    kind: SpaceKind
    p: int
    candidates: tuple[int, ...] = ()
    patterns: tuple[SparsityPattern, ...] = field(default=(), repr=False)

    @classmethod
    def full(cls, p: int) -> PatternSpace:
        return cls(kind="full", p=p)

    @classmethod
    def explicit(cls, patterns) -> PatternSpace:
        unique: list[SparsityPattern] = []
        seen: set[SparsityPattern] = set()
        for m in patterns:
            if m not in seen:
                seen.add(m)
                unique.append(m)
        if not unique:
            raise ConfigError("an explicit pattern space needs at least one pattern")
        p = unique[0].p
        if any(m.p != p for m in unique):
            raise ConfigError("explicit pattern space mixes node counts")
        return cls(kind="explicit", p=p, patterns=tuple(unique))

    @property
    def size(self) -> int:
        if self.kind == "full":
            return 2 ** n_slots(self.p)
        if self.kind == "restricted":
            return 2 ** len(self.candidates)
        return len(self.patterns)

    def free_slots(self) -> np.ndarray:
        """Slots a pattern in this space may switch on."""
        if self.kind == "full":
            return np.arange(n_slots(self.p))
        if self.kind == "restricted":
            return np.asarray(self.candidates, dtype=int)
        bits = np.array([m.bits for m in self.patterns])
        return np.flatnonzero(bits.any(axis=0))

    def proposal_slots(self) -> np.ndarray:
        """Slots the MH proposal flips uniformly."""
        if self.kind != "explicit":
            return self.free_slots()
        bits = np.array([m.bits for m in self.patterns])
        return np.flatnonzero(bits.any(axis=0) & ~bits.all(axis=0))

    def contains(self, m: SparsityPattern) -> bool:
        if m.p != self.p:
            return False
        if self.kind == "full":
            return True
        if self.kind == "restricted":
            outside = np.ones(n_slots(self.p), dtype=bool)
            outside[list(self.candidates)] = False
            return not bool(np.any(m.bits & outside))
        return m in set(self.patterns)

    def __iter__(self) -> Iterator[SparsityPattern]:
        if self.kind == "explicit":
            yield from self.patterns
            return
        slots = self.free_slots()
        for choice in itertools.product((False, True), repeat=slots.size):
            bits = np.zeros(n_slots(self.p), dtype=bool)
            bits[slots] = choice
            yield SparsityPattern(self.p, bits)

    def start(self) -> SparsityPattern:
        """The empty pattern, or the first member of an explicit space without it."""
        empty = SparsityPattern.empty(self.p)
        if self.contains(empty):
            return empty
        return self.patterns[0]


def restrict_space(candidates, p: int) -> PatternSpace:
    """
    The product space over candidate slots Q_p.

    Raises:
        InvalidEdgeError: a slot is out of range
        ConfigError: a slot is listed twice
    """
    slots = [int(k) for k in candidates]
    total = n_slots(p)
    bad = [k for k in slots if not 0 <= k < total]
    if bad:
        raise InvalidEdgeError(f"candidate slots {bad} out of range for p={p}")
    if len(set(slots)) != len(slots):
        duplicates = sorted(k for k, count in Counter(slots).items() if count > 1)
        raise ConfigError(f"duplicate candidate slots {duplicates}")
    return PatternSpace(kind="restricted", p=p, candidates=tuple(sorted(slots)))


def prior_normalizer(prior: PriorSpec, space: PatternSpace) -> float:
    """
    log H = log Σ_{m ∈ M} π_m(unnormalized).

    Full and restricted spaces sum over cardinality classes, so no
    enumeration is needed; explicit spaces are summed member by member.
    """
    p = prior.p or space.p
    if space.kind == "explicit":
        terms = [_log_prior_by_size(m.size, prior.variant, p) for m in space.patterns]
        return float(special.logsumexp(terms))
    q = space.free_slots().size
    sizes = np.arange(q + 1)
    log_binom = special.gammaln(q + 1) - special.gammaln(sizes + 1) - special.gammaln(q - sizes + 1)
    terms = [lb + _log_prior_by_size(int(s), prior.variant, p) for s, lb in zip(sizes, log_binom)]
    return float(special.logsumexp(terms))


def complexity_normalizer(p: int) -> float:
    """H for the complexity prior on the full hypercube of p vertices."""
    return math.exp(prior_normalizer(PriorSpec("complexity", p), PatternSpace.full(p)))


# =============================================================================
# Weights
# =============================================================================


def log_weight_unnormalized(
    theta: PrecisionEstimate,
    S: CovarianceEstimate,
    n2: int,
    prior: PriorSpec,
) -> float:
    """
    (n₂/2)(logdet Θ̂ - tr(Θ̂S)) + log π_m.

    Raises:
        NotPositiveDefiniteError: Θ̂ is not positive definite
    """
    fit = logdet_pd(theta.matrix) - float(np.sum(theta.matrix * S.matrix))
    return 0.5 * n2 * fit + log_prior(theta.pattern, prior)


def normalize_weights(logw) -> np.ndarray:
    """
    Softmax of log-weights with max subtraction. Order is preserved.

    Raises:
        WeightError: empty input, or a NaN/infinite entry
    """
    logw = np.asarray(logw, dtype=float)
    if logw.ndim != 1 or logw.size == 0:
        raise WeightError("need a non-empty list of log-weights")
    if not np.all(np.isfinite(logw)):
        raise WeightError("log-weights must be finite")
    return special.softmax(logw)


# =============================================================================
# Results
# =============================================================================


@dataclass(frozen=True)
class MHConfig:
    """Burn-in T₀, retained iterations T, and the chain's seed."""

    burn_in: int = 1000
    samples: int = 4000
    seed: int | None = None

    def __post_init__(self):
        errors = []
        if self.burn_in < 0:
            errors.append(f"burn_in must be non-negative, got {self.burn_in}")
        if self.samples < 1:
            errors.append(f"samples must be at least 1, got {self.samples}")
        if errors:
            raise ConfigError("\n".join(errors))


@dataclass(frozen=True)
class AggregationResult:
    """
    Θ̂_gES and how it was obtained.

    For exact enumeration, patterns/fits/weights list the mixed components
    and acceptance_rate is None. For MH, the traces cover all T₀ + T
    iterations and edge_frequency/visit_counts cover the retained T.
    edge_frequency is the (weight- or visit-) averaged inclusion of each slot.
    inclusion is the averaged conditional probability of each slot being on
    given the rest of the pattern, exp(Δ)/(1 + exp(Δ)) with Δ the log-weight
    gain of switching it on, taken whenever the slot is proposed in the
    retained iterations; slots never proposed fall back to edge_frequency.
    For exact enumeration it equals edge_frequency.
    """

    estimate: np.ndarray
    visited_patterns: int
    acceptance_rate: float | None
    edge_frequency: np.ndarray
    max_trace_ratio: float
    failed_fits: int = 0
    size_trace: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    accepted_trace: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))
    log_weight_trace: np.ndarray = field(default_factory=lambda: np.zeros(0))
    burn_in: int = 0
    visit_counts: dict = field(default_factory=dict)
    patterns: tuple[SparsityPattern, ...] = ()
    fits: tuple[PrecisionEstimate, ...] = ()
    weights: np.ndarray | None = None
    inclusion: np.ndarray | None = None


# =============================================================================
# Exact enumeration
# =============================================================================


def exact_ges(
    cov1: CovarianceEstimate,
    S: CovarianceEstimate,
    n2: int,
    space: PatternSpace,
    prior: PriorSpec,
    solver_cfg: SolverConfig | None = None,
    cap: int = DEFAULT_ENUMERATION_CAP,
    jobs: int = 1,
) -> AggregationResult:
    """
    Fit every pattern of the space and mix with normalized weights.

    Patterns whose fit fails are dropped (with a warning) and the remaining
    weights renormalized.

    Raises:
        EnumerationError: the space is larger than cap, or every fit failed
    """
    if space.size > cap:
        raise EnumerationError(f"pattern space has {space.size} members, above the cap of {cap}")
    cache = FitCache(cov1, solver_cfg)
    members = list(space)

    def fit(m: SparsityPattern) -> PrecisionEstimate | None:
        try:
            return cache.get(m)
        except (NonconvergenceError, NotPositiveDefiniteError) as e:
            logger.warning("pattern %s dropped from the mixture: %s", m, e)
            return None

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as executor:
            fitted = list(executor.map(fit, members))
    else:
        fitted = [fit(m) for m in members]

    kept = [(m, f) for m, f in zip(members, fitted) if f is not None]
    if not kept:
        raise EnumerationError("every pattern fit failed; nothing to aggregate")
    patterns = tuple(m for m, _ in kept)
    fits = tuple(f for _, f in kept)

    logw = [log_weight_unnormalized(f, S, n2, prior) for f in fits]
    weights = normalize_weights(logw)
    estimate = np.tensordot(weights, np.array([f.matrix for f in fits]), axes=1)
    estimate = (estimate + estimate.T) / 2
    frequency = weights @ np.array([m.bits for m in patterns], dtype=float)
    p = cov1.p

    return AggregationResult(
        estimate=estimate,
        visited_patterns=len(fits),
        acceptance_rate=None,
        edge_frequency=frequency,
        max_trace_ratio=max(float(np.trace(f.matrix)) / p for f in fits),
        failed_fits=len(members) - len(fits),
        patterns=patterns,
        fits=fits,
        weights=weights,
        inclusion=frequency,
    )


# =============================================================================
# Metropolis-Hastings
# =============================================================================


def mh_run(
    cov1: CovarianceEstimate,
    S: CovarianceEstimate,
    n2: int,
    space: PatternSpace,
    prior: PriorSpec,
    solver_cfg: SolverConfig | None = None,
    mh: MHConfig | None = None,
    cache: FitCache | None = None,
) -> AggregationResult:
    """
    Approximate gES with a Metropolis-Hastings walk on the pattern hypercube.

    (S1) start at the empty pattern
    (S2) propose flipping one slot, uniform over the space's free slots
    (S3-S4) accept with probability min{1, v_m' / v_m}
    (S5) average Θ̂_{m_t} over the T iterations after the T₀ burn-in

    A proposal outside the space, or whose constrained fit fails, is
    rejected. When the space offers no slot to flip, the chain stays put
    and the iteration counts as accepted.

    Args:
        cov1: First-subsample covariance (fits the individual estimators)
        S: Second-subsample covariance used in the weights
        n2: Second-subsample size
        space: Candidate patterns
        prior: Pattern prior
        solver_cfg: Constrained-MLE settings
        mh: T₀, T and the seed
        cache: Optional pattern → fit store to share across calls

    Returns:
        AggregationResult with traces for every iteration

    Raises:
        GESError: the starting pattern cannot be fit (no usable iteration)
    """
    mh = mh or MHConfig()
    cache = cache or FitCache(cov1, solver_cfg)
    rng = np.random.default_rng(mh.seed)
    p = cov1.p

    m = space.start()
    try:
        current = cache.get(m)
    except (NonconvergenceError, NotPositiveDefiniteError) as e:
        raise GESError(f"starting pattern could not be fit, no usable iteration: {e}") from e
    logv = log_weight_unnormalized(current, S, n2, prior)

    slots = space.proposal_slots()
    total = mh.burn_in + mh.samples
    size_trace = np.empty(total, dtype=int)
    accepted_trace = np.zeros(total, dtype=bool)
    log_weight_trace = np.empty(total)
    running = np.zeros((p, p))
    frequency = np.zeros(n_slots(p))
    on_probability = np.zeros(n_slots(p))
    proposed = np.zeros(n_slots(p), dtype=int)
    visits: Counter = Counter()
    visited = {m}
    max_trace_ratio = float(np.trace(current.matrix)) / p
    failures = 0

    for t in range(total):
        if slots.size == 0:
            accepted = True
        else:
            slot = int(slots[rng.integers(slots.size)])
            proposal = m.flip(slot)
            u = rng.random()
            accepted = False
            if space.contains(proposal):
                try:
                    fit = cache.get(proposal, init=current.matrix)
                except (NonconvergenceError, NotPositiveDefiniteError):
                    failures += 1
                else:
                    logv_new = log_weight_unnormalized(fit, S, n2, prior)
                    delta = logv_new - logv
                    if t >= mh.burn_in:
                        gain = -delta if m.bits[slot] else delta
                        on_probability[slot] += special.expit(gain)
                        proposed[slot] += 1
                    if delta >= 0 or u < math.exp(delta):
                        accepted = True
                        m, current, logv = proposal, fit, logv_new
                        visited.add(m)
                        max_trace_ratio = max(max_trace_ratio, float(np.trace(fit.matrix)) / p)

        accepted_trace[t] = accepted
        size_trace[t] = m.size
        log_weight_trace[t] = logv
        if t >= mh.burn_in:
            running += current.matrix
            frequency += m.bits
            visits[m] += 1

    if failures:
        logger.warning("%d of %d proposals auto-rejected after failed fits", failures, total)

    estimate = running / mh.samples
    estimate = (estimate + estimate.T) / 2
    edge_frequency = frequency / mh.samples
    inclusion = np.divide(on_probability, proposed, out=edge_frequency.copy(), where=proposed > 0)
    return AggregationResult(
        estimate=estimate,
        visited_patterns=len(visited),
        acceptance_rate=float(accepted_trace.mean()),
        edge_frequency=edge_frequency,
        max_trace_ratio=max_trace_ratio,
        failed_fits=failures,
        size_trace=size_trace,
        accepted_trace=accepted_trace,
        log_weight_trace=log_weight_trace,
        burn_in=mh.burn_in,
        visit_counts=dict(visits),
        inclusion=inclusion,
    )
