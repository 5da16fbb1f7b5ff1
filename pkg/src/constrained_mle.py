"""
Constrained Maximum Likelihood on a Sparsity Pattern

Solves

    maximize  logdet(Θ) - tr(Σ̂Θ)   subject to  θ_ij = 0 for (i,j) ∉ E_m, i ≠ j

At the optimum Θ⁻¹ reproduces Σ̂ on the diagonal and on every edge of the
pattern. The solver enforces exactly that, one constraint block at a time.

Key Concept: Edgewise iterative proportional scaling
    Keep W = Θ⁻¹. For a block c (one vertex {i} or one edge {i, j}):

        Θ_cc ← Θ_cc + (Σ̂_cc⁻¹ - W_cc⁻¹)
        W    ← W - W_{:,c} K W_{c,:},   K = W_cc⁻¹ (W_cc - Σ̂_cc) W_cc⁻¹

    After the step W_cc = Σ̂_cc. Only entries inside c change, so the
    zeros off the pattern stay exact, and the step keeps Θ positive
    definite whenever Σ̂_cc is. One sweep visits the diagonal and then
    every edge; W is recomputed from Θ after each sweep.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from src.covariance import CovarianceEstimate
from src.errors import ConfigError, NonconvergenceError, NotPositiveDefiniteError
from src.graph_model import SparsityPattern, n_slots, upper_indices

logger = logging.getLogger(__name__)


# =============================================================================
# Types
# =============================================================================


@dataclass(frozen=True)
class SolverConfig:
    """Tolerance on the max-norm KKT residual, sweep cap, and opt-in ridge."""

    tol: float = 1e-7
    max_iter: int = 500
    ridge: float = 0.0

    def __post_init__(self):
        errors = []
        if not self.tol > 0:
            errors.append(f"tol must be positive, got {self.tol}")
        if self.max_iter < 1:
            errors.append(f"max_iter must be at least 1, got {self.max_iter}")
        if self.ridge < 0:
            errors.append(f"ridge must be non-negative, got {self.ridge}")
        if errors:
            raise ConfigError("\n".join(errors))


@dataclass(frozen=True)
class PrecisionEstimate:
    """Θ̂_m with the pattern it was fit under and solver diagnostics."""

    matrix: np.ndarray
    pattern: SparsityPattern
    iterations: int
    kkt_residual: float
    converged: bool
    objective: float
    objective_trace: tuple[float, ...] = ()
    ridge: float = 0.0

    @property
    def p(self) -> int:
        return self.matrix.shape[0]


# =============================================================================
# Positive-definite helpers
# =============================================================================


def cholesky(matrix: np.ndarray) -> tuple[np.ndarray, bool]:
    try:
        return linalg.cho_factor(matrix, lower=True, check_finite=True)
    except (linalg.LinAlgError, ValueError) as e:
        raise NotPositiveDefiniteError(f"matrix is not positive definite: {e}") from e


def logdet_pd(matrix: np.ndarray) -> float:
    """log det via Cholesky."""
    factor, _ = cholesky(matrix)
    return 2.0 * float(np.sum(np.log(np.diag(factor))))


def inverse_pd(matrix: np.ndarray) -> np.ndarray:
    factor = cholesky(matrix)
    inverse = linalg.cho_solve(factor, np.eye(matrix.shape[0]))
    return (inverse + inverse.T) / 2


def is_positive_definite(matrix: np.ndarray) -> bool:
    try:
        cholesky(matrix)
    except NotPositiveDefiniteError:
        return False
    return True


def gaussian_objective(theta: np.ndarray, cov_matrix: np.ndarray) -> float:
    """logdet(Θ) - tr(Σ̂Θ)."""
    return logdet_pd(theta) - float(np.sum(cov_matrix * theta))


# =============================================================================
# KKT residual
# =============================================================================


def _constraint_residual(
    W: np.ndarray,
    theta: np.ndarray,
    S: np.ndarray,
    pattern: SparsityPattern,
) -> float:
    diag = np.abs(np.diag(W) - np.diag(S))
    residual = float(diag.max()) if diag.size else 0.0
    rows, cols = upper_indices(S.shape[0])
    on = pattern.bits
    if on.any():
        residual = max(residual, float(np.abs(W[rows[on], cols[on]] - S[rows[on], cols[on]]).max()))
    off = ~on
    if off.any():
        residual = max(residual, float(np.abs(theta[rows[off], cols[off]]).max()))
    return residual


def kkt_residual(theta: PrecisionEstimate, cov: CovarianceEstimate) -> float:
    """
    Max-norm violation of the stationarity conditions.

    max over E_m ∪ diag of |[Θ̂⁻¹]_ij - Σ̂_ij|, together with max |θ_ij| off
    the pattern (zero by construction).

    Raises:
        NotPositiveDefiniteError: Θ̂ is not positive definite
    """
    W = inverse_pd(theta.matrix)
    return _constraint_residual(W, theta.matrix, cov.matrix, theta.pattern)


# =============================================================================
# Solver
# =============================================================================


class _WorkingMatrixNotPD(Exception):
    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


def _inv2(a: float, b: float, d: float) -> np.ndarray:
    det = a * d - b * b
    return np.array([[d, -b], [-b, a]]) / det


def _check_blocks(S: np.ndarray, edges: list[tuple[int, int]]) -> None:
    for i, j in edges:
        if S[i, i] * S[j, j] - S[i, j] ** 2 <= 0:
            raise _WorkingMatrixNotPD(
                f"covariance block on edge ({i + 1}, {j + 1}) is singular", residual=float("inf")
            )


def _initial_theta(S: np.ndarray, pattern: SparsityPattern, init: np.ndarray | None) -> np.ndarray:
    if init is not None:
        start = np.where(pattern.off_pattern_mask(), 0.0, init)
        if is_positive_definite(start):
            return start
        logger.debug("warm start not positive definite on the target pattern; using diagonal start")
    return np.diag(1.0 / np.diag(S))


def _sweep(theta: np.ndarray, W: np.ndarray, S: np.ndarray, edges: list[tuple[int, int]]) -> None:
    p = S.shape[0]
    for i in range(p):
        w = W[i, i]
        theta[i, i] += 1.0 / S[i, i] - 1.0 / w
        col = W[:, i].copy()
        W -= ((w - S[i, i]) / (w * w)) * np.outer(col, col)

    for i, j in edges:
        c = [i, j]
        W_inv = _inv2(W[i, i], W[i, j], W[j, j])
        S_inv = _inv2(S[i, i], S[i, j], S[j, j])
        theta[np.ix_(c, c)] += S_inv - W_inv
        gap = np.array(
            [[W[i, i] - S[i, i], W[i, j] - S[i, j]], [W[i, j] - S[i, j], W[j, j] - S[j, j]]]
        )
        K = W_inv @ gap @ W_inv
        cols = W[:, c].copy()
        W -= cols @ K @ cols.T


def _solve(
    S: np.ndarray,
    pattern: SparsityPattern,
    cfg: SolverConfig,
    init: np.ndarray | None,
    ridge: float,
) -> PrecisionEstimate:
    p = S.shape[0]
    edges = pattern.edges()

    if p > 1 and pattern.size == n_slots(p):
        try:
            theta = inverse_pd(S)
        except NotPositiveDefiniteError as e:
            raise _WorkingMatrixNotPD(str(e), residual=float("inf")) from e
        W = inverse_pd(theta)
        residual = _constraint_residual(W, theta, S, pattern)
        obj = gaussian_objective(theta, S)
        return PrecisionEstimate(
            matrix=theta,
            pattern=pattern,
            iterations=0,
            kkt_residual=residual,
            converged=residual < cfg.tol,
            objective=obj,
            objective_trace=(obj,),
            ridge=ridge,
        )

    _check_blocks(S, edges)
    theta = _initial_theta(S, pattern, init)
    W = inverse_pd(theta)
    residual = _constraint_residual(W, theta, S, pattern)
    trace = [gaussian_objective(theta, S)]
    iterations = 0

    while residual >= cfg.tol and iterations < cfg.max_iter:
        _sweep(theta, W, S, edges)
        iterations += 1
        if not np.all(np.isfinite(theta)):
            raise NonconvergenceError(
                f"solver diverged after {iterations} sweeps (|m|={pattern.size})", residual=residual
            )
        theta = (theta + theta.T) / 2
        try:
            W = inverse_pd(theta)
        except NotPositiveDefiniteError as e:
            raise _WorkingMatrixNotPD(str(e), residual=residual) from e
        residual = _constraint_residual(W, theta, S, pattern)
        trace.append(gaussian_objective(theta, S))

    converged = residual < cfg.tol
    if not converged:
        logger.debug(
            "constrained fit stopped at %d sweeps with residual %.3g (|m|=%d)",
            iterations,
            residual,
            pattern.size,
        )
    return PrecisionEstimate(
        matrix=theta,
        pattern=pattern,
        iterations=iterations,
        kkt_residual=residual,
        converged=converged,
        objective=trace[-1],
        objective_trace=tuple(trace),
        ridge=ridge,
    )


def fit_constrained_mle(
    cov: CovarianceEstimate,
    m: SparsityPattern,
    cfg: SolverConfig | None = None,
    init: np.ndarray | None = None,
) -> PrecisionEstimate:
    """
    Fit Θ̂_m by edgewise iterative proportional scaling.

    Args:
        cov: Empirical covariance Σ̂ (symmetric, positive diagonal)
        m: Sparsity pattern; off-pattern entries are held at exactly zero
        cfg: Tolerance, sweep cap and ridge
        init: Optional warm start. It is projected onto the pattern and used
              only if still positive definite; otherwise Θ₀ = diag(1/σ̂_ii).

    Returns:
        PrecisionEstimate. converged is False when max_iter sweeps were not
        enough to bring the residual under cfg.tol.

    Raises:
        NonconvergenceError: the working matrix lost positive definiteness
            (after one ridge restart when cfg.ridge > 0), or the iterates
            diverged. A constrained MLE that does not exist ends here too.
    """
    cfg = cfg or SolverConfig()
    S = np.asarray(cov.matrix, dtype=float)
    if S.shape != (m.p, m.p):
        raise ConfigError(f"pattern for p={m.p} does not match covariance of shape {S.shape}")
    if np.any(np.diag(S) <= 0):
        raise NotPositiveDefiniteError("covariance diagonal must be strictly positive")

    try:
        return _solve(S, m, cfg, init, ridge=0.0)
    except _WorkingMatrixNotPD as e:
        if cfg.ridge <= 0:
            raise NonconvergenceError(
                f"working matrix not positive definite: {e}", residual=e.residual
            ) from e
        logger.warning("constrained fit restarted with ridge %.3g: %s", cfg.ridge, e)

    try:
        return _solve(S + cfg.ridge * np.eye(m.p), m, cfg, None, ridge=cfg.ridge)
    except _WorkingMatrixNotPD as e:
        raise NonconvergenceError(
            f"working matrix not positive definite after ridge {cfg.ridge}: {e}",
            residual=e.residual,
        ) from e


# =============================================================================
# Fit cache
# =============================================================================


class FitCache:
    """
    Pattern → estimate store for one covariance, safe for concurrent use.

    Failed fits are remembered too, so a failing pattern is solved once.
    """

    def __init__(self, cov: CovarianceEstimate, cfg: SolverConfig | None = None):
        self.cov = cov
        self.cfg = cfg or SolverConfig()
        self._fingerprint = cov.fingerprint
        self._store: dict[tuple[str, bytes], PrecisionEstimate | Exception] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.fits = 0

    def __len__(self) -> int:
        return len(self._store)

    def get(self, m: SparsityPattern, init: np.ndarray | None = None) -> PrecisionEstimate:
        """
        The cached fit for m, solving it on first request.

        Raises:
            NonconvergenceError: the fit failed or did not converge (also on
                later requests for the same pattern)
        """
        key = (self._fingerprint, m.key)
        with self._lock:
            cached = self._store.get(key)
            if cached is not None:
                self.hits += 1
        if cached is None:
            try:
                cached = fit_constrained_mle(self.cov, m, self.cfg, init=init)
                if not cached.converged:
                    cached = NonconvergenceError(
                        f"no convergence within {self.cfg.max_iter} sweeps",
                        residual=cached.kkt_residual,
                    )
            except (NonconvergenceError, NotPositiveDefiniteError) as e:
                cached = e
            with self._lock:
                self._store.setdefault(key, cached)
                self.fits += 1
        if isinstance(cached, Exception):
            raise cached
        return cached
