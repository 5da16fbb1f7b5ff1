"""
Tests for the pattern-constrained Gaussian MLE.

Random instances are checked against a dense Newton solver (tests/oracles.py)
that shares no code with the edgewise scaling iterations.
"""

import numpy as np
import pytest

from src.constrained_mle import (
    FitCache,
    SolverConfig,
    fit_constrained_mle,
    inverse_pd,
    is_positive_definite,
    kkt_residual,
    logdet_pd,
)
from src.covariance import CovarianceEstimate, empirical_covariance
from src.errors import ConfigError, NonconvergenceError, NotPositiveDefiniteError
from src.graph_model import SparsityPattern, n_slots
from tests.oracles import constrained_mle_newton


def _random_instance(seed: int) -> tuple[CovarianceEstimate, SparsityPattern]:
    rng = np.random.default_rng(seed)
    p = int(rng.integers(2, 7))
    A = rng.standard_normal((p, p))
    sigma = A @ A.T + p * np.eye(p)
    X = rng.multivariate_normal(np.zeros(p), sigma, size=5 * p + 10)
    bits = rng.random(n_slots(p)) < 0.5
    return empirical_covariance(X), SparsityPattern(p, bits)


def _cycle_instance() -> tuple[CovarianceEstimate, SparsityPattern]:
    """A four-cycle, which is not chordal, so scaling needs many sweeps."""
    rng = np.random.default_rng(0)
    A = rng.standard_normal((4, 4))
    X = rng.multivariate_normal(np.zeros(4), A @ A.T + 4 * np.eye(4), size=40)
    return empirical_covariance(X), SparsityPattern.from_slots([0, 2, 3, 5], 4)


SINGULAR_EDGE = CovarianceEstimate(
    matrix=np.array([[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 1.0]]), n=10
)


class TestClosedForms:
    def test_full_pattern_is_inverse(self, chain_cov):
        fit = fit_constrained_mle(chain_cov, SparsityPattern.full(3))
        assert np.allclose(fit.matrix, np.linalg.inv(chain_cov.matrix), atol=1e-8)
        assert fit.iterations <= 1
        assert fit.converged

    def test_empty_pattern_is_diagonal(self, chain_cov):
        S = chain_cov.matrix * np.array([1.0, 2.0, 4.0])[:, None]
        S = (S + S.T) / 2
        cov = CovarianceEstimate(matrix=S, n=10)
        fit = fit_constrained_mle(cov, SparsityPattern.empty(3))
        assert np.array_equal(fit.matrix, np.diag(1.0 / np.diag(S)))

    def test_chain_pattern(self, chain_cov):
        m = SparsityPattern.from_slots([0, 2], 3)
        fit = fit_constrained_mle(chain_cov, m)
        W = np.linalg.inv(fit.matrix)

        assert fit.matrix[0, 2] == 0.0
        assert W[0, 1] == pytest.approx(0.5, abs=1e-8)
        assert W[1, 2] == pytest.approx(0.5, abs=1e-8)
        assert np.allclose(np.diag(W), 1.0, atol=1e-8)

        # decomposable model: clique inverses minus the separator inverse
        S = chain_cov.matrix
        expected = np.zeros((3, 3))
        expected[:2, :2] += np.linalg.inv(S[:2, :2])
        expected[1:, 1:] += np.linalg.inv(S[1:, 1:])
        expected[1, 1] -= 1.0 / S[1, 1]
        assert np.allclose(fit.matrix, expected, atol=1e-8)

    def test_chain_pattern_matches_newton(self, chain_cov):
        m = SparsityPattern.from_slots([0, 2], 3)
        fit = fit_constrained_mle(chain_cov, m)
        assert np.allclose(fit.matrix, constrained_mle_newton(chain_cov.matrix, m), atol=1e-8)
        assert fit.kkt_residual < 1e-8


class TestKKTResidual:
    def test_inverse_on_full_pattern(self, chain_cov):
        fit = fit_constrained_mle(chain_cov, SparsityPattern.full(3))
        assert kkt_residual(fit, chain_cov) < 1e-10

    def test_diagonal_on_empty_pattern(self, chain_cov):
        fit = fit_constrained_mle(chain_cov, SparsityPattern.empty(3))
        assert kkt_residual(fit, chain_cov) < 1e-12

    def test_not_positive_definite(self, chain_cov):
        fit = fit_constrained_mle(chain_cov, SparsityPattern.empty(3))
        broken = type(fit)(
            matrix=-fit.matrix,
            pattern=fit.pattern,
            iterations=0,
            kkt_residual=0.0,
            converged=True,
            objective=0.0,
        )
        with pytest.raises(NotPositiveDefiniteError):
            kkt_residual(broken, chain_cov)


@pytest.mark.parametrize("seed", range(50))
def test_random_instances_match_newton(seed):
    cov, m = _random_instance(seed)
    fit = fit_constrained_mle(cov, m)
    assert fit.converged
    assert kkt_residual(fit, cov) < 1e-7
    assert np.linalg.norm(fit.matrix - constrained_mle_newton(cov.matrix, m)) < 1e-6
    assert np.all(fit.matrix[m.off_pattern_mask()] == 0.0)


class TestSolverBehaviour:
    def test_objective_never_decreases(self):
        cov, m = _random_instance(3)
        fit = fit_constrained_mle(cov, m, SolverConfig(tol=1e-10))
        assert np.all(np.diff(fit.objective_trace) >= -1e-10)

    def test_warm_start_reaches_same_fit(self):
        cov, m = _random_instance(8)
        cold = fit_constrained_mle(cov, m)
        warm = fit_constrained_mle(cov, m, init=np.linalg.inv(cov.matrix))
        assert np.allclose(cold.matrix, warm.matrix, atol=1e-6)

    def test_unusable_warm_start_falls_back(self):
        cov, m = _random_instance(8)
        cold = fit_constrained_mle(cov, m)
        warm = fit_constrained_mle(cov, m, init=-np.eye(cov.p))
        assert np.array_equal(cold.matrix, warm.matrix)

    def test_iteration_cap_reports_no_convergence(self):
        cov, m = _cycle_instance()
        fit = fit_constrained_mle(cov, m, SolverConfig(tol=1e-15, max_iter=1))
        assert fit.iterations == 1
        assert not fit.converged

    def test_singular_block_raises(self):
        with pytest.raises(NonconvergenceError) as info:
            fit_constrained_mle(SINGULAR_EDGE, SparsityPattern.from_slots([0], 3))
        assert info.value.residual == float("inf")

    def test_ridge_restart(self):
        fit = fit_constrained_mle(
            SINGULAR_EDGE, SparsityPattern.from_slots([0], 3), SolverConfig(ridge=0.1)
        )
        assert fit.ridge == 0.1
        assert is_positive_definite(fit.matrix)

    def test_shape_mismatch(self, chain_cov):
        with pytest.raises(ConfigError):
            fit_constrained_mle(chain_cov, SparsityPattern.empty(4))

    def test_nonpositive_diagonal(self):
        cov = CovarianceEstimate(matrix=np.diag([1.0, 0.0]), n=3)
        with pytest.raises(NotPositiveDefiniteError):
            fit_constrained_mle(cov, SparsityPattern.empty(2))

    @pytest.mark.parametrize(
        "kwargs", [{"tol": 0.0}, {"max_iter": 0}, {"ridge": -1.0}]
    )
    def test_invalid_solver_config(self, kwargs):
        with pytest.raises(ConfigError):
            SolverConfig(**kwargs)


class TestHelpers:
    def test_logdet_matches_slogdet(self, chain_cov):
        assert logdet_pd(chain_cov.matrix) == pytest.approx(np.linalg.slogdet(chain_cov.matrix)[1])

    def test_inverse_is_symmetric(self, chain_cov):
        inv = inverse_pd(chain_cov.matrix)
        assert np.array_equal(inv, inv.T)

    def test_indefinite(self):
        assert not is_positive_definite(np.array([[1.0, 2.0], [2.0, 1.0]]))


class TestFitCache:
    def test_second_request_is_a_hit(self, chain_cov):
        cache = FitCache(chain_cov)
        m = SparsityPattern.from_slots([0], 3)
        first = cache.get(m)
        second = cache.get(SparsityPattern.from_slots([0], 3))
        assert first is second
        assert (cache.fits, cache.hits, len(cache)) == (1, 1, 1)

    def test_failure_is_remembered(self):
        cache = FitCache(SINGULAR_EDGE)
        m = SparsityPattern.from_slots([0], 3)
        for _ in range(2):
            with pytest.raises(NonconvergenceError):
                cache.get(m)
        assert cache.fits == 1

    def test_unconverged_fit_is_a_failure(self):
        cov, m = _cycle_instance()
        cache = FitCache(cov, SolverConfig(tol=1e-15, max_iter=1))
        with pytest.raises(NonconvergenceError):
            cache.get(m)


class TestNestedPatterns:
    """Growing the pattern can only raise the maximized likelihood."""

    @pytest.mark.parametrize("seed", range(10))
    def test_objective_grows_along_nested_patterns(self, seed):
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((40, 5))
        cov = empirical_covariance(X)
        m = SparsityPattern.empty(5)
        previous = fit_constrained_mle(cov, m).objective
        for k in rng.permutation(n_slots(5)):
            m = m.flip(int(k))
            objective = fit_constrained_mle(cov, m).objective
            assert objective >= previous - 1e-8
            previous = objective

    @pytest.mark.parametrize("seed", range(5))
    def test_trace_against_s_is_p_for_every_pattern(self, seed):
        cov, _ = _random_instance(seed)
        m = SparsityPattern.empty(cov.p)
        for k in np.random.default_rng(seed).permutation(n_slots(cov.p)):
            m = m.flip(int(k))
            fit = fit_constrained_mle(cov, m)
            assert np.sum(fit.matrix * cov.matrix) == pytest.approx(cov.p, abs=1e-6)
