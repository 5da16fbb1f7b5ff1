"""
Baseline Nodes

The two comparison estimators, both run on the full sample.

Input State:
    - cfg, replication
    - truth: TrueModel (scoring only)
    - data: the full n x p sample

Output State Updates:
    - rows: one ReportRow each for "glasso" and "pcortest"
"""

import logging
import time
from typing import Any

import numpy as np

from src.config import ExperimentConfig
from src.constrained_mle import fit_constrained_mle
from src.covariance import empirical_covariance
from src.errors import GESError
from src.graph_model import SparsityPattern
from src.metrics import evaluate
from src.nodes.rows import failed_row, make_row
from src.screening import default_lambda_grid, glasso_fit, pcor_test, select_glasso_lambda
from src.seeds import stage_rng
from src.state import ReplicationState

logger = logging.getLogger(__name__)


def run_glasso(
    X: np.ndarray,
    cfg: ExperimentConfig,
    replication: int = 0,
) -> tuple[np.ndarray, SparsityPattern | None, dict]:
    """Glasso at the cross-validated lambda. Its edges are the support of Θ̂."""
    cov = empirical_covariance(X)
    selection = select_glasso_lambda(
        X,
        lambdas=default_lambda_grid(cov, cfg.cv.grid_size),
        folds=cfg.cv.folds,
        rng=stage_rng(cfg.seed, replication, "glasso"),
        tol=cfg.cv.tol,
        max_iter=cfg.cv.max_iter,
    )
    fit = glasso_fit(cov, selection.lam, tol=cfg.cv.tol, max_iter=cfg.cv.max_iter)
    diagnostics = {
        "lambda": fit.lam,
        "iterations": fit.iterations,
        "converged": fit.converged,
        "dual_gap": fit.dual_gap,
    }
    return fit.theta, None, diagnostics


def run_pcortest(
    X: np.ndarray,
    cfg: ExperimentConfig,
    replication: int = 0,
) -> tuple[np.ndarray, SparsityPattern, dict]:
    """Edges from the partial-correlation test; Θ̂ is the constrained MLE on them."""
    result = pcor_test(X, cfg.alpha)
    fit = fit_constrained_mle(empirical_covariance(X), result.edges, cfg.solver)
    diagnostics = {
        "level": result.level,
        "iterations": fit.iterations,
        "converged": fit.converged,
        "kkt_residual": fit.kkt_residual,
    }
    return fit.matrix, result.edges, diagnostics


BASELINES = {
    "glasso": run_glasso,
    "pcortest": run_pcortest,
}


def _baseline_node(name: str, state: ReplicationState) -> dict[str, Any]:
    cfg = state["cfg"]
    r = state["replication"]
    start = time.perf_counter()
    try:
        theta, edges, diagnostics = BASELINES[name](state["data"], cfg, r)
        report = evaluate(theta, state["truth"], edges=edges, zero_tol=cfg.zero_tol)
    except (GESError, np.linalg.LinAlgError) as e:
        logger.warning("%s failed in replication %d: %s", name, r, e)
        return {"rows": [failed_row(cfg, name, r, e, time.perf_counter() - start)]}
    elapsed = time.perf_counter() - start
    return {"rows": [make_row(cfg, name, r, report, elapsed, diagnostics)]}


def glasso_node(state: ReplicationState) -> dict[str, Any]:
    return _baseline_node("glasso", state)


def pcortest_node(state: ReplicationState) -> dict[str, Any]:
    return _baseline_node("pcortest", state)
