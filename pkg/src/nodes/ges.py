"""
gES Node

Runs the graphical Exponential Screening estimator on the two subsamples.

Input State:
    - cfg, replication
    - truth: TrueModel (scoring only)
    - d1: first subsample (individual fits and pre-screen)
    - d2: second subsample (S for the weights)

Output State Updates:
    - rows: one ReportRow for "ges" (failed row on any library error)
    - traces: the MH chain trace (MH aggregation only)

Key Decision:
    The chain only walks the product space over the pre-screened slots
    Q_p. Exact enumeration is available for small Q_p via
    cfg.aggregation = "exact".
"""

import dataclasses
import logging
import time
from dataclasses import dataclass
from typing import Any

import numpy as np

from src.aggregation import AggregationResult, exact_ges, mh_run, restrict_space
from src.config import ExperimentConfig
from src.covariance import (
    CovarianceEstimate,
    ThresholdSelection,
    empirical_covariance,
    second_stage_covariance,
)
from src.errors import GESError, ShapeError
from src.graph_model import SparsityPattern
from src.metrics import check_trace_bound, evaluate, select_edges
from src.nodes.rows import failed_row, make_row
from src.screening import ScreenResult, prescreen
from src.seeds import chain_seed, stage_rng
from src.state import ChainTrace, ReplicationState

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GESOutcome:
    estimate: np.ndarray
    edges: SparsityPattern
    result: AggregationResult
    screen: ScreenResult
    selection: ThresholdSelection | None
    cov1: CovarianceEstimate
    S: CovarianceEstimate

    def diagnostics(self) -> dict:
        result = self.result
        return {
            "visited_patterns": result.visited_patterns,
            "acceptance_rate": result.acceptance_rate,
            "failed_fits": result.failed_fits,
            "max_trace_ratio": result.max_trace_ratio,
            "candidates": self.screen.count,
            "screen_param": self.screen.param,
            "gamma": self.S.gamma,
        }


def run_ges(
    D1: np.ndarray,
    D2: np.ndarray,
    cfg: ExperimentConfig,
    replication: int = 0,
    S: CovarianceEstimate | None = None,
) -> GESOutcome:
    """
    The full gES estimate from two subsamples.

    Random streams come from cfg.seed and replication: the threshold splits
    use the "threshold" stage, the MH chain the "ges" stage. A given S
    replaces the second-stage covariance built from D2.

    Raises:
        ShapeError: S is not p x p
    """
    p = D1.shape[1]
    cov1 = empirical_covariance(D1)
    selection = None
    if S is None:
        S, selection = second_stage_covariance(
            D2,
            mode=cfg.s_matrix,
            B=cfg.threshold.B,
            grid_size=cfg.threshold.grid_size,
            rng=stage_rng(cfg.seed, replication, "threshold"),
        )
    elif S.p != p:
        raise ShapeError(f"second-stage covariance is {S.p} x {S.p}, data has p={p}")
    screen = prescreen(D1, cfg.screen.method, cfg.screen.param, cfg.screen.max_candidates)
    space = restrict_space(screen.candidates, p)
    prior = cfg.prior_spec
    n2 = D2.shape[0]
    logger.debug("gES replication %d: |Q_p|=%d, s-matrix %s", replication, screen.count, S.kind)

    if cfg.aggregation == "exact":
        result = exact_ges(cov1, S, n2, space, prior, cfg.solver, cap=cfg.enumeration_cap)
    else:
        mh = dataclasses.replace(cfg.mh, seed=chain_seed(cfg.seed, replication))
        result = mh_run(cov1, S, n2, space, prior, cfg.solver, mh)

    check_trace_bound(result, p, cfg.trace_bound)
    return GESOutcome(
        estimate=result.estimate,
        edges=select_edges(result, cfg.edge_rule, cfg.edge_threshold),
        result=result,
        screen=screen,
        selection=selection,
        cov1=cov1,
        S=S,
    )


def chain_trace(result: AggregationResult, replication: int) -> ChainTrace:
    return ChainTrace(
        replication=replication,
        edges=result.size_trace.tolist(),
        accepted=result.accepted_trace.tolist(),
        log_weight=result.log_weight_trace.tolist(),
    )


def ges_node(state: ReplicationState) -> dict[str, Any]:
    cfg = state["cfg"]
    r = state["replication"]
    start = time.perf_counter()
    try:
        outcome = run_ges(state["d1"], state["d2"], cfg, r)
        report = evaluate(outcome.estimate, state["truth"], edges=outcome.edges)
    except (GESError, np.linalg.LinAlgError) as e:
        logger.warning("gES failed in replication %d: %s", r, e)
        return {"rows": [failed_row(cfg, "ges", r, e, time.perf_counter() - start)]}

    elapsed = time.perf_counter() - start
    update: dict[str, Any] = {
        "rows": [make_row(cfg, "ges", r, report, elapsed, outcome.diagnostics())]
    }
    if outcome.result.acceptance_rate is not None:
        update["traces"] = [chain_trace(outcome.result, r)]
    return update
