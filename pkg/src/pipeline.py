"""
Benchmark Pipeline Assembly

One replication is a LangGraph workflow; a benchmark runs many of them on a
thread pool and aggregates the rows.

Graph Structure:
    START → generate_truth → sample → split → [ges, glasso, pcortest] (parallel) → END

    The fan-out after split is conditional: route_estimators returns the
    estimators named in the config, and LangGraph runs them as parallel
    branches that append to the rows/traces reducers.

Key Concept: Determinism
    Every node draws from its own seeded stream (src.seeds), and rows are
    re-sorted by (replication, estimator) after the pool finishes, so the
    CSV written with --jobs 1 and --jobs 8 is byte-identical.
"""

import dataclasses
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from langgraph.graph import END, START, StateGraph

from src.config import ESTIMATORS, ExperimentConfig
from src.errors import GESError
from src.metrics import evaluate
from src.nodes.baselines import glasso_node, pcortest_node
from src.nodes.data import generate_truth_node, sample_node, split_node
from src.nodes.ges import ges_node, run_ges
from src.nodes.rows import METRICS, failed_row
from src.state import ChainTrace, ReplicationState, ReportRow

logger = logging.getLogger(__name__)

FAILURE_LIMIT = 0.5


# =============================================================================
# Routing
# =============================================================================


def route_estimators(state: ReplicationState) -> list[str]:
    """Fan out to every configured estimator, in the canonical order."""
    chosen = set(state["cfg"].estimators)
    return [name for name in ESTIMATORS if name in chosen]


# =============================================================================
# Graph Builder
# =============================================================================


def build_replication_graph() -> StateGraph:
    """
    Build the replication graph (uncompiled).

    Returns:
        Uncompiled StateGraph, useful for visualization
    """
    graph = StateGraph(ReplicationState)

    # === Data ===
    graph.add_node("generate_truth", generate_truth_node)
    graph.add_node("sample", sample_node)
    graph.add_node("split", split_node)

    # === Estimators ===
    graph.add_node("ges", ges_node)
    graph.add_node("glasso", glasso_node)
    graph.add_node("pcortest", pcortest_node)

    graph.add_edge(START, "generate_truth")
    graph.add_edge("generate_truth", "sample")
    graph.add_edge("sample", "split")

    # Fan out: split → chosen estimators (parallel)
    graph.add_conditional_edges("split", route_estimators, list(ESTIMATORS))

    for name in ESTIMATORS:
        graph.add_edge(name, END)

    return graph


def get_graph_image(output_path: str = "pipeline.png") -> None:
    """
    Save a mermaid rendering of the replication graph.

    Example:
        get_graph_image("replication.png")
    """
    try:
        img = build_replication_graph().compile().get_graph().draw_mermaid_png()
        with open(output_path, "wb") as f:
            f.write(img)
        print(f"Graph saved to: {output_path}")
    except Exception as e:
        print(f"Could not generate graph image: {e}")


# =============================================================================
# Running
# =============================================================================


@dataclass
class PipelineResult:
    rows: list[ReportRow]
    aggregates: list[ReportRow]
    traces: list[ChainTrace] = field(default_factory=list)

    @property
    def failed_fraction(self) -> float:
        if not self.rows:
            return 0.0
        return sum(row["status"] == "failed" for row in self.rows) / len(self.rows)

    @property
    def too_many_failures(self) -> bool:
        return self.failed_fraction > FAILURE_LIMIT


def _row_key(row: ReportRow) -> tuple:
    return (row["replication"], ESTIMATORS.index(row["estimator"]))


def run_replication(cfg: ExperimentConfig, replication: int) -> tuple[list[ReportRow], list]:
    """
    Invoke the replication graph once.

    A failure before the estimators (truth, sampling or split) turns into
    one failed row per configured estimator.
    """
    initial: ReplicationState = {
        "cfg": cfg,
        "replication": replication,
        "rows": [],
        "traces": [],
    }
    try:
        final = graph.invoke(
            initial,
            config={
                "run_name": f"replication-{replication}",
                "tags": [cfg.graph_model.value],
                "metadata": {"n": cfg.n, "p": cfg.p, "seed": cfg.seed},
            },
        )
    except (GESError, np.linalg.LinAlgError) as e:
        logger.warning("replication %d failed before estimation: %s", replication, e)
        rows = [failed_row(cfg, name, replication, e) for name in route_estimators(initial)]
        return rows, []
    return sorted(final["rows"], key=_row_key), final.get("traces", [])


def aggregate_rows(rows: list[ReportRow]) -> list[ReportRow]:
    """
    Mean and standard error sd/sqrt(k) per (model, estimator) over the k
    successful replications. With fewer than two, the SE is NaN.
    """
    groups: dict[tuple, list[ReportRow]] = {}
    for row in rows:
        groups.setdefault((row["model"], row["n"], row["p"], row["estimator"]), []).append(row)

    aggregates = []
    for (model, n, p, estimator), members in groups.items():
        ok = [row for row in members if row["status"] == "ok"]
        agg: dict = {
            "model": model,
            "n": n,
            "p": p,
            "estimator": estimator,
            "replication": "mean",
            "status": "ok" if ok else "failed",
            "completed": len(ok),
        }
        for metric in METRICS:
            values = np.array([row[metric] for row in ok], dtype=float)
            k = values.size
            agg[metric] = float(values.mean()) if k else math.nan
            agg[f"{metric}_se"] = float(values.std(ddof=1) / math.sqrt(k)) if k > 1 else math.nan
        aggregates.append(agg)
    aggregates.sort(key=lambda row: ESTIMATORS.index(row["estimator"]))
    return aggregates


def run_pipeline(cfg: ExperimentConfig, jobs: int = 1) -> PipelineResult:
    """
    All replications of one experiment.

    Args:
        cfg: Validated experiment config
        jobs: Worker threads; the output does not depend on it

    Returns:
        PipelineResult with per-replication rows, aggregate rows and traces
    """
    cfg.validate()
    reps = range(cfg.replications)
    logger.info(
        "benchmark %s (n=%d, p=%d): %d replications on %d workers",
        cfg.graph_model.value,
        cfg.n,
        cfg.p,
        cfg.replications,
        jobs,
    )

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as executor:
            outcomes = list(executor.map(lambda r: run_replication(cfg, r), reps))
    else:
        outcomes = [run_replication(cfg, r) for r in reps]

    rows = sorted((row for rep_rows, _ in outcomes for row in rep_rows), key=_row_key)
    traces = sorted(
        (t for _, rep_traces in outcomes for t in rep_traces), key=lambda t: t["replication"]
    )
    result = PipelineResult(rows=rows, aggregates=aggregate_rows(rows), traces=traces)
    if result.failed_fraction:
        logger.warning("%.0f%% of replication rows failed", 100 * result.failed_fraction)
    return result


# =============================================================================
# Pre-screen sensitivity
# =============================================================================


def prescreen_sensitivity(
    cfg: ExperimentConfig,
    lambdas,
    replication: int = 0,
) -> list[dict]:
    """
    Re-run gES on one fixed replication for each pre-screen glasso lambda.

    Returns:
        One dict per lambda: lambda, |Q_p| and the five metrics (NaN when
        the run failed)
    """
    state: dict = {"cfg": cfg, "replication": replication}
    for node in (generate_truth_node, sample_node, split_node):
        state.update(node(state))

    results = []
    for lam in lambdas:
        screened = dataclasses.replace(
            cfg, screen=dataclasses.replace(cfg.screen, method="glasso", param=float(lam))
        )
        entry: dict = {"lambda": float(lam)}
        try:
            outcome = run_ges(state["d1"], state["d2"], screened, replication)
            report = evaluate(outcome.estimate, state["truth"], edges=outcome.edges)
            entry.update(
                candidates=outcome.screen.count,
                frobenius=report.frobenius_sq,
                kl=report.kl,
                precision=report.precision,
                recall=report.recall,
                f1=report.f1,
                status="ok",
            )
        except (GESError, np.linalg.LinAlgError) as e:
            logger.warning("sensitivity run at lambda=%.4g failed: %s", lam, e)
            entry.update(candidates=math.nan, status="failed", **{m: math.nan for m in METRICS})
        results.append(entry)
    return results


# For LangGraph Studio (langgraph.json) and run_replication
graph = build_replication_graph().compile()
