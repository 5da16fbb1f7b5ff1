"""Report-row construction shared by the estimator nodes."""

import math

from src.config import ExperimentConfig
from src.metrics import EvalReport
from src.state import ReportRow

METRICS = ("frobenius", "kl", "precision", "recall", "f1")


def make_row(
    cfg: ExperimentConfig,
    estimator: str,
    replication: int,
    report: EvalReport,
    wall_time: float,
    diagnostics: dict,
) -> ReportRow:
    return ReportRow(
        model=cfg.graph_model.value,
        n=cfg.n,
        p=cfg.p,
        estimator=estimator,
        replication=replication,
        status="ok",
        frobenius=report.frobenius_sq,
        kl=report.kl,
        precision=report.precision,
        recall=report.recall,
        f1=report.f1,
        wall_time=wall_time,
        diagnostics={
            **diagnostics,
            "n_estimated": report.n_estimated,
            "n_true": report.n_true,
            "n_common": report.n_common,
        },
    )


def failed_row(
    cfg: ExperimentConfig,
    estimator: str,
    replication: int,
    error: Exception | str,
    wall_time: float = 0.0,
) -> ReportRow:
    """A row whose metrics are NaN; the run continues."""
    return ReportRow(
        model=cfg.graph_model.value,
        n=cfg.n,
        p=cfg.p,
        estimator=estimator,
        replication=replication,
        status="failed",
        **{metric: math.nan for metric in METRICS},
        wall_time=wall_time,
        error=str(error),
    )
