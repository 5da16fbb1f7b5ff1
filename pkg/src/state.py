"""
State Schema for the Replication Workflow

One benchmark replication flows through a LangGraph StateGraph. The state
is the shared memory its nodes read and update.

Key Concept: TypedDict with Reducers
    - Last-value channels (truth, data, d1, d2) are written by exactly one
      node each, before the estimators fan out
    - rows and traces use Annotated[list, operator.add]: the estimator
      nodes run as parallel branches and each appends its own entries

Example:
    # ges and glasso finish in the same step
    {"rows": [ges_row]} + {"rows": [glasso_row]}  ->  rows == [ges_row, glasso_row]
"""

import operator
from typing import Annotated, Literal, NotRequired, TypedDict

import numpy as np

from src.config import ExperimentConfig
from src.graph_model import TrueModel


class ReportRow(TypedDict):
    """
    One (estimator, replication) result, or an aggregate over replications.

    Aggregate rows have replication "mean" and carry <metric>_se columns.
    """

    model: str
    n: int
    p: int
    estimator: Literal["ges", "glasso", "pcortest"]
    replication: int | str
    status: Literal["ok", "failed"]

    frobenius: float
    kl: float
    precision: float
    recall: float
    f1: float

    # Aggregate rows only
    frobenius_se: NotRequired[float]
    kl_se: NotRequired[float]
    precision_se: NotRequired[float]
    recall_se: NotRequired[float]
    f1_se: NotRequired[float]
    completed: NotRequired[int]

    # Per-replication rows only; JSON report
    wall_time: NotRequired[float]
    error: NotRequired[str]
    diagnostics: NotRequired[dict]


class ChainTrace(TypedDict):
    """Per-iteration record of one MH chain: |m_t|₁, accepted flag, log-weight."""

    replication: int
    edges: list[int]
    accepted: list[bool]
    log_weight: list[float]


class ReplicationState(TypedDict):
    """
    The state of one replication graph run.

    Example node:
        def split_node(state: ReplicationState) -> dict:
            X = state["data"]
            ...
            return {"d1": D1, "d2": D2}
    """

    # === Inputs ===
    cfg: ExperimentConfig
    replication: int

    # === Data ===
    truth: NotRequired[TrueModel]
    data: NotRequired[np.ndarray]
    d1: NotRequired[np.ndarray]
    d2: NotRequired[np.ndarray]

    # === Outputs (appended by parallel estimator branches) ===
    rows: Annotated[list[ReportRow], operator.add]
    traces: Annotated[list[ChainTrace], operator.add]
