"""
Data Nodes

The sequential head of a replication: ground truth, the Gaussian sample and
its split into two independent subsamples.

Input State:
    - cfg: ExperimentConfig
    - replication: replication id (selects the random streams)

Output State Updates:
    - truth: TrueModel (generate_truth_node)
    - data: n x p sample (sample_node)
    - d1, d2: first and second subsample (split_node)
"""

import math
from typing import Any

import numpy as np

from src.errors import DegenerateSplitError
from src.graph_model import generate_graph, sample_gaussian, synthesize_precision
from src.seeds import stage_rng
from src.state import ReplicationState


def split_sample(
    X: np.ndarray,
    fraction: float = 0.5,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Partition the rows of X into D1 of size floor(n·fraction) and D2 with the rest.

    Rows keep their original order inside each piece.

    Raises:
        DegenerateSplitError: either piece would be empty
    """
    X = np.asarray(X)
    n = X.shape[0]
    n1 = math.floor(n * fraction)
    if n1 < 1 or n - n1 < 1:
        raise DegenerateSplitError(
            f"splitting {n} rows at fraction {fraction} leaves an empty subsample", minimum=2
        )
    if rng is None:
        rng = np.random.default_rng()
    order = rng.permutation(n)
    first = np.sort(order[:n1])
    second = np.sort(order[n1:])
    return X[first], X[second]


def generate_truth_node(state: ReplicationState) -> dict[str, Any]:
    cfg = state["cfg"]
    rng = stage_rng(cfg.seed, state["replication"], "truth")
    adjacency = generate_graph(cfg.model, cfg.p, prob=cfg.prob, rng=rng)
    return {"truth": synthesize_precision(adjacency, cfg.edge_value, cfg.diag_value)}


def sample_node(state: ReplicationState) -> dict[str, Any]:
    cfg = state["cfg"]
    rng = stage_rng(cfg.seed, state["replication"], "sample")
    return {"data": sample_gaussian(state["truth"], cfg.n, rng)}


def split_node(state: ReplicationState) -> dict[str, Any]:
    """D1 fits the individual estimators and the pre-screen, D2 builds S."""
    cfg = state["cfg"]
    rng = stage_rng(cfg.seed, state["replication"], "split")
    d1, d2 = split_sample(state["data"], cfg.split, rng)
    return {"d1": d1, "d2": d2}
