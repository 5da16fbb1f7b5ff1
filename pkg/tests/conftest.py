"""
Shared fixtures.

Desk-scale reproductions are marked slow and skipped unless pytest runs
with --runslow.
"""

import numpy as np
import pytest

from src.aggregation import MHConfig
from src.config import CVConfig, ExperimentConfig, ThresholdConfig
from src.covariance import CovarianceEstimate
from src.graph_model import generate_graph, sample_gaussian, synthesize_precision


def pytest_addoption(parser):
    parser.addoption(
        "--runslow", action="store_true", default=False, help="run desk-scale reproductions"
    )


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def chain_cov():
    """p=3 covariance whose AR-pattern fit has a closed form."""
    matrix = np.array([[1.0, 0.5, 0.25], [0.5, 1.0, 0.5], [0.25, 0.5, 1.0]])
    return CovarianceEstimate(matrix=matrix, n=100)


@pytest.fixture
def ar_truth():
    return synthesize_precision(generate_graph("AR", 5))


@pytest.fixture
def ar_data():
    """Factory: AR truth on p vertices and n seeded draws from it."""

    def make(p: int, n: int, seed: int):
        truth = synthesize_precision(generate_graph("AR", p))
        return truth, sample_gaussian(truth, n, np.random.default_rng(seed))

    return make


@pytest.fixture
def small_experiment():
    """A benchmark small enough to run in a few seconds."""
    return ExperimentConfig(
        model="AR",
        n=120,
        p=8,
        replications=2,
        seed=7,
        s_matrix="thresholded",
        mh=MHConfig(burn_in=100, samples=300),
        threshold=ThresholdConfig(B=4, grid_size=8),
        cv=CVConfig(folds=5, grid_size=5),
    )
