"""
Seed Derivation

Every random draw of a benchmark comes from a numpy PCG64 generator seeded
by SeedSequence(master, spawn_key=(replication, stage)). A stage's stream
depends only on the master seed, the replication and the stage, never on
which thread ran it or in which order, so serial and parallel runs agree
bit for bit.
"""

import numpy as np

STAGES = {
    "truth": 0,
    "sample": 1,
    "split": 2,
    "ges": 3,
    "threshold": 4,
    "glasso": 5,
    "pcortest": 6,
}


def stage_seed(master: int, replication: int, stage: str) -> np.random.SeedSequence:
    return np.random.SeedSequence(master, spawn_key=(replication, STAGES[stage]))


def stage_rng(master: int, replication: int, stage: str) -> np.random.Generator:
    """The generator for one stage of one replication."""
    return np.random.default_rng(stage_seed(master, replication, stage))


def chain_seed(master: int, replication: int) -> int:
    """Integer seed for the MH chain of a replication."""
    return int(stage_seed(master, replication, "ges").generate_state(1, dtype=np.uint64)[0])
