"""
Graph Model: Edge Indexing, Sparsity Patterns and Ground Truth

Everything that knows how a graph on p vertices is laid out lives here.

Key Concept: The ordered edge list
    The p(p-1)/2 vertex pairs are laid out lexicographically:
        (1,2), (1,3), ..., (1,p), (2,3), ..., (p-1,p)
    which is exactly numpy's ``np.triu_indices(p, k=1)`` order. A sparsity
    pattern is a bit vector over these slots; bit k says whether the k-th
    pair is an edge.

Vertices are 1-based in public signatures and files, 0-based in arrays.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache

import numpy as np
from scipy import linalg

from src.errors import ConfigError, InvalidEdgeError, SynthesisError

logger = logging.getLogger(__name__)


# =============================================================================
# Edge Indexing
# =============================================================================


def n_slots(p: int) -> int:
    """Number of vertex pairs, p(p-1)/2."""
    return p * (p - 1) // 2


@lru_cache(maxsize=64)
def upper_indices(p: int) -> tuple[np.ndarray, np.ndarray]:
    """0-based (rows, cols) of every slot, in slot order."""
    rows, cols = np.triu_indices(p, k=1)
    rows.setflags(write=False)
    cols.setflags(write=False)
    return rows, cols


@dataclass(frozen=True)
class EdgeIndex:
    """One slot of the ordered edge list. i < j are 1-based, k is 0-based."""

    i: int
    j: int
    k: int


def edge_index(i: int, j: int, p: int) -> int:
    """
    Linear slot of the 1-based vertex pair (i, j).

    Args:
        i: First vertex, 1 <= i
        j: Second vertex, i < j <= p
        p: Node count

    Returns:
        Slot k with 0 <= k < p(p-1)/2

    Example:
        edge_index(1, 4, p=4)  # 2: (1,2), (1,3), (1,4)
    """
    if not (1 <= i < j <= p):
        raise InvalidEdgeError(f"invalid edge ({i}, {j}) for p={p}: need 1 <= i < j <= p")
    a = i - 1
    return a * p - a * (a + 1) // 2 + (j - i - 1)


def edge_pair(k: int, p: int) -> EdgeIndex:
    """Inverse of edge_index: slot k -> 1-based pair."""
    if not (0 <= k < n_slots(p)):
        raise InvalidEdgeError(f"invalid slot {k} for p={p}: need 0 <= k < {n_slots(p)}")
    rows, cols = upper_indices(p)
    return EdgeIndex(i=int(rows[k]) + 1, j=int(cols[k]) + 1, k=k)


# =============================================================================
# Sparsity Patterns
# =============================================================================


@dataclass(frozen=True, eq=False)
class SparsityPattern:
    """
    A model index m: a read-only boolean vector over the p(p-1)/2 slots.

    Patterns compare bitwise and hash by their packed bits, so they can key
    the estimator cache and sets of visited patterns.
    """

    p: int
    bits: np.ndarray = field(repr=False)

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=bool).copy()
        if bits.shape != (n_slots(self.p),):
            raise InvalidEdgeError(
                f"pattern for p={self.p} needs {n_slots(self.p)} bits, got shape {bits.shape}"
            )
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    # --- constructors ---

    @classmethod
    def empty(cls, p: int) -> SparsityPattern:
        return cls(p, np.zeros(n_slots(p), dtype=bool))

    @classmethod
    def full(cls, p: int) -> SparsityPattern:
        return cls(p, np.ones(n_slots(p), dtype=bool))

    @classmethod
    def from_slots(cls, slots, p: int) -> SparsityPattern:
        bits = np.zeros(n_slots(p), dtype=bool)
        slots = np.asarray(list(slots), dtype=int)
        if slots.size and (slots.min() < 0 or slots.max() >= n_slots(p)):
            raise InvalidEdgeError(f"slot out of range for p={p}")
        bits[slots] = True
        return cls(p, bits)

    @classmethod
    def from_adjacency(cls, adjacency: np.ndarray, tol: float = 0.0) -> SparsityPattern:
        """Slots whose off-diagonal entry exceeds tol in absolute value."""
        adjacency = np.asarray(adjacency)
        p = adjacency.shape[0]
        rows, cols = upper_indices(p)
        return cls(p, np.abs(adjacency[rows, cols]) > tol)

    @classmethod
    def from_string(cls, text: str, p: int) -> SparsityPattern:
        return cls(p, np.array([c == "1" for c in text], dtype=bool))

    # --- queries ---

    @property
    def size(self) -> int:
        """|m|_1, the number of edges."""
        return int(self.bits.sum())

    @property
    def slots(self) -> np.ndarray:
        return np.flatnonzero(self.bits)

    @property
    def key(self) -> bytes:
        return np.packbits(self.bits).tobytes()

    def edges(self) -> list[tuple[int, int]]:
        """0-based (i, j) pairs of E_m."""
        rows, cols = upper_indices(self.p)
        return [(int(rows[k]), int(cols[k])) for k in self.slots]

    def issubset(self, other: SparsityPattern) -> bool:
        return bool(np.all(~self.bits | other.bits))

    def flip(self, k: int) -> SparsityPattern:
        bits = self.bits.copy()
        bits[k] = not bits[k]
        return SparsityPattern(self.p, bits)

    def to_adjacency(self) -> np.ndarray:
        adj = np.zeros((self.p, self.p), dtype=np.int8)
        rows, cols = upper_indices(self.p)
        adj[rows[self.bits], cols[self.bits]] = 1
        return adj + adj.T

    def off_pattern_mask(self) -> np.ndarray:
        """Boolean p x p mask of off-diagonal entries outside E_m."""
        mask = self.to_adjacency() == 0
        np.fill_diagonal(mask, False)
        return mask

    # --- protocol ---

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparsityPattern):
            return NotImplemented
        return self.p == other.p and bool(np.array_equal(self.bits, other.bits))

    def __hash__(self) -> int:
        return hash((self.p, self.key))

    def __str__(self) -> str:
        return "".join("1" if b else "0" for b in self.bits)


def pattern_neighbors(m: SparsityPattern) -> list[SparsityPattern]:
    """All patterns at Manhattan distance one from m, in slot order."""
    return [m.flip(k) for k in range(n_slots(m.p))]


# =============================================================================
# Synthetic Graphs
# =============================================================================


class GraphModel(str, Enum):
    AR = "AR"
    HUB = "Hub"
    RANDOM = "Random"

    @classmethod
    def parse(cls, value: str | GraphModel) -> GraphModel:
        if isinstance(value, GraphModel):
            return value
        for member in cls:
            if member.value.lower() == str(value).lower():
                return member
        raise ConfigError(f"unknown graph model {value!r}; choose AR, Hub or Random")


def default_random_prob(p: int) -> float:
    """Edge probability giving an expected edge count of p."""
    return min(1.0, 2.0 / (p - 1)) if p > 1 else 0.0


def generate_graph(
    model: str | GraphModel,
    p: int,
    prob: float | None = None,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """
    Generate a symmetric 0/1 adjacency matrix with zero diagonal.

    - AR: edges between consecutive vertices (p-1 edges)
    - Hub: vertices split into p/10 consecutive groups of ten; the first
      vertex of each group is joined to the other nine
    - Random: each slot is an edge independently with probability prob

    AR and Hub ignore rng.
    """
    model = GraphModel.parse(model)
    if p < 1:
        raise ConfigError(f"p must be positive, got {p}")
    adj = np.zeros((p, p), dtype=np.int8)

    if model is GraphModel.AR:
        idx = np.arange(p - 1)
        adj[idx, idx + 1] = 1

    elif model is GraphModel.HUB:
        if p % 10 != 0:
            raise ConfigError(f"Hub model needs p divisible by 10, got p={p}")
        for start in range(0, p, 10):
            adj[start, start + 1 : start + 10] = 1

    else:
        if prob is None:
            prob = default_random_prob(p)
        if not 0.0 <= prob <= 1.0:
            raise ConfigError(f"Random model needs prob in [0, 1], got {prob}")
        if rng is None:
            raise ConfigError("Random model needs a seeded generator")
        rows, cols = upper_indices(p)
        on = rng.random(rows.size) < prob
        adj[rows[on], cols[on]] = 1

    return adj + adj.T


# =============================================================================
# Ground Truth
# =============================================================================


@dataclass(frozen=True)
class TrueModel:
    """Ground truth: adjacency, precision Θ and covariance Σ = Θ⁻¹."""

    adjacency: np.ndarray
    precision: np.ndarray
    covariance: np.ndarray

    @property
    def p(self) -> int:
        return self.precision.shape[0]

    @property
    def pattern(self) -> SparsityPattern:
        """m⁰: the nonzero off-diagonal slots of the precision matrix."""
        return SparsityPattern.from_adjacency(self.precision)

    @property
    def n_edges(self) -> int:
        """s⁰."""
        return self.pattern.size


def _build_precision(adjacency: np.ndarray, edge_value: float, diag_value: float) -> np.ndarray:
    precision = edge_value * adjacency.astype(float)
    np.fill_diagonal(precision, diag_value)
    return precision


def synthesize_precision(
    adjacency: np.ndarray,
    edge_value: float = 0.3,
    diag_value: float = 1.0,
) -> TrueModel:
    """
    Build Θ with edge_value on edges and diag_value on the diagonal.

    If Θ is not positive definite the diagonal is raised once to
    |λ_min| + 0.1 + diag_value.

    Raises:
        ConfigError: edge_value is zero
        SynthesisError: still not positive definite after the boost
    """
    if edge_value == 0:
        raise ConfigError("edge_value must be nonzero")
    adjacency = np.asarray(adjacency)

    precision = _build_precision(adjacency, edge_value, diag_value)
    lam_min = float(np.linalg.eigvalsh(precision)[0]) if precision.size else 1.0
    if lam_min <= 0:
        boosted = abs(lam_min) + 0.1 + diag_value
        logger.info("precision not PD (lambda_min=%.4g); diagonal raised to %.4g", lam_min, boosted)
        precision = _build_precision(adjacency, edge_value, boosted)

    try:
        factor = linalg.cho_factor(precision, lower=True)
    except linalg.LinAlgError as e:
        raise SynthesisError(f"precision matrix not positive definite after boost: {e}") from e

    covariance = linalg.cho_solve(factor, np.eye(precision.shape[0]))
    covariance = (covariance + covariance.T) / 2
    return TrueModel(
        adjacency=adjacency.astype(np.int8), precision=precision, covariance=covariance
    )


def sample_gaussian(truth: TrueModel, n: int, rng: np.random.Generator) -> np.ndarray:
    """n draws from N_p(0, Σ): standard normals times the Cholesky factor of Σ."""
    chol = np.linalg.cholesky(truth.covariance)
    z = rng.standard_normal((n, truth.p))
    return z @ chol.T
