"""
Matrix and Edge-List Files

Formats:
    - dense CSV: one matrix row per line, comma separated
    - covariance CSV: the header line `p,kind,gamma`, a line with those
      values (gamma empty for empirical), then the p matrix rows
    - edge list: `i j value` per line, 1-based vertices, i < j

Floats are written with 17 significant digits so files read back exactly.
"""

import csv
from pathlib import Path

import numpy as np

from src.covariance import CovarianceEstimate
from src.errors import ParseError, ReportError
from src.graph_model import SparsityPattern, edge_index, upper_indices

COVARIANCE_HEADER = ["p", "kind", "gamma"]


def format_float(value: float) -> str:
    return f"{float(value):.17g}"


def _open_for_write(path: str | Path):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        return open(path, "w", newline="")
    except OSError as e:
        raise ReportError(f"cannot write {path}: {e}") from e


def _parse_float(cell: str, row: int, column: int) -> float:
    try:
        return float(cell)
    except ValueError:
        raise ParseError(f"non-numeric value {cell!r}", row=row, column=column) from None


def _parse_rows(lines: list[list[str]], first_row: int) -> np.ndarray:
    if not lines:
        raise ParseError("no matrix rows", row=first_row)
    width = len(lines[0])
    values = []
    for offset, cells in enumerate(lines):
        r = first_row + offset
        if len(cells) != width:
            raise ParseError(f"expected {width} values, found {len(cells)}", row=r)
        values.append([_parse_float(c.strip(), r, col + 1) for col, c in enumerate(cells)])
    return np.array(values, dtype=float)


def write_matrix_csv(path: str | Path, matrix: np.ndarray) -> None:
    with _open_for_write(path) as f:
        writer = csv.writer(f)
        for row in np.atleast_2d(matrix):
            writer.writerow([format_float(v) for v in row])


def read_matrix_csv(path: str | Path) -> np.ndarray:
    with open(path, newline="") as f:
        lines = [cells for cells in csv.reader(f) if cells]
    return _parse_rows(lines, first_row=1)


def write_covariance_csv(path: str | Path, cov: CovarianceEstimate) -> None:
    gamma = "" if cov.gamma is None else format_float(cov.gamma)
    with _open_for_write(path) as f:
        writer = csv.writer(f)
        writer.writerow(COVARIANCE_HEADER)
        writer.writerow([cov.p, cov.kind, gamma])
        for row in cov.matrix:
            writer.writerow([format_float(v) for v in row])


def read_covariance_csv(path: str | Path, n: int = 0) -> CovarianceEstimate:
    """
    Raises:
        ParseError: bad header, or a matrix that is not p x p
    """
    with open(path, newline="") as f:
        lines = [cells for cells in csv.reader(f) if cells]
    if len(lines) < 2 or [c.strip() for c in lines[0]] != COVARIANCE_HEADER:
        raise ParseError("covariance file must start with the header p,kind,gamma", row=1)
    p_cell, kind, gamma_cell = (c.strip() for c in lines[1])
    p = int(_parse_float(p_cell, 2, 1))
    if kind not in ("empirical", "thresholded"):
        raise ParseError(f"unknown covariance kind {kind!r}", row=2, column=2)
    gamma = _parse_float(gamma_cell, 2, 3) if gamma_cell else None
    matrix = _parse_rows(lines[2:], first_row=3)
    if matrix.shape != (p, p):
        rows, cols = matrix.shape
        raise ParseError(f"expected a {p} x {p} matrix, found {rows} x {cols}")
    return CovarianceEstimate(matrix=matrix, n=n, kind=kind, gamma=gamma)


def write_edge_list(
    path: str | Path,
    pattern: SparsityPattern,
    values: np.ndarray | None = None,
) -> None:
    """
    One line per edge of the pattern.

    Args:
        values: A p x p matrix to read each edge's value from, or one value
                per edge in slot order; defaults to 1
    """
    rows, cols = upper_indices(pattern.p)
    slots = pattern.slots
    if values is None:
        weights = np.ones(slots.size)
    else:
        values = np.asarray(values, dtype=float)
        weights = values[rows[slots], cols[slots]] if values.ndim == 2 else values
    with _open_for_write(path) as f:
        for k, w in zip(slots, weights):
            f.write(f"{rows[k] + 1} {cols[k] + 1} {format_float(w)}\n")


def read_edge_list(path: str | Path, p: int) -> tuple[SparsityPattern, np.ndarray]:
    """
    Returns:
        The pattern and the edge values in slot order

    Raises:
        ParseError: malformed line or an invalid vertex pair
    """
    entries: dict[int, float] = {}
    with open(path) as f:
        for number, line in enumerate(f, start=1):
            fields = line.split()
            if not fields:
                continue
            if len(fields) != 3:
                raise ParseError(f"expected 'i j value', found {len(fields)} fields", row=number)
            try:
                i, j = int(fields[0]), int(fields[1])
            except ValueError:
                raise ParseError("vertex ids must be integers", row=number) from None
            value = _parse_float(fields[2], number, 3)
            try:
                k = edge_index(min(i, j), max(i, j), p)
            except ValueError as e:
                raise ParseError(str(e), row=number) from e
            entries[k] = value
    pattern = SparsityPattern.from_slots(entries, p)
    return pattern, np.array([entries[k] for k in pattern.slots], dtype=float)
