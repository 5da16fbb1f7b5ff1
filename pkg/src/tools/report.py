"""
Report Emission

Writes benchmark rows as CSV (the comparison-table layout) or JSON (the same
rows plus solver and chain diagnostics), and the plot-ready side files: MH
chain traces, glasso paths and pre-screen sensitivity tables.

The CSV leaves out wall-time so that identical runs produce identical bytes.
NaN is written as an empty CSV cell and as null in JSON.
"""

import csv
import json
import math
from pathlib import Path
from typing import Literal

from src.errors import ParseError, ReportError
from src.screening import GlassoFit
from src.state import ChainTrace, ReportRow

ReportFormat = Literal["csv", "json"]

METRIC_COLUMNS = ("frobenius", "kl", "precision", "recall", "f1")
CSV_COLUMNS = (
    "model",
    "n",
    "p",
    "estimator",
    "replication",
    *(col for metric in METRIC_COLUMNS for col in (metric, f"{metric}_se")),
    "status",
)


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return "" if math.isnan(value) else f"{value:.10g}"
    return str(value)


def _clean(value):
    """NaN/inf → None, recursively, for strict JSON."""
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if hasattr(value, "item"):
        return _clean(value.item())
    return value


def _open(path: str | Path):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        return open(path, "w", newline="")
    except OSError as e:
        raise ReportError(f"cannot write report to {path}: {e}") from e


def _write_table(path: str | Path, columns, records) -> None:
    with _open(path) as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columns)
        for record in records:
            writer.writerow([_cell(record.get(col)) for col in columns])


def emit_report(
    rows: list[ReportRow],
    fmt: ReportFormat,
    path: str | Path,
    aggregates: list[ReportRow] | None = None,
) -> Path:
    """
    Write per-replication rows followed by aggregate rows.

    Raises:
        ReportError: no rows, unknown format, or an unwritable path
    """
    if not rows:
        raise ReportError("nothing to report: no rows")
    aggregates = aggregates or []
    if fmt == "csv":
        _write_table(path, CSV_COLUMNS, [*rows, *aggregates])
    elif fmt == "json":
        write_json(path, {"rows": list(rows), "aggregates": list(aggregates)})
    else:
        raise ReportError(f"unknown report format {fmt!r}; choose csv or json")
    return Path(path)


def write_json(path: str | Path, payload: dict) -> None:
    with _open(path) as f:
        json.dump(_clean(payload), f, indent=2, sort_keys=True)
        f.write("\n")


def load_report_json(path: str | Path) -> dict:
    """
    Read a JSON report back; nulls stay None.

    Raises:
        ParseError: unreadable file or invalid JSON
    """
    try:
        with open(path) as f:
            return json.load(f)
    except OSError as e:
        raise ParseError(f"cannot read report {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid JSON report {path}: {e.msg}", row=e.lineno) from e


def write_trace_csv(path: str | Path, traces: list[ChainTrace]) -> None:
    """One line per MH iteration: replication, iteration, |m_t|, accepted, log-weight."""
    records = []
    for trace in traces:
        for t, (edges, accepted, logw) in enumerate(
            zip(trace["edges"], trace["accepted"], trace["log_weight"]), start=1
        ):
            records.append(
                {
                    "replication": trace["replication"],
                    "iteration": t,
                    "edges": edges,
                    "accepted": int(accepted),
                    "log_weight": logw,
                }
            )
    _write_table(path, ("replication", "iteration", "edges", "accepted", "log_weight"), records)


def write_glasso_path_csv(path: str | Path, fits: list[GlassoFit]) -> None:
    records = [
        {
            "lambda": fit.lam,
            "edges": fit.pattern.size,
            "objective": fit.objective,
            "converged": int(fit.converged),
        }
        for fit in fits
    ]
    _write_table(path, ("lambda", "edges", "objective", "converged"), records)


def write_sensitivity_csv(path: str | Path, results: list[dict]) -> None:
    columns = ("lambda", "candidates", *METRIC_COLUMNS, "status")
    _write_table(path, columns, results)
