"""
Command-Line Interface

Subcommands:
    simulate     synthetic data and its ground truth (precision, covariance, edges)
    estimate     one dataset → one estimator's precision matrix, edges and diagnostics,
                 optionally compared with other estimators and scored against a truth
    benchmark    the full replicated comparison, written as a CSV or JSON report
    ingest       raw CSV → centered / standardized / normal-scored data matrix
    sensitivity  gES metrics across pre-screen lambdas on one replication
    summarize    the summary table of a saved JSON report

Usage:
    ges-bench benchmark --model AR --n 200 --p 50 --reps 20 --jobs 4 --out results/ar.csv
    ges-bench benchmark --config experiments/hub.toml --format json
    ges-bench estimate --data sim/data.csv --compare glasso --truth sim
    ges-bench ingest --input chips.csv --out chips_scored.csv --transform normal_score

Exit status: 0 on success, 1 when more than half the replication rows failed
or a run could not complete, 2 on configuration errors.
"""

import argparse
import dataclasses
import logging
import math
import sys
from pathlib import Path

import numpy as np

from src.config import (
    ESTIMATORS,
    ExperimentConfig,
    build_experiment_config,
    config,
    load_config_file,
)
from src.covariance import empirical_covariance
from src.errors import ConfigError, GESError, ParseError, ShapeError
from src.graph_model import SparsityPattern, TrueModel

logger = logging.getLogger("src.cli")


# =============================================================================
# Argument parsing
# =============================================================================


def _add_experiment_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("experiment")
    group.add_argument("--config", type=Path, help="TOML config file (flags override it)")
    group.add_argument("--model", choices=["AR", "Hub", "Random"])
    group.add_argument("--n", type=int, help="Sample size")
    group.add_argument("--p", type=int, help="Number of variables")
    group.add_argument("--prob", type=float, help="Edge probability (Random model)")
    group.add_argument("--reps", type=int, help="Replications")
    group.add_argument("--seed", type=int, help="Master seed")


def _add_estimator_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("estimators")
    group.add_argument(
        "--estimators",
        help=f"Comma-separated subset of {','.join(ESTIMATORS)}",
    )
    group.add_argument("--prior", choices=["complexity", "uniform", "flat"])
    group.add_argument("--s-matrix", dest="s_matrix", choices=["thresholded", "empirical"])
    group.add_argument("--burn-in", dest="burn_in", type=int, help="MH burn-in iterations T0")
    group.add_argument("--samples", type=int, help="MH retained iterations T")
    group.add_argument("--trace", type=Path, help="Write the MH chain trace CSV here")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ges-bench",
        description="graphical Exponential Screening: estimation and benchmarks",
    )
    parser.add_argument("--log-level", default=None, help="Overrides GES_LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", help="Emit synthetic data and its ground truth")
    _add_experiment_flags(simulate)
    simulate.add_argument("--out", type=Path, help="Output directory")

    estimate = sub.add_parser("estimate", help="Run one estimator on one dataset")
    estimate.add_argument("--data", type=Path, required=True, help="Numeric CSV, rows = samples")
    estimate.add_argument("--header", action="store_true", help="First line holds column names")
    estimate.add_argument("--estimator", choices=ESTIMATORS, default="ges")
    estimate.add_argument("--split", type=float, help="Fraction of rows in the first subsample")
    estimate.add_argument("--seed", type=int, help="Master seed")
    estimate.add_argument("--config", type=Path, help="TOML config file (flags override it)")
    estimate.add_argument("--path", type=Path, help="glasso only: write the lambda path CSV here")
    estimate.add_argument(
        "--compare", help="Comma-separated estimators whose edge sets are compared with this one"
    )
    estimate.add_argument(
        "--truth", type=Path, help="simulate output directory; adds scores to diagnostics.json"
    )
    estimate.add_argument(
        "--s-file",
        dest="s_file",
        type=Path,
        help="ges only: second-stage covariance CSV (p,kind,gamma header) to weigh with",
    )
    _add_estimator_flags(estimate)
    estimate.add_argument("--out", type=Path, help="Output directory")

    benchmark = sub.add_parser("benchmark", help="Replicated comparison of estimators")
    _add_experiment_flags(benchmark)
    _add_estimator_flags(benchmark)
    benchmark.add_argument("--jobs", type=int, help="Worker threads (default GES_JOBS)")
    benchmark.add_argument("--out", type=Path, help="Report path")
    benchmark.add_argument("--format", choices=["csv", "json"], default="csv")

    ingest = sub.add_parser("ingest", help="Normalize a raw data CSV")
    ingest.add_argument("--input", type=Path, required=True)
    ingest.add_argument("--out", type=Path, required=True)
    ingest.add_argument("--header", action="store_true", help="First line holds column names")
    ingest.add_argument("--center", action=argparse.BooleanOptionalAction, default=True)
    ingest.add_argument("--standardize", action="store_true")
    ingest.add_argument(
        "--transform", choices=["none", "normal_score", "log"], default="none"
    )

    sensitivity = sub.add_parser("sensitivity", help="gES across pre-screen lambdas")
    _add_experiment_flags(sensitivity)
    _add_estimator_flags(sensitivity)
    sensitivity.add_argument(
        "--lambdas",
        default="0.01,0.02,0.05,0.1,0.2,0.3",
        help="Comma-separated glasso pre-screen penalties",
    )
    sensitivity.add_argument("--out", type=Path, help="Output CSV")

    summarize = sub.add_parser("summarize", help="Print the summary table of a JSON report")
    summarize.add_argument("--report", type=Path, required=True)

    return parser


def experiment_overrides(args: argparse.Namespace) -> dict:
    """Flags in config-file shape; flags that were not given are None."""
    estimators = getattr(args, "estimators", None)
    return {
        "model": getattr(args, "model", None),
        "n": getattr(args, "n", None),
        "p": getattr(args, "p", None),
        "prob": getattr(args, "prob", None),
        "replications": getattr(args, "reps", None),
        "seed": getattr(args, "seed", None),
        "split": getattr(args, "split", None),
        "estimators": estimators.split(",") if estimators else None,
        "prior": getattr(args, "prior", None),
        "s_matrix": getattr(args, "s_matrix", None),
        "mh": {
            "burn_in": getattr(args, "burn_in", None),
            "samples": getattr(args, "samples", None),
        },
    }


def load_experiment(args: argparse.Namespace, **fixed) -> ExperimentConfig:
    """Defaults (seed from GES_SEED) < config file < flags < fixed."""
    file_values = load_config_file(args.config) if getattr(args, "config", None) else {}
    overrides = {**experiment_overrides(args), **fixed}
    base = ExperimentConfig(seed=config.seed)
    return build_experiment_config(file_values, overrides, base=base)


# =============================================================================
# Subcommands
# =============================================================================


def cmd_simulate(args: argparse.Namespace) -> int:
    from src.nodes.data import generate_truth_node, sample_node
    from src.tools.matrix_io import write_edge_list, write_matrix_csv

    cfg = load_experiment(args)
    out = args.out or config.output_dir / "simulated"
    state: dict = {"cfg": cfg, "replication": 0}
    state.update(generate_truth_node(state))
    state.update(sample_node(state))
    truth = state["truth"]

    write_matrix_csv(out / "data.csv", state["data"])
    write_matrix_csv(out / "precision.csv", truth.precision)
    write_matrix_csv(out / "covariance.csv", truth.covariance)
    write_edge_list(out / "edges.txt", truth.pattern, truth.precision)
    print(f"Simulated {cfg.graph_model.value} model: n={cfg.n}, p={cfg.p}, {truth.n_edges} edges")
    print(f"Files written to: {out}")
    return 0


def _run_estimator(name: str, X, cfg: ExperimentConfig, s_file: Path | None = None) -> tuple:
    """One estimator on X: (theta, edges, diagnostics, gES outcome or None)."""
    from src.nodes.baselines import run_glasso, run_pcortest
    from src.nodes.data import split_sample
    from src.nodes.ges import run_ges
    from src.seeds import stage_rng
    from src.tools.matrix_io import read_covariance_csv

    if name == "ges":
        D1, D2 = split_sample(X, cfg.split, stage_rng(cfg.seed, 0, "split"))
        S = None
        if s_file:
            try:
                S = read_covariance_csv(s_file, n=D2.shape[0])
            except OSError as e:
                raise ParseError(f"cannot read {s_file}: {e}") from e
        outcome = run_ges(D1, D2, cfg, S=S)
        return outcome.estimate, outcome.edges, outcome.diagnostics(), outcome
    if name == "glasso":
        theta, edges, diagnostics = run_glasso(X, cfg)
    else:
        theta, edges, diagnostics = run_pcortest(X, cfg)
    if edges is None:
        edges = SparsityPattern.from_adjacency(theta, tol=cfg.zero_tol)
    return theta, edges, diagnostics, None


def load_truth(directory: Path, p: int) -> TrueModel:
    """
    The ground truth a simulate run wrote to directory.

    Raises:
        ParseError: unreadable or malformed files
        ShapeError: the truth is not on p variables
    """
    from src.tools.matrix_io import read_edge_list, read_matrix_csv

    try:
        precision = read_matrix_csv(directory / "precision.csv")
    except OSError as e:
        raise ParseError(f"cannot read {directory / 'precision.csv'}: {e}") from e
    if precision.shape != (p, p):
        raise ShapeError(f"truth is {precision.shape[0]} x {precision.shape[1]}, data has p={p}")
    try:
        pattern, _ = read_edge_list(directory / "edges.txt", p)
    except OSError as e:
        raise ParseError(f"cannot read {directory / 'edges.txt'}: {e}") from e
    return TrueModel(
        adjacency=pattern.to_adjacency(),
        precision=precision,
        covariance=np.linalg.inv(precision),
    )


def _parse_compare(value: str | None, estimator: str) -> list[str]:
    if not value:
        return []
    names = [v.strip() for v in value.split(",") if v.strip()]
    unknown = [v for v in names if v not in ESTIMATORS]
    if unknown:
        raise ConfigError(f"--compare takes estimators from {', '.join(ESTIMATORS)}: {unknown}")
    return [v for v in names if v != estimator]


def cmd_estimate(args: argparse.Namespace) -> int:
    from src.metrics import edge_overlap, evaluate
    from src.nodes.ges import chain_trace
    from src.screening import default_lambda_grid, glasso_path
    from src.tools.ingest import read_numeric_csv
    from src.tools.matrix_io import write_covariance_csv, write_edge_list, write_matrix_csv
    from src.tools.report import write_glasso_path_csv, write_json, write_trace_csv

    X, _ = read_numeric_csv(args.data, header=args.header)
    n, p = X.shape
    cfg = load_experiment(args, n=n, p=p, model="AR", replications=1)
    others = _parse_compare(args.compare, args.estimator)
    if args.s_file and args.estimator != "ges":
        raise ConfigError("--s-file only applies to --estimator ges")
    out = args.out or config.output_dir / f"estimate_{args.estimator}"

    theta, edges, diagnostics, outcome = _run_estimator(args.estimator, X, cfg, args.s_file)
    if outcome is not None:
        write_edge_list(
            out / "candidates.txt",
            SparsityPattern.from_slots(outcome.screen.candidates, p),
            outcome.screen.statistics,
        )
        write_covariance_csv(out / "cov1.csv", outcome.cov1)
        write_covariance_csv(out / "S.csv", outcome.S)
        if args.trace and outcome.result.acceptance_rate is not None:
            write_trace_csv(args.trace, [chain_trace(outcome.result, 0)])
    if args.path and args.estimator == "glasso":
        cov = empirical_covariance(X)
        fits = glasso_path(cov, default_lambda_grid(cov, cfg.cv.grid_size)[::-1])
        write_glasso_path_csv(args.path, fits)

    payload = {"estimator": args.estimator, "n": n, "p": p, **diagnostics}
    if others:
        payload["overlap"] = {}
    for other in others:
        _, other_edges, _, _ = _run_estimator(other, X, cfg)
        overlap = edge_overlap(edges, other_edges)
        payload["overlap"][other] = {
            f"only_{args.estimator}": overlap.only_first,
            f"only_{other}": overlap.only_second,
            "both": overlap.both,
        }
    if args.truth:
        payload["scores"] = evaluate(theta, load_truth(args.truth, p), edges=edges).to_dict()

    write_matrix_csv(out / "precision.csv", theta)
    write_edge_list(out / "edges.txt", edges, theta)
    write_json(out / "diagnostics.json", payload)
    print(f"{args.estimator}: {edges.size} edges selected on p={p} variables (n={n})")
    for other, counts in payload.get("overlap", {}).items():
        print(f"  shared with {other}: {counts['both']}")
    print(f"Files written to: {out}")
    return 0


SUMMARY_COLUMNS = ("frobenius", "kl", "precision", "recall", "f1")


def print_summary(aggregates: list[dict]) -> None:
    print()
    print(f"{'estimator':<10} " + " ".join(f"{m:>10}" for m in SUMMARY_COLUMNS))
    print("-" * 65)
    for row in aggregates:
        cells = " ".join(
            f"{math.nan if row[m] is None else row[m]:>10.3f}" for m in SUMMARY_COLUMNS
        )
        print(f"{row['estimator']:<10} {cells}")
    print()


def cmd_benchmark(args: argparse.Namespace) -> int:
    from src.pipeline import run_pipeline
    from src.tools.report import emit_report, write_trace_csv

    cfg = load_experiment(args)
    jobs = config.jobs if args.jobs is None else args.jobs
    if jobs < 1:
        raise ConfigError(f"--jobs must be at least 1, got {jobs}")
    out = args.out or config.output_dir / f"benchmark_{cfg.graph_model.value}.{args.format}"

    print("=" * 60)
    print(f"  gES benchmark: {cfg.graph_model.value}, n={cfg.n}, p={cfg.p}")
    print(f"  {cfg.replications} replications, estimators: {', '.join(cfg.estimators)}")
    print("=" * 60)

    result = run_pipeline(cfg, jobs=jobs)
    emit_report(result.rows, args.format, out, result.aggregates)
    if args.trace and result.traces:
        write_trace_csv(args.trace, result.traces)
    print_summary(result.aggregates)
    print(f"Report written to: {out}")

    if result.too_many_failures:
        print(f"{100 * result.failed_fraction:.0f}% of replication rows failed")
        return 1
    return 0


def cmd_ingest(args: argparse.Namespace) -> int:
    from src.tools.ingest import ingest_csv
    from src.tools.matrix_io import write_matrix_csv

    X = ingest_csv(
        args.input,
        center=args.center,
        standardize=args.standardize,
        transform=args.transform,
        header=args.header,
    )
    write_matrix_csv(args.out, X)
    print(f"Ingested {X.shape[0]} samples x {X.shape[1]} variables → {args.out}")
    return 0


def cmd_sensitivity(args: argparse.Namespace) -> int:
    from src.pipeline import prescreen_sensitivity
    from src.tools.report import write_sensitivity_csv

    try:
        lambdas = [float(v) for v in args.lambdas.split(",")]
    except ValueError as e:
        raise ConfigError(f"--lambdas must be comma-separated numbers: {e}") from e
    cfg = dataclasses.replace(load_experiment(args), estimators=("ges",))
    out = args.out or config.output_dir / f"sensitivity_{cfg.graph_model.value}.csv"

    results = prescreen_sensitivity(cfg, lambdas)
    write_sensitivity_csv(out, results)
    for entry in results:
        print(
            f"lambda={entry['lambda']:<8.4g} |Q_p|={entry['candidates']!s:<6} "
            f"f1={entry['f1']:.3f}"
        )
    print(f"Sensitivity table written to: {out}")
    return 0


def cmd_summarize(args: argparse.Namespace) -> int:
    from src.tools.report import load_report_json

    payload = load_report_json(args.report)
    aggregates = payload.get("aggregates")
    if not aggregates:
        raise ParseError(f"{args.report} holds no aggregates; was it written with --format json?")
    print_summary(aggregates)
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "benchmark": cmd_benchmark,
    "ingest": cmd_ingest,
    "sensitivity": cmd_sensitivity,
    "summarize": cmd_summarize,
}


def main(argv: list[str] | None = None) -> int:
    """Main entry point; returns the exit status."""
    args = build_parser().parse_args(argv)

    if args.log_level:
        config.log_level = args.log_level.upper()
    try:
        config.validate()
    except ConfigError as e:
        print(f"Configuration error: {e}")
        return 2
    logging.basicConfig(
        level=config.log_level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    config.setup_langsmith()

    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        print(f"Configuration error: {e}")
        return 2
    except GESError as e:
        print(f"Error: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
