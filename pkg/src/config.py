"""
Configuration Management for the gES Benchmark

Two layers:
    - Config: process-level settings read from the environment (or a .env
      file via python-dotenv): output directory, worker count, log level,
      master seed, LangSmith tracing
    - ExperimentConfig: everything one benchmark needs (graph model, sizes,
      estimators and the solver/MH/threshold/screen/CV sub-configs)

Key Pattern: Layered overrides
    dataclass defaults < config file (TOML) < command-line flags

    [solver], [mh], [threshold], [screen] and [cv] tables in the file map onto
    the nested sub-configs; every other key must be a top-level experiment
    field. Unknown keys are rejected rather than ignored.

Example config file:
    model = "Hub"
    n = 400
    p = 100
    estimators = ["ges", "glasso"]

    [mh]
    burn_in = 2000
    samples = 4000
"""

import dataclasses
import logging
import os
import tomllib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

from dotenv import load_dotenv

from src.aggregation import MHConfig, PriorSpec
from src.constrained_mle import SolverConfig
from src.errors import ConfigError
from src.graph_model import GraphModel
from src.metrics import DEFAULT_FREQUENCY_THRESHOLD, DEFAULT_INCLUSION_THRESHOLD, EDGE_RULES

# Load .env before any os.getenv() default is evaluated
load_dotenv()

ESTIMATORS = ("ges", "glasso", "pcortest")
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


@dataclass
class Config:
    """
    Process-level settings.

    Usage:
        config = Config()
        config.validate()  # Raises ConfigError listing every problem

        print(config.output_dir)
    """

    # === Runs ===
    output_dir: Path = field(
        default_factory=lambda: Path(os.getenv("GES_OUTPUT_DIR", "./results"))
    )

    # Replications run on this many threads; 1 is serial
    jobs: int = field(default_factory=lambda: int(os.getenv("GES_JOBS", "1")))

    log_level: str = field(default_factory=lambda: os.getenv("GES_LOG_LEVEL", "INFO").upper())

    # Master seed for every experiment that does not set its own
    seed: int = field(default_factory=lambda: int(os.getenv("GES_SEED", "20240601")))

    # === LangSmith Observability ===
    # Optional: traces each replication graph run
    langsmith_api_key: str = field(default_factory=lambda: os.getenv("LANGSMITH_API_KEY", ""))

    langsmith_project: str = field(
        default_factory=lambda: os.getenv("LANGSMITH_PROJECT", "ges-benchmark")
    )

    # Set to "true" to enable tracing
    langsmith_tracing: bool = field(
        default_factory=lambda: os.getenv("LANGSMITH_TRACING", "false").lower() == "true"
    )

    def validate(self) -> None:
        """
        Raises:
            ConfigError: If any setting is out of range
        """
        errors = []

        if self.jobs < 1:
            errors.append(f"GES_JOBS must be at least 1, got {self.jobs}")
        if self.log_level not in LOG_LEVELS:
            errors.append(f"GES_LOG_LEVEL must be one of {', '.join(LOG_LEVELS)}")
        if self.seed < 0:
            errors.append(f"GES_SEED must be non-negative, got {self.seed}")

        if errors:
            raise ConfigError("\n".join(errors))

    def setup_langsmith(self) -> None:
        """
        Configure LangSmith environment variables.

        LangSmith reads from the environment, so this runs before the first
        graph invocation.
        """
        if self.langsmith_tracing and self.langsmith_api_key:
            os.environ["LANGSMITH_API_KEY"] = self.langsmith_api_key
            os.environ["LANGSMITH_PROJECT"] = self.langsmith_project
            os.environ["LANGSMITH_TRACING"] = "true"
            logging.getLogger(__name__).info(
                "LangSmith tracing enabled for project: %s", self.langsmith_project
            )
        else:
            os.environ["LANGSMITH_TRACING"] = "false"


# =============================================================================
# Experiment sub-configs
# =============================================================================


@dataclass(frozen=True)
class ThresholdConfig:
    """Random-split selection of the hard threshold γ on the second subsample."""

    B: int = 20
    grid_size: int = 20


@dataclass(frozen=True)
class ScreenConfig:
    """Pre-screen building Q_p. param=None means 0.1·max|σ̂_ij| (glasso) or 0.1 (corr)."""

    method: Literal["glasso", "corr_threshold"] = "glasso"
    param: float | None = None
    max_candidates: int | None = None


@dataclass(frozen=True)
class CVConfig:
    """Cross-validation of the glasso baseline penalty."""

    folds: int = 10
    grid_size: int = 10
    tol: float = 1e-4
    max_iter: int = 100


SECTIONS = {
    "solver": SolverConfig,
    "mh": MHConfig,
    "threshold": ThresholdConfig,
    "screen": ScreenConfig,
    "cv": CVConfig,
}


@dataclass(frozen=True)
class ExperimentConfig:
    """One benchmark: the simulated model, the estimators and their settings."""

    model: str = "AR"
    n: int = 200
    p: int = 50
    prob: float | None = None
    replications: int = 20
    split: float = 0.5
    estimators: tuple[str, ...] = ESTIMATORS
    seed: int = 20240601

    # Ground truth
    edge_value: float = 0.3
    diag_value: float = 1.0

    # gES
    prior: str = "complexity"
    s_matrix: Literal["thresholded", "empirical"] = "empirical"
    aggregation: Literal["mh", "exact"] = "mh"
    enumeration_cap: int = 2**16
    edge_rule: Literal["inclusion", "frequency"] = "inclusion"
    inclusion_threshold: float = DEFAULT_INCLUSION_THRESHOLD
    frequency_threshold: float = DEFAULT_FREQUENCY_THRESHOLD
    trace_bound: float = 10.0

    # Baselines and scoring
    alpha: float = 0.05
    zero_tol: float = 1e-8

    solver: SolverConfig = field(default_factory=SolverConfig)
    mh: MHConfig = field(default_factory=MHConfig)
    threshold: ThresholdConfig = field(default_factory=ThresholdConfig)
    screen: ScreenConfig = field(default_factory=ScreenConfig)
    cv: CVConfig = field(default_factory=CVConfig)

    @property
    def graph_model(self) -> GraphModel:
        return GraphModel.parse(self.model)

    @property
    def prior_spec(self) -> PriorSpec:
        return PriorSpec(self.prior, self.p)

    @property
    def edge_threshold(self) -> float:
        if self.edge_rule == "frequency":
            return self.frequency_threshold
        return self.inclusion_threshold

    def validate(self) -> "ExperimentConfig":
        """
        Collect every problem and raise them together.

        Raises:
            ConfigError: If any field is out of range
        """
        errors = []

        try:
            model = GraphModel.parse(self.model)
        except ConfigError as e:
            errors.append(str(e))
            model = None
        if self.n < 4:
            errors.append(f"n must be at least 4, got {self.n}")
        if self.p < 2:
            errors.append(f"p must be at least 2, got {self.p}")
        if model is GraphModel.HUB and self.p % 10:
            errors.append(f"Hub model needs p divisible by 10, got p={self.p}")
        if self.prob is not None and not 0 <= self.prob <= 1:
            errors.append(f"prob must lie in [0, 1], got {self.prob}")
        if self.replications < 1:
            errors.append(f"replications must be at least 1, got {self.replications}")
        if not 0 < self.split < 1:
            errors.append(f"split must lie in (0, 1), got {self.split}")
        unknown = [e for e in self.estimators if e not in ESTIMATORS]
        if unknown or not self.estimators:
            errors.append(f"estimators must be a non-empty subset of {', '.join(ESTIMATORS)}")
        if self.prior not in ("complexity", "uniform", "flat"):
            errors.append(f"prior must be complexity, uniform or flat, got {self.prior!r}")
        if self.s_matrix not in ("thresholded", "empirical"):
            errors.append(f"s_matrix must be thresholded or empirical, got {self.s_matrix!r}")
        if self.aggregation not in ("mh", "exact"):
            errors.append(f"aggregation must be mh or exact, got {self.aggregation!r}")
        if self.edge_rule not in EDGE_RULES:
            errors.append(f"edge_rule must be inclusion or frequency, got {self.edge_rule!r}")
        for name in ("inclusion_threshold", "frequency_threshold"):
            value = getattr(self, name)
            if not 0 <= value <= 1:
                errors.append(f"{name} must lie in [0, 1], got {value}")
        if not 0 < self.alpha < 1:
            errors.append(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.threshold.B < 1:
            errors.append(f"threshold.B must be at least 1, got {self.threshold.B}")
        if self.cv.folds < 2:
            errors.append(f"cv.folds must be at least 2, got {self.cv.folds}")
        if self.screen.method not in ("glasso", "corr_threshold"):
            errors.append(
                f"screen.method must be glasso or corr_threshold, got {self.screen.method!r}"
            )

        if errors:
            raise ConfigError("\n".join(errors))
        return self


# =============================================================================
# Loading
# =============================================================================


def load_config_file(path: str | Path) -> dict:
    """
    Parse a TOML config file into a plain dict.

    Raises:
        ConfigError: unreadable file or invalid TOML
    """
    try:
        with open(path, "rb") as f:
            return tomllib.load(f)
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"invalid config file {path}: {e}") from e


def _build_section(name: str, current, values) -> object:
    if not isinstance(values, dict):
        raise ConfigError(f"[{name}] must be a table")
    known = {f.name for f in dataclasses.fields(SECTIONS[name])}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"unknown keys in [{name}]: {', '.join(unknown)}")
    try:
        return dataclasses.replace(current, **values)
    except TypeError as e:
        raise ConfigError(f"invalid [{name}] settings: {e}") from e


def build_experiment_config(
    file_values: dict | None = None,
    overrides: dict | None = None,
    base: ExperimentConfig | None = None,
) -> ExperimentConfig:
    """
    Merge config-file values and flag overrides onto the defaults.

    overrides use the same shape as the file (section dicts for nested
    settings); None values in overrides mean "not given" and are skipped.

    Raises:
        ConfigError: unknown keys or invalid values
    """
    cfg = base or ExperimentConfig()
    top_level = {f.name for f in dataclasses.fields(ExperimentConfig)} - set(SECTIONS)

    for values in (file_values or {}, overrides or {}):
        values = {k: v for k, v in values.items() if v is not None}
        unknown = sorted(set(values) - top_level - set(SECTIONS))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")

        updates = {}
        for key, value in values.items():
            if key in SECTIONS:
                section = {k: v for k, v in value.items() if v is not None}
                updates[key] = _build_section(key, getattr(cfg, key), section)
            elif key == "estimators":
                updates[key] = tuple(value)
            else:
                updates[key] = value
        cfg = dataclasses.replace(cfg, **updates)

    return cfg.validate()


# Global config instance (singleton pattern)
# Import and use: from src.config import config
config = Config()
