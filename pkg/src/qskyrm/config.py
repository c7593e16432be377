"""Run configuration: YAML in, validated and default-filled models out.

Unknown keys are rejected with the offending key path, not ignored; a
parsed config serializes back to a document that re-parses to an identical
value, so run manifests can embed an exact record of what executed.
"""

from typing import List, Literal, Optional

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ConfigError

EXPERIMENT_KINDS = (
    "spectrum", "topology-sweep", "irrwork-sweep", "transition-matrix",
    "phases", "efficiency-curve", "otto-cycle",
)

DEFAULT_DELTAS = [0.25, 0.51, 0.75]
DEFAULT_RATES = [0.01, 0.05, 0.1, 0.5]


class _Block(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=True)


class GridSpec(_Block):
    """One-dimensional grid: exactly one of (step, count, values)."""

    start: float = 0.0
    stop: float = 2.0
    step: Optional[float] = None
    count: Optional[int] = None
    values: Optional[List[float]] = None

    @model_validator(mode="after")
    def _one_form(self):
        forms = sum(x is not None for x in (self.step, self.count, self.values))
        if forms > 1:
            raise ValueError("give at most one of step, count, values")
        if self.step is not None and self.step <= 0:
            raise ValueError("step must be positive")
        if self.count is not None and self.count < 2:
            raise ValueError("count must be at least 2")
        if self.values is not None and len(self.values) == 0:
            raise ValueError("values must be non-empty")
        return self

    def points(self) -> np.ndarray:
        """Concrete grid with exact endpoints."""
        if self.values is not None:
            return np.asarray(self.values, dtype=float)
        if self.count is not None:
            return np.linspace(self.start, self.stop, self.count)
        step = self.step if self.step is not None else 0.05
        span = self.stop - self.start
        m = int(round(span / step))
        if abs(m * step - span) > 1e-9 * max(1.0, abs(span)):
            # step does not divide the span; fall back to arange semantics
            pts = np.arange(self.start, self.stop + 0.5 * step, step)
            return pts
        return np.linspace(self.start, self.stop, m + 1)


class ModelBlock(_Block):
    n: int = Field(default=3, ge=1)
    delta: Optional[float] = None
    deltas: Optional[List[float]] = None
    dmi: Optional[float] = None
    dmi_grid: GridSpec = Field(default_factory=GridSpec)
    boundary: bool = True

    @model_validator(mode="after")
    def _delta_forms(self):
        if self.delta is not None and self.deltas is not None:
            raise ValueError("give either delta or deltas, not both")
        if self.deltas is not None and len(self.deltas) == 0:
            raise ValueError("deltas must be non-empty")
        return self

    def effective_deltas(self) -> List[float]:
        if self.delta is not None:
            return [self.delta]
        if self.deltas is not None:
            return list(self.deltas)
        return list(DEFAULT_DELTAS)

    def dmi_points(self) -> np.ndarray:
        if self.dmi is not None:
            return np.asarray([self.dmi], dtype=float)
        return self.dmi_grid.points()


class ProtocolBlock(_Block):
    d0: float = 0.0
    d1: float = 2.0
    rates: List[float] = Field(default_factory=lambda: list(DEFAULT_RATES))

    @model_validator(mode="after")
    def _rates_positive(self):
        if not self.rates:
            raise ValueError("rates must be non-empty")
        if any(v <= 0 for v in self.rates):
            raise ValueError("rates must be positive")
        return self


class ThermalBlock(_Block):
    beta: float = Field(default=0.5, gt=0)
    t_cold: float = Field(default=0.5, gt=0)
    t_hot: Optional[float] = None
    t_hot_max: float = Field(default=20.0, gt=0)
    t_hot_points: int = Field(default=40, ge=1)
    skyrmion_count: int = Field(default=1, ge=1)
    stroke_iv_beta: Literal["cold", "hot"] = "cold"

    def t_hot_grid(self) -> np.ndarray:
        """Log-spaced hot temperatures in (t_cold, t_hot_max]."""
        k = np.arange(1, self.t_hot_points + 1)
        return self.t_cold * (self.t_hot_max / self.t_cold) ** (k / self.t_hot_points)


class NumericBlock(_Block):
    initial_steps: int = Field(default=2000, ge=1)
    max_halvings: int = Field(default=5, ge=1)
    global_tol: float = Field(default=1e-6, gt=0)
    step_tol: float = Field(default=1e-10, gt=0)
    gap_floor: float = Field(default=1e-8, gt=0)
    phase_tol: float = Field(default=1e-4, gt=0)
    dense_columns: int = Field(default=48, ge=1)
    dense_cap: int = Field(default=4096, ge=2)
    dim_cap: int = Field(default=4096, ge=2)
    initial_levels: Optional[int] = Field(default=8, ge=1)
    level: int = Field(default=0, ge=0)
    finite_rate_strokes: bool = False


class OutputBlock(_Block):
    directory: str = "runs"
    formats: List[Literal["csv", "matrix"]] = Field(default_factory=lambda: ["csv"])


class ExperimentConfig(_Block):
    kind: Literal[EXPERIMENT_KINDS]
    model: ModelBlock = Field(default_factory=ModelBlock)
    protocol: ProtocolBlock = Field(default_factory=ProtocolBlock)
    thermal: ThermalBlock = Field(default_factory=ThermalBlock)
    numeric: NumericBlock = Field(default_factory=NumericBlock)
    output: OutputBlock = Field(default_factory=OutputBlock)


def _format_validation_error(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        path = ".".join(str(p) for p in err["loc"]) or "<root>"
        parts.append(f"{path}: {err['msg']}")
    return "; ".join(parts)


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a YAML config document."""
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed YAML: {exc}") from exc
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"top level must be a mapping, got {type(raw).__name__}")
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(_format_validation_error(exc)) from exc


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def dump_config(cfg: ExperimentConfig) -> str:
    """Serialize so that parse_config(dump_config(cfg)) == cfg."""
    return yaml.safe_dump(cfg.model_dump(), sort_keys=True)
