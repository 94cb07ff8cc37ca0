"""Pydantic schemas for configurations and serialized results"""
import enum
from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from src.config import settings


class StartKind(str, enum.Enum):
    """Initial phase law of a MAP"""

    TIME_STATIONARY = "time_stationary"
    EVENT_STATIONARY = "event_stationary"
    PHASE = "phase"


class GeneratorKind(str, enum.Enum):
    """Random instance generators for conjecture sweeps"""

    DENSE_UNIFORM = "dense"
    CYCLIC_UNIFORM = "cyclic"
    MSPP = "mspp"


class PropertyName(str, enum.Enum):
    """The four burstiness properties"""

    OVERDISPERSION = "I"
    DECREASING_HAZARD = "II"
    SCV_AT_LEAST_ONE = "III"
    STOCHASTIC_ORDER = "IV"


# ============================================================================
# Time grids
# ============================================================================

class TimeGrid(BaseModel):
    """Arithmetic grid start, start + step, ..., stop"""

    start: float = Field(default_factory=lambda: settings.grid_start, ge=0)
    stop: float = Field(default_factory=lambda: settings.grid_stop, ge=0)
    step: float = Field(default_factory=lambda: settings.grid_step, gt=0)

    @model_validator(mode="after")
    def check_bounds(self):
        if self.stop < self.start:
            raise ValueError(f"Grid stop {self.stop} is below start {self.start}")
        return self

    def points(self) -> np.ndarray:
        """Grid points; rounding keeps 0.2 * k free of accumulated drift"""
        n = int(round((self.stop - self.start) / self.step))
        values = self.start + self.step * np.arange(n + 1)
        values = np.round(values, 12)
        return values[values <= self.stop + 1e-12]


# ============================================================================
# Metrics reports
# ============================================================================

class PropertyVerdict(BaseModel):
    """
    Verdict for one property on a grid

    ``margin`` is nonnegative when the property holds; ``worst_t`` is the grid
    time attaining it for time-dependent properties.
    """

    property: PropertyName
    holds: bool
    margin: float
    worst_t: Optional[float] = None


class MetricsReport(BaseModel):
    """All scalar outputs and property verdicts for one model"""

    order: int
    model_class: str
    lambda_star: float
    m1: float
    m2: float
    moments: List[float] = []
    scv: float
    d2: float
    tolerance: float
    verdicts: List[PropertyVerdict]

    @property
    def all_hold(self) -> bool:
        return all(v.holds for v in self.verdicts)

    def verdict(self, name: PropertyName) -> PropertyVerdict:
        return next(v for v in self.verdicts if v.property == PropertyName(name))


# ============================================================================
# Simulation
# ============================================================================

class SimConfig(BaseModel):
    """Run length, start law and batching for Monte Carlo estimates"""

    seed: int = Field(default_factory=lambda: settings.default_seed, ge=0, lt=2**64)
    n_events: Optional[int] = Field(default_factory=lambda: settings.sim_events, gt=0)
    horizon: Optional[float] = Field(default=None, gt=0)
    start: StartKind = StartKind.EVENT_STATIONARY
    phase: Optional[int] = Field(default=None, ge=0)
    n_batches: int = Field(default_factory=lambda: settings.sim_batches, ge=2)
    n_replications: int = Field(default=1, ge=1)
    workers: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def check_run_length(self):
        if self.n_events is None and self.horizon is None:
            raise ValueError("Either n_events or horizon must be set")
        if self.start == StartKind.PHASE and self.phase is None:
            raise ValueError("start='phase' requires a phase index")
        return self


class SimEstimate(BaseModel):
    """Point estimate with its standard error"""

    estimate: float
    standard_error: float = Field(ge=0)
    samples: int
    details: Dict[str, float] = {}

    def within(self, value: float, n_se: float = 4.0) -> bool:
        return abs(self.estimate - value) <= n_se * self.standard_error


# ============================================================================
# Conjecture sweeps
# ============================================================================

class SweepConfig(BaseModel):
    """Randomized conjecture sweep parameters"""

    orders: List[int] = Field(default_factory=lambda: list(settings.sweep_orders), min_length=1)
    n_instances: int = Field(default_factory=lambda: settings.sweep_instances, ge=1)
    generator: GeneratorKind = GeneratorKind.DENSE_UNIFORM
    grid: TimeGrid = Field(default_factory=TimeGrid)
    tolerance: float = Field(default_factory=lambda: settings.verdict_tolerance)
    hard_threshold: float = Field(default_factory=lambda: settings.hard_violation_threshold, ge=0)
    seed: int = Field(default_factory=lambda: settings.default_seed, ge=0)
    workers: int = Field(default_factory=lambda: settings.sweep_workers, ge=1)

    @field_validator("orders")
    @classmethod
    def check_orders(cls, orders: List[int]) -> List[int]:
        if any(p < 2 for p in orders):
            raise ValueError(f"Sweep orders must be at least 2, got {orders}")
        return orders


class InstanceRecord(BaseModel):
    """Margins and verdicts for one swept instance"""

    order: int
    index: int
    scv_margin: float
    min_gap: float
    argmin_t: float
    overdispersion_margin: float
    hazard_margin: float
    lemma1_residual: float
    lemma1_consistent: bool
    overdispersion_holds: bool
    hazard_holds: bool
    scv_holds: bool
    order_holds: bool
    redraws: int = 0

    @property
    def flagged(self) -> bool:
        return not (self.scv_holds and self.order_holds)


class FailureRecord(BaseModel):
    """Instance whose evaluation raised"""

    order: int
    index: int
    error: str


class SweepOutcome(BaseModel):
    """Per-instance records plus aggregate minima and violation counts"""

    config: SweepConfig
    instances: List[InstanceRecord] = []
    failures: List[FailureRecord] = []
    min_scv_margin: Optional[float] = None
    min_gap: Optional[float] = None
    min_overdispersion_margin: Optional[float] = None
    flagged: int = 0
    hard_violations: int = 0
    noise_band: int = 0
    overdispersion_violations: int = 0
    # (IV) holds but (III) fails
    implication_violations: int = 0
    # (II) holds but (III) fails beyond the hard threshold
    dhr_implication_violations: int = 0
    lemma1_inconsistencies: int = 0
    redraws: int = 0
    runtime_seconds: float = Field(default=0.0, exclude=True)

    @property
    def has_hard_violation(self) -> bool:
        """Hard (III)/(IV) margin, or (II) holding while (III) fails"""
        return self.hard_violations > 0 or self.dhr_implication_violations > 0


class SimulationReport(BaseModel):
    """Simulated estimates next to their analytic values"""

    seed: int
    n_events: Optional[int] = None
    horizon: Optional[float] = None
    scv: SimEstimate
    scv_analytic: float
    d2: SimEstimate
    d2_analytic: float
    d2_from_intervals: SimEstimate
    ks_statistic: float
    ks_pvalue: float
    ks_passed: bool
