"""
Closed-form oracles
Two-state MMPP formulas and the Kantorovich band for the SCV of an MSPP
"""
import math
from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.exceptions import ModelClassError, NumericFailureError
from src.models import MapClass, MapModel, ProbVector
from src.services.map_core import validate_model
from src.services.metrics import GridLike, as_time_grid, stochastic_order_gap, survival
from src.utils.logger import setup_logger

logger = setup_logger(__name__)


class Mmpp2Params(BaseModel):
    """Event rates lambda1, lambda2 and switching rates sigma1 (1->2), sigma2 (2->1)"""

    model_config = ConfigDict(frozen=True)

    lambda1: float = Field(ge=0)
    lambda2: float = Field(ge=0)
    sigma1: float = Field(gt=0)
    sigma2: float = Field(gt=0)

    @model_validator(mode="after")
    def check_rates(self):
        if self.lambda1 == 0 and self.lambda2 == 0:
            raise ValueError("At least one event rate must be positive")
        return self

    def to_model(self) -> MapModel:
        """Assemble the 2x2 (C, D) pair"""
        C = [
            [-self.sigma1 - self.lambda1, self.sigma1],
            [self.sigma2, -self.sigma2 - self.lambda2],
        ]
        D = [[self.lambda1, 0.0], [0.0, self.lambda2]]
        return validate_model(C, D)


@dataclass(frozen=True)
class Mmpp2ClosedForm:
    """
    Printed closed forms for a two-state MMPP

    B = sigma1 + sigma2 + lambda1 + lambda2 and A = sigma2 lambda1 + lambda2 (sigma1 + lambda1)
    are minus the trace and the determinant of C.
    """

    params: Mmpp2Params
    c2: float
    d2: float
    A: float
    B: float

    @property
    def _spread(self) -> float:
        p = self.params
        return p.sigma1 * p.sigma2 * (p.lambda1 - p.lambda2) ** 2

    @property
    def _mixed_rate(self) -> float:
        """sigma2 lambda1 + sigma1 lambda2"""
        p = self.params
        return p.sigma2 * p.lambda1 + p.sigma1 * p.lambda2

    @property
    def pi(self) -> ProbVector:
        p = self.params
        return ProbVector.normalized([p.sigma2, p.sigma1])

    @property
    def alpha(self) -> ProbVector:
        """alpha = pi D / pi D 1"""
        p = self.params
        return ProbVector.normalized([p.sigma2 * p.lambda1, p.sigma1 * p.lambda2])

    @property
    def printed_alpha(self) -> ProbVector:
        """The (sigma1 lambda1, sigma2 lambda2) normalization; not the stationary alpha"""
        p = self.params
        return ProbVector.normalized([p.sigma1 * p.lambda1, p.sigma2 * p.lambda2])

    @property
    def discriminant(self) -> float:
        """sqrt(B^2 - 4A), strictly positive because sigma1 sigma2 > 0"""
        value = self.B**2 - 4.0 * self.A
        if not value > 0:
            raise NumericFailureError(f"B^2 - 4A = {value!r} must be positive")
        return math.sqrt(value)

    @property
    def hazard_derivative_sign_factor(self) -> float:
        """Sign of h'(t) for all t: -1 when lambda1 != lambda2, else 0"""
        return -1.0 if self._spread > 0 else 0.0

    def hazard_numerator(self, t: float) -> float:
        """-A e^{-Bt} sigma1 sigma2 (lambda1 - lambda2)^2 / (sigma2 lambda1 + sigma1 lambda2)^2"""
        return -self.A * math.exp(-self.B * t) * self._spread / self._mixed_rate**2

    def gap(self, t: float) -> float:
        """Displayed (pi - alpha) e^{Ct} 1"""
        p = self.params
        root = self.discriminant
        growth = math.exp(-0.5 * t * (self.B + root)) * math.expm1(t * root)
        return growth * self._spread / ((p.sigma1 + p.sigma2) * self._mixed_rate * root)

    def variance_ratio(self, t: float) -> float:
        """Var N(t) / E N(t) for the time-stationary process"""
        if t == 0:
            return 1.0
        p = self.params
        total = p.sigma1 + p.sigma2
        transient = 2.0 * self._spread / (total**3 * self._mixed_rate * t)
        return self.d2 - transient * (-math.expm1(-total * t))


def mmpp2_metrics(params: Mmpp2Params) -> Mmpp2ClosedForm:
    """
    Closed-form c^2, d^2, hazard and gap expressions of a two-state MMPP

    Both formulas reduce to the Poisson values when lambda1 = lambda2.
    """
    l1, l2, s1, s2 = params.lambda1, params.lambda2, params.sigma1, params.sigma2
    spread = 2.0 * s1 * s2 * (l1 - l2) ** 2
    c2 = 1.0 + spread / ((s1 + s2) ** 2 * (l2 * s1 + l1 * (l2 + s2)))
    d2 = 1.0 + spread / ((s1 + s2) ** 2 * (l1 * s2 + l2 * s1))
    B = s1 + s2 + l1 + l2
    A = s2 * l1 + l2 * (s1 + l1)
    return Mmpp2ClosedForm(params=params, c2=c2, d2=d2, A=A, B=B)


@dataclass(frozen=True)
class GapConventionReport:
    """Which alpha convention reproduces the displayed MMPP2 gap formula"""

    max_diff_stationary_alpha: float
    max_diff_printed_alpha: float
    tolerance: float

    @property
    def matches_stationary_alpha(self) -> bool:
        return self.max_diff_stationary_alpha <= self.tolerance

    @property
    def matches_printed_alpha(self) -> bool:
        return self.max_diff_printed_alpha <= self.tolerance

    @property
    def convention(self) -> str:
        if self.matches_stationary_alpha:
            return "stationary"
        if self.matches_printed_alpha:
            return "printed"
        return "neither"


def check_gap_convention(
    params: Mmpp2Params,
    t_grid: GridLike = None,
    tolerance: float = 1e-8,
) -> GapConventionReport:
    """
    Compare the displayed gap formula with the pipeline under both alpha conventions

    Disagreement with the stationary alpha is logged, not raised.
    """
    times = as_time_grid(t_grid)
    closed = mmpp2_metrics(params)
    model = params.to_model()

    formula = np.array([closed.gap(float(t)) for t in times])
    pipeline = np.asarray(stochastic_order_gap(model, times).gap)
    printed = survival(model, closed.pi, times) - survival(model, closed.printed_alpha, times)

    scale = max(1.0, float(np.max(np.abs(pipeline))))
    report = GapConventionReport(
        max_diff_stationary_alpha=float(np.max(np.abs(formula - pipeline))) / scale,
        max_diff_printed_alpha=float(np.max(np.abs(formula - printed))) / scale,
        tolerance=tolerance,
    )
    if not report.matches_stationary_alpha:
        logger.warning(
            f"MMPP2 gap formula disagrees with the pipeline for {params}: "
            f"diff {report.max_diff_stationary_alpha:.3e}, reproduced by {report.convention} alpha"
        )
    return report


@dataclass(frozen=True)
class MsppScvBounds:
    """Kantorovich band 1 <= c^2 <= 2 kappa^2 / gamma^2 - 1"""

    kappa: float
    gamma: float
    lower: float
    upper: float

    def contains(self, c2: float, slack: float = 1e-9) -> bool:
        return self.lower - slack <= c2 <= self.upper + slack


def mspp_scv_bounds(model: MapModel) -> MsppScvBounds:
    """
    SCV band of an MSPP from the extreme phase exit rates c_i = -C_ii

    Raises:
        ModelClassError: If the model is not an MSPP
    """
    if model.map_class != MapClass.MSPP:
        raise ModelClassError(f"SCV bounds need an MSPP, got {model.map_class.value}")
    rates = -np.diag(model.C)
    lo, hi = float(rates.min()), float(rates.max())
    kappa = 0.5 * (lo + hi)
    gamma = math.sqrt(lo * hi)
    return MsppScvBounds(kappa=kappa, gamma=gamma, lower=1.0, upper=2.0 * kappa**2 / gamma**2 - 1.0)
