"""
Property verdicts
Assembles the metrics report for one model from the four detectors
"""
from typing import Optional

from src.config import settings
from src.detectors import (
    detect_increasing_hazard,
    detect_low_scv,
    detect_overdispersion,
    detect_stochastic_order_violation,
)
from src.models import MapModel
from src.schemas import MetricsReport
from src.services.map_core import stationary_pair
from src.services.metrics import GridLike, as_time_grid, dispersion_index, interval_moments, scv
from src.utils.logger import setup_logger

logger = setup_logger(__name__)


def property_verdicts(
    model: MapModel,
    t_grid: GridLike = None,
    tolerance: Optional[float] = None,
    max_moment: Optional[int] = None,
) -> MetricsReport:
    """
    Evaluate properties (I)-(IV) and collect the scalar metrics

    Args:
        model: Validated MAP
        t_grid: Grid for the time-dependent properties (II) and (IV)
        tolerance: Verdict tolerance (default from settings)
        max_moment: Highest interval moment reported (at least 2)

    Returns:
        MetricsReport with lambda*, moments, c^2, d^2 and four verdicts
    """
    if tolerance is None:
        tolerance = settings.verdict_tolerance
    if max_moment is None:
        max_moment = settings.max_reported_moment
    times = as_time_grid(t_grid)

    pair = stationary_pair(model)
    moments = interval_moments(model, max(2, max_moment))

    verdicts = [
        detect_overdispersion(model, tolerance=tolerance),
        detect_increasing_hazard(model, times, tolerance=tolerance),
        detect_low_scv(model, tolerance=tolerance),
        detect_stochastic_order_violation(model, times, tolerance=tolerance),
    ]

    report = MetricsReport(
        order=model.order,
        model_class=model.map_class.value,
        lambda_star=pair.lambda_star,
        m1=moments[0],
        m2=moments[1],
        moments=moments,
        scv=scv(model),
        d2=dispersion_index(model),
        tolerance=tolerance,
        verdicts=verdicts,
    )

    failed = [v.property.value for v in verdicts if not v.holds]
    if failed:
        logger.info(f"{model!r}: properties {failed} violated")
    else:
        logger.debug(f"{model!r}: all properties hold")
    return report
