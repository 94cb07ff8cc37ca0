"""
Detector for property (II): non-increasing hazard rate of the stationary interval
"""
from typing import Optional

import numpy as np

from src.config import settings
from src.models import MapModel
from src.schemas import PropertyName, PropertyVerdict
from src.services.metrics import GridLike, as_time_grid, hazard_derivative_numerator
from src.utils.logger import setup_logger

logger = setup_logger(__name__)


def detect_increasing_hazard(
    model: MapModel,
    t_grid: GridLike = None,
    tolerance: Optional[float] = None,
) -> PropertyVerdict:
    """
    Check alpha C e^{Ct} (-C) 1 alpha e^{Ct} 1 + (alpha C e^{Ct} 1)^2 <= tolerance on a grid

    The matrix expression is evaluated directly, so the verdict does not
    depend on how finely h itself is sampled.

    Args:
        model: Validated MAP
        t_grid: Evaluation times (default grid from settings)
        tolerance: Allowed positive excess

    Returns:
        Verdict whose margin is minus the largest value of the expression
    """
    if tolerance is None:
        tolerance = settings.verdict_tolerance

    times = as_time_grid(t_grid)
    numerator = hazard_derivative_numerator(model, times)
    worst = int(np.argmax(numerator))
    margin = -float(numerator[worst])
    holds = margin >= -tolerance
    if not holds:
        logger.info(f"Hazard rate of {model!r} increases near t = {times[worst]} (excess {-margin:.3e})")

    return PropertyVerdict(
        property=PropertyName.DECREASING_HAZARD,
        holds=holds,
        margin=margin,
        worst_t=float(times[worst]),
    )
