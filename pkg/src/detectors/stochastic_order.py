"""
Detector for property (IV): T1 time-stationary dominates T1 event-stationary
"""
from typing import Optional

from src.config import settings
from src.models import MapModel
from src.schemas import PropertyName, PropertyVerdict
from src.services.metrics import GridLike, stochastic_order_gap
from src.utils.logger import setup_logger

logger = setup_logger(__name__)


def detect_stochastic_order_violation(
    model: MapModel,
    t_grid: GridLike = None,
    tolerance: Optional[float] = None,
) -> PropertyVerdict:
    """
    Check (pi - alpha) e^{Ct} 1 >= -tolerance on a grid

    Returns:
        Verdict whose margin is the minimum gap and worst_t its argmin
    """
    if tolerance is None:
        tolerance = settings.verdict_tolerance

    curve = stochastic_order_gap(model, t_grid)
    margin = curve.min_gap
    holds = margin >= -tolerance
    if not holds:
        logger.warning(f"Stochastic order fails for {model!r} at t = {curve.argmin_t}: gap {margin!r}")

    return PropertyVerdict(
        property=PropertyName.STOCHASTIC_ORDER,
        holds=holds,
        margin=margin,
        worst_t=curve.argmin_t,
    )
