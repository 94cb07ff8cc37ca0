"""
Detector for property (III): squared coefficient of variation at least one
"""
from typing import Optional

from src.config import settings
from src.models import MapModel
from src.schemas import PropertyName, PropertyVerdict
from src.services.metrics import scv_product
from src.utils.logger import setup_logger

logger = setup_logger(__name__)


def detect_low_scv(model: MapModel, tolerance: Optional[float] = None) -> PropertyVerdict:
    """
    Check pi C 1 pi C^{-1} 1 - 1 >= -tolerance, equivalent to c^2 >= 1

    Args:
        model: Validated MAP
        tolerance: Allowed negative margin

    Returns:
        Verdict whose margin is (c^2 - 1) / 2 in product form
    """
    if tolerance is None:
        tolerance = settings.verdict_tolerance

    margin = scv_product(model) - 1.0
    holds = margin >= -tolerance
    if not holds:
        logger.warning(f"SCV below one for {model!r}: margin {margin!r}")

    return PropertyVerdict(property=PropertyName.SCV_AT_LEAST_ONE, holds=holds, margin=margin)
