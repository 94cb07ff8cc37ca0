"""
Detector for property (I): overdispersion of the counting process
"""
from typing import Optional

from src.config import settings
from src.models import MapModel
from src.schemas import PropertyName, PropertyVerdict
from src.services.metrics import overdispersion_term
from src.utils.logger import setup_logger

logger = setup_logger(__name__)


def detect_overdispersion(model: MapModel, tolerance: Optional[float] = None) -> PropertyVerdict:
    """
    Check pi D D# D 1 >= -tolerance, i.e. d^2 >= 1

    Args:
        model: Validated MAP
        tolerance: Allowed negative margin (default from settings)

    Returns:
        Verdict whose margin is pi D D# D 1
    """
    if tolerance is None:
        tolerance = settings.verdict_tolerance

    margin = overdispersion_term(model)
    holds = margin >= -tolerance
    if not holds:
        logger.warning(f"Underdispersed counts for {model!r}: pi D D# D 1 = {margin!r}")

    return PropertyVerdict(property=PropertyName.OVERDISPERSION, holds=holds, margin=margin)
