"""
Property detectors (I)-(IV) for Markovian arrival processes
"""
from .overdispersion import detect_overdispersion
from .hazard_rate import detect_increasing_hazard
from .interval_variability import detect_low_scv
from .stochastic_order import detect_stochastic_order_violation

__all__ = [
    "detect_overdispersion",
    "detect_increasing_hazard",
    "detect_low_scv",
    "detect_stochastic_order_violation",
]
