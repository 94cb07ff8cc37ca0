"""Domain models for the MAP burstiness analyzer"""
from .map_model import (
    FloatArray,
    MapClass,
    MapModel,
    PhaseTypeDist,
    ProbVector,
    StationaryPair,
    frozen_array,
)
from .curves import DeviationMatrix, GapCurve, HazardCurve, VariancePoint

__all__ = [
    "FloatArray",
    "MapClass",
    "MapModel",
    "PhaseTypeDist",
    "ProbVector",
    "StationaryPair",
    "frozen_array",
    "DeviationMatrix",
    "GapCurve",
    "HazardCurve",
    "VariancePoint",
]
