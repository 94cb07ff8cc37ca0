"""Computed matrices and sampled curves"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .map_model import FloatArray, ProbVector


@dataclass(frozen=True)
class DeviationMatrix:
    """
    Deviation matrix D# of a generator Q together with the Q and pi used

    D# = (1 pi - Q)^{-1} - 1 pi
    """

    matrix: FloatArray
    generator: FloatArray
    pi: ProbVector

    @property
    def group_inverse(self) -> FloatArray:
        """Q^- = D# + 1 pi"""
        return self.matrix + np.outer(np.ones(self.matrix.shape[0]), self.pi.values)


@dataclass(frozen=True)
class VariancePoint:
    """Mean and variance of N(t) in the time-stationary process"""

    t: float
    mean: float
    variance: float

    @property
    def ratio(self) -> float:
        """Var N(t) / E N(t); tends to 1 as t -> 0"""
        return self.variance / self.mean if self.mean > 0 else 1.0


@dataclass(frozen=True)
class HazardCurve:
    """
    Hazard rate h(t) and its derivative sampled on a grid

    ``truncated_at`` holds the first grid time whose survival fell below the
    floor; samples stop before it.
    """

    eta: ProbVector
    times: FloatArray
    survival: FloatArray
    density: FloatArray
    hazard: FloatArray
    derivative: FloatArray
    truncated_at: Optional[float] = None
    max_derivative_discrepancy: float = 0.0

    @property
    def is_truncated(self) -> bool:
        return self.truncated_at is not None

    def __len__(self) -> int:
        return int(self.times.size)


@dataclass(frozen=True)
class GapCurve:
    """Stochastic-order gap (pi - alpha) e^{Ct} 1 on a grid"""

    times: FloatArray
    gap: FloatArray

    @property
    def min_gap(self) -> float:
        return float(self.gap.min())

    @property
    def argmin_t(self) -> float:
        return float(self.times[int(np.argmin(self.gap))])
