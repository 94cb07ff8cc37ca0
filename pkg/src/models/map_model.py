"""Immutable domain types for Markovian arrival processes"""
import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np
import numpy.typing as npt

from src.config import settings

FloatArray = npt.NDArray[np.float64]


def frozen_array(values, ndim: int) -> FloatArray:
    """Return a read-only float64 copy of ``values`` with the given rank"""
    array = np.array(values, dtype=np.float64, copy=True)
    if array.ndim != ndim:
        raise ValueError(f"Expected a {ndim}-dimensional array, got shape {array.shape}")
    array.setflags(write=False)
    return array


class MapClass(str, enum.Enum):
    """Structural class of a MAP"""

    GENERAL_MAP = "general_map"
    MMPP = "mmpp"
    MSPP = "mspp"


@dataclass(frozen=True, eq=False)
class ProbVector:
    """
    Probability vector over the phases (pi, alpha, or an initial eta)

    Entries must be nonnegative and sum to one within the configured
    tolerance; the stored vector is renormalized exactly.
    """

    values: FloatArray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size == 0:
            raise ValueError(f"Probability vector must be a non-empty 1-D array, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("Probability vector has non-finite entries")
        if np.any(values < 0):
            i = int(np.argmin(values))
            raise ValueError(f"Probability vector entry {i} is negative ({values[i]:.3e})")
        total = float(values.sum())
        if abs(total - 1.0) > settings.probability_sum_tolerance:
            raise ValueError(f"Probability vector sums to {total!r}, not 1")
        object.__setattr__(self, "values", frozen_array(values / total, ndim=1))

    @classmethod
    def normalized(cls, weights) -> "ProbVector":
        """Build a probability vector from nonnegative weights with positive sum"""
        weights = np.asarray(weights, dtype=np.float64)
        total = float(weights.sum())
        if not np.isfinite(total) or total <= 0:
            raise ValueError(f"Cannot normalize weights with total {total!r}")
        return cls(weights / total)

    @classmethod
    def unit(cls, order: int, phase: int) -> "ProbVector":
        """Point mass on a single phase"""
        if not 0 <= phase < order:
            raise ValueError(f"Phase {phase} out of range for order {order}")
        values = np.zeros(order)
        values[phase] = 1.0
        return cls(values)

    @property
    def order(self) -> int:
        return int(self.values.size)

    def __len__(self) -> int:
        return self.order

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ProbVector):
            return NotImplemented
        return bool(np.array_equal(self.values, other.values))

    def __hash__(self) -> int:
        return hash(self.values.tobytes())


@dataclass(frozen=True, eq=False)
class MapModel:
    """
    Validated MAP (C, D) pair

    Instances are produced by ``src.services.map_core.validate_model``; the
    matrices are stored as read-only arrays.
    """

    C: FloatArray
    D: FloatArray
    map_class: MapClass

    @property
    def order(self) -> int:
        return int(self.C.shape[0])

    @property
    def generator(self) -> FloatArray:
        """Q = C + D"""
        return self.C + self.D

    @property
    def event_rates(self) -> FloatArray:
        """D 1, the event intensity per phase"""
        return self.D.sum(axis=1)

    @property
    def exit_rates(self) -> FloatArray:
        """-C 1, equal to D 1 for a valid MAP"""
        return -self.C.sum(axis=1)

    def __eq__(self, other) -> bool:
        if not isinstance(other, MapModel):
            return NotImplemented
        return (
            self.map_class == other.map_class
            and np.array_equal(self.C, other.C)
            and np.array_equal(self.D, other.D)
        )

    def __hash__(self) -> int:
        return hash((self.C.tobytes(), self.D.tobytes(), self.map_class))

    def __repr__(self) -> str:
        return f"MapModel(order={self.order}, class={self.map_class.value})"


@dataclass(frozen=True)
class StationaryPair:
    """Time-stationary pi, event-stationary alpha and the event rate lambda*"""

    pi: ProbVector
    alpha: ProbVector
    lambda_star: float


@dataclass(frozen=True)
class PhaseTypeDist:
    """PH(eta, C) law of the first inter-event time"""

    eta: ProbVector
    C: FloatArray
    label: Optional[str] = None

    @property
    def order(self) -> int:
        return int(self.C.shape[0])

    @property
    def exit_rates(self) -> FloatArray:
        return -self.C.sum(axis=1)
