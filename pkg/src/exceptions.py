"""Error hierarchy for MAP analysis"""
from typing import Optional, Sequence, Tuple

import numpy as np


class MapAnalysisError(Exception):
    """Base class for every error raised by the analyzer"""


class NumericFailureError(MapAnalysisError, ArithmeticError):
    """A computation produced non-finite values or failed a residual check"""


class SingularMatrixError(MapAnalysisError, np.linalg.LinAlgError):
    """A linear system is singular to working tolerance"""


class ModelValidationError(MapAnalysisError, ValueError):
    """
    A (C, D) pair violates one of the MAP rules

    Attributes:
        rule: Short identifier of the violated rule (e.g. "sign", "row_sum")
        entry: Offending (row, column) entry, when a single entry is at fault
        states: Offending subset of phases (e.g. an absorbing class)
    """

    def __init__(
        self,
        message: str,
        rule: str,
        entry: Optional[Tuple[int, int]] = None,
        states: Optional[Sequence[int]] = None,
    ):
        super().__init__(message)
        self.rule = rule
        self.entry = entry
        self.states = tuple(states) if states is not None else None


class ModelClassError(ModelValidationError):
    """The operation requires a different MAP class"""

    def __init__(self, message: str):
        super().__init__(message, rule="class")


class InsufficientSamplesError(MapAnalysisError, ValueError):
    """A Monte Carlo estimate was requested with too few samples"""


class CounterexampleRegressionError(MapAnalysisError, AssertionError):
    """The non-monotone hazard example no longer reproduces"""
