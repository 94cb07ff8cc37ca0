"""
MAP construction and validation
Stationary distributions, the embedded event chain and PH laws of T1
"""
from typing import Sequence, Union

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from src.config import settings
from src.exceptions import ModelValidationError, NumericFailureError
from src.models import FloatArray, MapClass, MapModel, PhaseTypeDist, ProbVector, StationaryPair, frozen_array
from src.schemas import StartKind
from src.utils.linalg import as_square_matrix, left_null_prob_vector, solve_left, solve_linear, stationary_solution
from src.utils.logger import setup_logger

logger = setup_logger(__name__)

StartSpec = Union[StartKind, ProbVector]


def _is_diagonal(matrix: np.ndarray) -> bool:
    return not np.any(matrix - np.diag(np.diag(matrix)))


def _absorbing_class(Q: np.ndarray):
    """
    Strongly connected components of the off-diagonal support of Q

    Returns:
        Tuple (number of components, states of one closed component)
    """
    support = (Q > 0).astype(np.int8)
    np.fill_diagonal(support, 0)
    n_components, labels = connected_components(csr_matrix(support), directed=True, connection="strong")
    if n_components == 1:
        return 1, []

    for component in range(n_components):
        members = np.flatnonzero(labels == component)
        outside = np.flatnonzero(labels != component)
        if not support[np.ix_(members, outside)].any():
            return n_components, [int(i) for i in members]
    # A finite directed graph always has a closed component
    raise AssertionError("no closed component found")


def classify(C: np.ndarray, D: np.ndarray) -> MapClass:
    """MMPP when D is diagonal (this wins for order 1), else MSPP when C is diagonal"""
    if _is_diagonal(D):
        return MapClass.MMPP
    if _is_diagonal(C):
        return MapClass.MSPP
    return MapClass.GENERAL_MAP


def validate_model(C, D) -> MapModel:
    """
    Validate a (C, D) pair and classify it

    Args:
        C: Phase transitions without events
        D: Transitions that produce an event

    Returns:
        Classified MapModel

    Raises:
        ModelValidationError: Naming the violated rule and the offending entry,
            row or absorbing subset of states
    """
    try:
        C = as_square_matrix(C, name="C")
        D = as_square_matrix(D, name="D")
    except ValueError as e:
        raise ModelValidationError(str(e), rule="shape") from e

    if C.shape != D.shape:
        raise ModelValidationError(f"C has order {C.shape[0]} but D has order {D.shape[0]}", rule="shape")
    p = C.shape[0]

    # Sign patterns
    diagonal = np.diag(C)
    if np.any(diagonal >= 0):
        i = int(np.argmax(diagonal))
        raise ModelValidationError(
            f"C[{i},{i}] = {diagonal[i]!r} must be strictly negative",
            rule="sign",
            entry=(i, i),
        )
    off_diagonal = C - np.diag(diagonal)
    if np.any(off_diagonal < 0):
        i, j = (int(k) for k in np.unravel_index(np.argmin(off_diagonal), C.shape))
        raise ModelValidationError(
            f"C[{i},{j}] = {C[i, j]!r} must be nonnegative off the diagonal",
            rule="sign",
            entry=(i, j),
        )
    if np.any(D < 0):
        i, j = (int(k) for k in np.unravel_index(np.argmin(D), D.shape))
        raise ModelValidationError(f"D[{i},{j}] = {D[i, j]!r} must be nonnegative", rule="sign", entry=(i, j))

    if not np.any(D > 0):
        raise ModelValidationError("D is identically zero; the process has no events", rule="non_transient")

    # Zero row sums of Q = C + D
    Q = C + D
    residuals = np.abs(Q.sum(axis=1))
    scale = max(1.0, float(np.max(np.abs(diagonal))))
    worst = int(np.argmax(residuals))
    if residuals[worst] > settings.row_sum_tolerance * scale:
        raise ModelValidationError(
            f"Row {worst} of Q = C + D sums to {Q[worst].sum():.3e}, not 0",
            rule="row_sum",
            entry=(worst, worst),
        )

    if p > 1:
        n_components, closed = _absorbing_class(Q)
        if n_components > 1:
            raise ModelValidationError(
                f"Q is reducible ({n_components} communicating classes); states {closed} form a closed subset",
                rule="irreducible",
                states=closed,
            )

    model = MapModel(C=frozen_array(C, 2), D=frozen_array(D, 2), map_class=classify(C, D))
    logger.debug(f"Validated {model!r}")
    return model


def poisson_model(rate: float) -> MapModel:
    """Poisson process as an order-1 MAP"""
    return validate_model([[-float(rate)]], [[float(rate)]])


def mmpp_model(Q, rates: Sequence[float]) -> MapModel:
    """MMPP with modulating generator Q and per-phase event rates"""
    Q = as_square_matrix(Q, name="Q")
    D = np.diag(np.asarray(rates, dtype=np.float64))
    return validate_model(Q - D, D)


def stationary_pair(model: MapModel) -> StationaryPair:
    """
    Time-stationary pi, event-stationary alpha = pi D / (pi D 1) and lambda*

    alpha is cross-checked against the left fixed point of P = (-C)^{-1} D and
    pi against lambda* alpha (-C)^{-1}.

    Raises:
        NumericFailureError: If the cross checks disagree beyond tolerance
    """
    pi = left_null_prob_vector(model.generator)
    pi_d = pi.values @ model.D
    lambda_star = float(pi_d.sum())

    lambda_from_c = float(-(pi.values @ model.C).sum())
    if abs(lambda_star - lambda_from_c) > settings.cross_check_tolerance * max(1.0, lambda_star):
        raise NumericFailureError(f"pi D 1 = {lambda_star!r} differs from -pi C 1 = {lambda_from_c!r}")

    alpha = ProbVector.normalized(pi_d)

    alpha_fixed_point = stationary_solution(embedded_chain(model) - np.eye(model.order))
    drift = float(np.max(np.abs(alpha_fixed_point - alpha.values)))
    if drift > settings.cross_check_tolerance:
        raise NumericFailureError(f"alpha from pi D and from the embedded chain differ by {drift:.3e}")

    pi_from_alpha = lambda_star * solve_left(-model.C, alpha.values)
    drift = float(np.max(np.abs(pi_from_alpha - pi.values)))
    if drift > settings.identity_tolerance:
        raise NumericFailureError(f"pi reconstructed from alpha differs by {drift:.3e}")

    return StationaryPair(pi=pi, alpha=alpha, lambda_star=lambda_star)


def embedded_chain(model: MapModel) -> FloatArray:
    """
    Phase transition matrix at event epochs, P = (-C)^{-1} D

    Raises:
        NumericFailureError: If P is not row-stochastic within tolerance
    """
    P = solve_linear(-model.C, model.D)
    residual = float(np.max(np.abs(P.sum(axis=1) - 1.0)))
    if residual > settings.stochastic_row_tolerance:
        raise NumericFailureError(f"Embedded chain rows deviate from 1 by {residual:.3e}")
    return P


def ph_distribution(model: MapModel, start: StartSpec = StartKind.EVENT_STATIONARY) -> PhaseTypeDist:
    """
    PH law of the first inter-event time T1 under a given initial phase law

    Args:
        model: Validated MAP
        start: TIME_STATIONARY (eta = pi), EVENT_STATIONARY (eta = alpha) or a
            custom ProbVector of the model's order

    Raises:
        ModelValidationError: If a custom vector has the wrong order
    """
    if isinstance(start, ProbVector):
        if start.order != model.order:
            raise ModelValidationError(
                f"Initial vector has order {start.order}, model has order {model.order}",
                rule="dimension",
            )
        return PhaseTypeDist(eta=start, C=model.C, label="custom")

    start = StartKind(start)
    pair = stationary_pair(model)
    if start == StartKind.TIME_STATIONARY:
        return PhaseTypeDist(eta=pair.pi, C=model.C, label=start.value)
    if start == StartKind.EVENT_STATIONARY:
        return PhaseTypeDist(eta=pair.alpha, C=model.C, label=start.value)
    raise ValueError(f"Start {start.value!r} needs an explicit initial vector")


def initial_vector(model: MapModel, start: StartSpec) -> ProbVector:
    """eta for a start specification"""
    return ph_distribution(model, start).eta
