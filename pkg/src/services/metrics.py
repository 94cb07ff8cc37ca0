"""
Second-order quantities of a MAP
Interval moments, SCV, deviation matrix, index of dispersion, count variance,
hazard rate and the stochastic-order gap
"""
import math
from typing import List, Optional, Sequence, Union

import numpy as np

from src.config import settings
from src.exceptions import NumericFailureError, SingularMatrixError
from src.models import DeviationMatrix, FloatArray, GapCurve, HazardCurve, MapClass, MapModel, ProbVector, VariancePoint, frozen_array
from src.schemas import TimeGrid
from src.services.map_core import stationary_pair
from src.utils.linalg import expm_grid, inverse, solve_linear
from src.utils.logger import setup_logger

logger = setup_logger(__name__)

GridLike = Union[TimeGrid, Sequence[float], np.ndarray, None]


def as_time_grid(t_grid: GridLike) -> FloatArray:
    """
    Normalize a grid argument to a sorted array of nonnegative times

    ``None`` selects the configured default grid.
    """
    if t_grid is None:
        t_grid = TimeGrid()
    if isinstance(t_grid, TimeGrid):
        return t_grid.points()
    times = np.asarray(t_grid, dtype=np.float64).ravel()
    if times.size == 0:
        raise ValueError("Time grid is empty")
    if not np.all(np.isfinite(times)) or np.any(times < 0):
        raise ValueError("Time grid must contain finite nonnegative times")
    if np.any(np.diff(times) < 0):
        raise ValueError("Time grid must be sorted ascending")
    return times


# ============================================================================
# Interval moments and SCV
# ============================================================================

def interval_moment(model: MapModel, k: int) -> float:
    """
    k-th moment of the event-stationary inter-event time, k! alpha (-C)^{-k} 1

    Inverse powers are applied as k successive solves against -C.
    """
    return interval_moments(model, k)[-1]


def interval_moments(model: MapModel, k_max: int) -> List[float]:
    """Moments M_1, ..., M_{k_max}"""
    if k_max < 1:
        raise ValueError(f"Moment order must be positive, got {k_max}")
    alpha = stationary_pair(model).alpha.values
    minus_c = -model.C
    v = np.ones(model.order)
    moments = []
    for k in range(1, k_max + 1):
        v = solve_linear(minus_c, v)
        moments.append(math.factorial(k) * float(alpha @ v))
    return moments


def scv_product(model: MapModel) -> float:
    """pi C 1 * pi C^{-1} 1, equal to (c^2 + 1) / 2"""
    pi = stationary_pair(model).pi.values
    pi_c_one = float((pi @ model.C).sum())
    pi_c_inv_one = -float(pi @ solve_linear(-model.C, np.ones(model.order)))
    return pi_c_one * pi_c_inv_one


def scv(model: MapModel) -> float:
    """
    Squared coefficient of variation c^2 of the event-stationary interval

    Computed from M_2 / M_1^2 - 1 and cross-checked against 2 pi C 1 pi C^{-1} 1 - 1.

    Raises:
        NumericFailureError: If the two routes disagree
    """
    m1, m2 = interval_moments(model, 2)
    c2 = m2 / m1**2 - 1.0
    c2_product = 2.0 * scv_product(model) - 1.0
    if abs(c2 - c2_product) > settings.identity_tolerance * max(1.0, abs(c2)):
        raise NumericFailureError(f"SCV routes disagree: moments give {c2!r}, product form gives {c2_product!r}")
    return c2


def time_stationary_mean(model: MapModel) -> float:
    """E[T1] under the time-stationary start, pi (-C)^{-1} 1"""
    pi = stationary_pair(model).pi.values
    return float(pi @ solve_linear(-model.C, np.ones(model.order)))


def lemma1_residual(model: MapModel) -> float:
    """E[T1^pi] - lambda*/2 E[(T1^alpha)^2]; zero for every MAP"""
    pair = stationary_pair(model)
    m2 = interval_moment(model, 2)
    return time_stationary_mean(model) - 0.5 * pair.lambda_star * m2


# ============================================================================
# Deviation matrix and counts
# ============================================================================

def deviation_matrix(model: MapModel) -> DeviationMatrix:
    """
    Deviation matrix D# = (1 pi - Q)^{-1} - 1 pi of the phase generator

    Raises:
        NumericFailureError: If 1 pi - Q is singular or an identity fails
    """
    Q = model.generator
    pi = stationary_pair(model).pi
    one_pi = np.outer(np.ones(model.order), pi.values)
    fundamental = one_pi - Q
    try:
        group_inverse = inverse(fundamental)
    except SingularMatrixError as e:
        raise NumericFailureError(
            f"1 pi - Q is singular (condition number {np.linalg.cond(fundamental):.3e})"
        ) from e
    matrix = group_inverse - one_pi

    scale = max(1.0, float(np.linalg.norm(matrix, ord=np.inf)))
    tolerance = settings.identity_tolerance * scale
    row_residual = float(np.max(np.abs(matrix.sum(axis=1))))
    column_residual = float(np.max(np.abs(pi.values @ matrix)))
    inverse_residual = float(np.max(np.abs((matrix + one_pi) @ fundamental - np.eye(model.order))))
    if max(row_residual, column_residual, inverse_residual) > tolerance:
        raise NumericFailureError(
            f"Deviation matrix identities fail: D#1 {row_residual:.3e}, pi D# {column_residual:.3e}, "
            f"inverse {inverse_residual:.3e}"
        )
    return DeviationMatrix(matrix=frozen_array(matrix, 2), generator=frozen_array(Q, 2), pi=pi)


def overdispersion_term(model: MapModel, via: str = "events") -> float:
    """
    pi D D# D 1, or the equal pi (-C) D# (-C) 1 when ``via="phases"``
    """
    pi = stationary_pair(model).pi.values
    sharp = deviation_matrix(model).matrix
    if via == "events":
        left, right = pi @ model.D, model.event_rates
    elif via == "phases":
        left, right = pi @ (-model.C), model.exit_rates
    else:
        raise ValueError(f"Unknown route {via!r}; expected 'events' or 'phases'")
    return float(left @ sharp @ right)


def dispersion_index(model: MapModel) -> float:
    """
    Limiting index of dispersion of counts, d^2 = 1 + 2/lambda* pi D D# D 1

    MMPPs and MSPPs always have d^2 >= 1; a smaller value is logged.
    """
    lambda_star = stationary_pair(model).lambda_star
    d2 = 1.0 + 2.0 / lambda_star * overdispersion_term(model)
    if model.map_class in (MapClass.MMPP, MapClass.MSPP) and d2 < 1.0 - settings.verdict_tolerance:
        logger.warning(f"{model!r} has d^2 = {d2!r} < 1, contradicting overdispersion for its class")
    return d2


def variance_curve(model: MapModel, t_grid: GridLike = None) -> List[VariancePoint]:
    """
    Mean and variance of N(t) for the time-stationary process

    Var N(t) = (lambda* + 2 pi D D# D 1) t - 2 pi D D# D#(t) D 1 with the
    transient deviation matrix D#(t) = D# - e^{Qt} D#.
    """
    times = as_time_grid(t_grid)
    pair = stationary_pair(model)
    sharp = deviation_matrix(model).matrix
    pi_d = pair.pi.values @ model.D
    rates = model.event_rates
    lambda_star = pair.lambda_star

    linear_rate = lambda_star + 2.0 * float(pi_d @ sharp @ rates)
    transients = expm_grid(model.generator, times)
    left = pi_d @ sharp
    points = []
    for t, exp_qt in zip(times, transients):
        sharp_t = sharp - exp_qt @ sharp
        variance = linear_rate * t - 2.0 * float(left @ sharp_t @ rates)
        points.append(VariancePoint(t=float(t), mean=lambda_star * float(t), variance=variance))
    return points


# ============================================================================
# Hazard rate and stochastic order
# ============================================================================

def _phase_weights(model: MapModel, eta: np.ndarray, times: np.ndarray) -> np.ndarray:
    """Rows eta e^{Ct} for every t"""
    return np.einsum("j,njk->nk", eta, expm_grid(model.C, times))


def _hazard_terms(model: MapModel, eta: np.ndarray, times: np.ndarray):
    weights = _phase_weights(model, eta, times)
    survival = weights.sum(axis=1)
    density = weights @ model.event_rates
    weights_c = weights @ model.C
    # eta C e^{Ct} (-C) 1 and eta C e^{Ct} 1
    a = weights_c @ model.exit_rates
    b = weights_c.sum(axis=1)
    return survival, density, a, b


def hazard_derivative_numerator(model: MapModel, t_grid: GridLike = None, eta: Optional[ProbVector] = None) -> FloatArray:
    """
    eta C e^{Ct} (-C) 1 * eta e^{Ct} 1 + (eta C e^{Ct} 1)^2

    Equals h'(t) S(t)^2, so the hazard is non-increasing exactly where this is
    nonpositive. ``eta`` defaults to alpha.
    """
    times = as_time_grid(t_grid)
    if eta is None:
        eta = stationary_pair(model).alpha
    survival, _, a, b = _hazard_terms(model, eta.values, times)
    return a * survival + b**2


def _hazard_values(model: MapModel, eta: np.ndarray, times: np.ndarray) -> np.ndarray:
    survival, density, _, _ = _hazard_terms(model, eta, times)
    return density / survival


def hazard_curve(model: MapModel, eta: Optional[ProbVector] = None, t_grid: GridLike = None) -> HazardCurve:
    """
    Hazard h(t) = eta e^{Ct} D 1 / eta e^{Ct} 1 and its derivative on a grid

    The analytic derivative is compared with finite differences of h.
    Sampling stops at the first time whose survival underflows.

    Raises:
        NumericFailureError: If the derivative disagrees with finite differences
    """
    times = as_time_grid(t_grid)
    if eta is None:
        eta = stationary_pair(model).alpha
    eta_values = eta.values

    survival, density, a, b = _hazard_terms(model, eta_values, times)
    truncated_at = None
    below = np.flatnonzero(survival < settings.survival_floor)
    if below.size:
        cut = int(below[0])
        truncated_at = float(times[cut])
        logger.warning(f"Survival underflows at t = {truncated_at}; hazard curve truncated")
        times, survival, density, a, b = (x[:cut] for x in (times, survival, density, a, b))

    # normalize by S before combining; S^2 underflows long before the floor
    hazard = density / survival
    derivative = a / survival + (b / survival) ** 2
    if not np.all(np.isfinite(derivative)):
        k = int(np.flatnonzero(~np.isfinite(derivative))[0])
        raise NumericFailureError(f"Hazard derivative is not finite at t = {times[k]} (survival {survival[k]!r})")

    discrepancy = 0.0
    if times.size:
        scale = max(1.0, float(np.linalg.norm(model.C, ord=np.inf)))
        delta = 1e-4 / scale
        central = times >= delta
        fd = np.empty_like(times)
        with np.errstate(divide="ignore", invalid="ignore"):
            if central.any():
                tc = times[central]
                fd[central] = (_hazard_values(model, eta_values, tc + delta) - _hazard_values(model, eta_values, tc - delta)) / (2 * delta)
            if (~central).any():
                tf = times[~central]
                h0 = _hazard_values(model, eta_values, tf)
                h1 = _hazard_values(model, eta_values, tf + delta)
                h2 = _hazard_values(model, eta_values, tf + 2 * delta)
                fd[~central] = (-3 * h0 + 4 * h1 - h2) / (2 * delta)
        # h' carries units of rate^2; the absolute floor scales with ||C||^2
        checked = np.isfinite(fd)
        errors = np.where(checked, np.abs(fd - derivative), 0.0)
        allowed = np.maximum(1e-6 * scale**2, 1e-4 * np.abs(derivative))
        discrepancy = float(np.max(errors))
        if np.any(errors > allowed):
            k = int(np.argmax(errors - allowed))
            raise NumericFailureError(
                f"Hazard derivative {derivative[k]!r} disagrees with finite difference {fd[k]!r} at t = {times[k]}"
            )

    return HazardCurve(
        eta=eta,
        times=frozen_array(times, 1),
        survival=frozen_array(survival, 1),
        density=frozen_array(density, 1),
        hazard=frozen_array(hazard, 1),
        derivative=frozen_array(derivative, 1),
        truncated_at=truncated_at,
        max_derivative_discrepancy=discrepancy,
    )


def stochastic_order_gap(model: MapModel, t_grid: GridLike = None) -> GapCurve:
    """(pi - alpha) e^{Ct} 1 on a grid; nonnegative when T1^pi >=st T1^alpha"""
    times = as_time_grid(t_grid)
    pair = stationary_pair(model)
    difference = pair.pi.values - pair.alpha.values
    gap = _phase_weights(model, difference, times).sum(axis=1)
    return GapCurve(times=frozen_array(times, 1), gap=frozen_array(gap, 1))


def survival(model: MapModel, eta: ProbVector, t_grid: GridLike = None) -> FloatArray:
    """P(T1 > t) = eta e^{Ct} 1"""
    return _phase_weights(model, eta.values, as_time_grid(t_grid)).sum(axis=1)


def survival_at(model: MapModel, eta: ProbVector, times: np.ndarray) -> FloatArray:
    """Survival at arbitrary (unsorted) times"""
    times = np.asarray(times, dtype=np.float64)
    order = np.argsort(times)
    values = np.empty_like(times)
    values[order] = survival(model, eta, times[order])
    return values
