"""
Dense linear-algebra kernels for small square matrices

All functions are pure: inputs are never modified and results are fresh
arrays. Tolerances default to the values in ``src.config.settings``.
"""
import warnings
from typing import Optional, Sequence

import numpy as np
import scipy.linalg
from scipy.linalg import LinAlgWarning

from src.config import settings
from src.exceptions import ModelValidationError, NumericFailureError, SingularMatrixError
from src.models import FloatArray, ProbVector
from src.utils.logger import setup_logger

logger = setup_logger(__name__)


def as_square_matrix(A, name: str = "A") -> FloatArray:
    """
    Coerce ``A`` to a finite float64 square matrix

    Args:
        A: Array-like of shape (p, p)
        name: Name used in error messages

    Returns:
        A float64 copy of the matrix

    Raises:
        ValueError: If the matrix is not square, empty, or has non-finite entries
    """
    matrix = np.array(A, dtype=np.float64, copy=True)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.shape[0] < 1:
        raise ValueError(f"{name} must be a non-empty square matrix, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        i, j = np.argwhere(~np.isfinite(matrix))[0]
        raise ValueError(f"{name}[{i},{j}] is not finite ({matrix[i, j]!r})")
    return matrix


def _check_time(t: float) -> float:
    t = float(t)
    if not np.isfinite(t) or t < 0:
        raise ValueError(f"Time must be a finite nonnegative number, got {t!r}")
    return t


def _check_finite_result(result: np.ndarray, scaled: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(result)):
        magnitude = float(np.max(np.abs(scaled)))
        raise NumericFailureError(
            f"{what} produced non-finite entries; largest |entry| of the scaled matrix is {magnitude:.3e}"
        )


def expm(A, t: float = 1.0) -> FloatArray:
    """
    Matrix exponential e^{A t}

    Uses scaling and squaring with Pade approximants (scipy.linalg.expm).

    Args:
        A: Square matrix
        t: Nonnegative time

    Returns:
        e^{A t}

    Raises:
        NumericFailureError: If the result overflows
    """
    matrix = as_square_matrix(A)
    t = _check_time(t)
    if t == 0.0:
        return np.eye(matrix.shape[0])
    scaled = matrix * t
    with np.errstate(over="ignore", invalid="ignore"):
        result = scipy.linalg.expm(scaled)
    _check_finite_result(result, scaled, "expm")
    return result


def expm_grid(A, times: Sequence[float]) -> np.ndarray:
    """
    Stack of e^{A t} for every t in ``times``

    Returns:
        Array of shape (len(times), p, p)
    """
    matrix = as_square_matrix(A)
    times = np.asarray([_check_time(t) for t in times], dtype=np.float64)
    scaled = times[:, None, None] * matrix[None, :, :]
    with np.errstate(over="ignore", invalid="ignore"):
        result = scipy.linalg.expm(scaled)
    # e^0 = I exactly
    result[times == 0.0] = np.eye(matrix.shape[0])
    _check_finite_result(result, scaled, "expm_grid")
    return result


def solve_linear(A, b, residual_tolerance: Optional[float] = None) -> np.ndarray:
    """
    Solve A x = b with partially pivoted LU elimination

    Args:
        A: Square matrix
        b: Right-hand side vector of length p, or a (p, k) matrix
        residual_tolerance: Bound on ||A x - b||_inf / (1 + ||b||_inf)

    Returns:
        Solution with the same shape as ``b``

    Raises:
        SingularMatrixError: If a pivot falls below the singularity threshold
        NumericFailureError: If the residual check fails
    """
    matrix = as_square_matrix(A)
    rhs = np.array(b, dtype=np.float64, copy=True)
    if rhs.shape[0] != matrix.shape[0] or rhs.ndim not in (1, 2):
        raise ValueError(f"Right-hand side shape {rhs.shape} does not match matrix order {matrix.shape[0]}")
    if residual_tolerance is None:
        residual_tolerance = settings.solve_residual_tolerance

    norm_a = float(np.linalg.norm(matrix, ord=np.inf))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(matrix)
    pivots = np.abs(np.diag(lu))
    threshold = settings.singular_pivot_tolerance * max(norm_a, np.finfo(float).tiny)
    if np.min(pivots) < threshold:
        k = int(np.argmin(pivots))
        raise SingularMatrixError(
            f"Matrix is singular to tolerance: pivot {k} is {pivots[k]:.3e} "
            f"(threshold {threshold:.3e})"
        )

    x = scipy.linalg.lu_solve((lu, piv), rhs)
    residual = float(np.max(np.abs(matrix @ x - rhs)))
    bound = residual_tolerance * (1.0 + float(np.max(np.abs(rhs))))
    if not np.isfinite(residual) or residual > bound:
        raise NumericFailureError(f"Linear solve residual {residual:.3e} exceeds {bound:.3e}")
    return x


def solve_left(A, b) -> np.ndarray:
    """Solve x A = b for the row vector x"""
    return solve_linear(np.transpose(as_square_matrix(A)), b)


def inverse(A) -> FloatArray:
    """Matrix inverse through :func:`solve_linear`"""
    matrix = as_square_matrix(A)
    return solve_linear(matrix, np.eye(matrix.shape[0]))


def stationary_solution(G) -> np.ndarray:
    """
    Normalized left null vector x G = 0, x 1 = 1

    One column of G is replaced by ones, which makes the system regular
    exactly when the null space of G is one-dimensional.

    Raises:
        SingularMatrixError: If the null space has dimension above one
    """
    matrix = as_square_matrix(G, name="G")
    p = matrix.shape[0]
    augmented = matrix.T.copy()
    augmented[-1, :] = 1.0
    rhs = np.zeros(p)
    rhs[-1] = 1.0
    x = solve_linear(augmented, rhs)
    return x / x.sum()


def left_null_prob_vector(Q, residual_tolerance: Optional[float] = None) -> ProbVector:
    """
    Stationary distribution pi of an irreducible generator Q (pi Q = 0)

    Args:
        Q: Generator matrix
        residual_tolerance: Bound on ||pi Q||_inf relative to max(1, ||Q||_inf)

    Returns:
        Strictly positive probability vector

    Raises:
        ModelValidationError: If the null space is not one-dimensional or pi is
            not strictly positive (both signal a reducible generator)
        NumericFailureError: If the residual check fails
    """
    generator = as_square_matrix(Q, name="Q")
    if residual_tolerance is None:
        residual_tolerance = settings.stationary_residual_tolerance

    try:
        x = stationary_solution(generator)
    except SingularMatrixError as e:
        raise ModelValidationError(
            f"Generator has a null space of dimension above one (reducible): {e}",
            rule="irreducible",
        ) from e

    if np.any(x <= 0):
        states = [int(i) for i in np.flatnonzero(x <= 0)]
        raise ModelValidationError(
            f"Stationary vector is not strictly positive on states {states} (reducible generator)",
            rule="irreducible",
            states=states,
        )

    residual = float(np.max(np.abs(x @ generator)))
    bound = residual_tolerance * max(1.0, float(np.linalg.norm(generator, ord=np.inf)))
    if residual > bound:
        raise NumericFailureError(f"Stationary residual ||pi Q|| = {residual:.3e} exceeds {bound:.3e}")

    return ProbVector.normalized(x)
