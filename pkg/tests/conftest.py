"""
Shared fixtures: small MAPs whose metrics are known in closed form
"""
import pytest

from src.services.experiment import counterexample_model
from src.services.map_core import mmpp_model, poisson_model, validate_model


@pytest.fixture
def poisson():
    """Poisson process with rate 2"""
    return poisson_model(2.0)


@pytest.fixture
def mmpp2():
    """Two-state MMPP with rates (1, 3) and unit switching: c^2 = 9/7, d^2 = 3/2"""
    return mmpp_model([[-1.0, 1.0], [1.0, -1.0]], [1.0, 3.0])


@pytest.fixture
def counterexample():
    """Order-4 cyclic MMPP whose hazard rate is not monotone"""
    return counterexample_model()


@pytest.fixture
def mspp():
    """
    MSPP with exit rates (1, 2) and identical rows of P

    Intervals are i.i.d. hyperexponential, so c^2 = d^2 = 11/9.
    """
    return validate_model([[-1.0, 0.0], [0.0, -2.0]], [[0.5, 0.5], [1.0, 1.0]])
