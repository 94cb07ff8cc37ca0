"""
Unit tests for the two-state MMPP formulas and the MSPP SCV band
"""
import numpy as np
import pytest
from numpy.testing import assert_allclose
from pydantic import ValidationError

from src.exceptions import ModelClassError, NumericFailureError
from src.services.closed_forms import Mmpp2ClosedForm, Mmpp2Params, check_gap_convention, mmpp2_metrics, mspp_scv_bounds
from src.services.experiment import random_mspp
from src.services.metrics import (
    dispersion_index,
    hazard_derivative_numerator,
    scv,
    stochastic_order_gap,
    variance_curve,
)

PARAMS = Mmpp2Params(lambda1=1.0, lambda2=3.0, sigma1=1.0, sigma2=1.0)
ASYMMETRIC = Mmpp2Params(lambda1=0.2, lambda2=5.0, sigma1=0.7, sigma2=2.5)


class TestMmpp2Params:
    """Parameter validation"""

    def test_model_matches_fixture(self, mmpp2):
        """(1, 3, 1, 1) assembles the shared fixture"""
        assert PARAMS.to_model() == mmpp2

    def test_both_rates_zero(self):
        """At least one event rate must be positive"""
        with pytest.raises(ValidationError):
            Mmpp2Params(lambda1=0.0, lambda2=0.0, sigma1=1.0, sigma2=1.0)

    def test_switching_rate_positive(self):
        """sigma must be strictly positive"""
        with pytest.raises(ValidationError):
            Mmpp2Params(lambda1=1.0, lambda2=2.0, sigma1=0.0, sigma2=1.0)


class TestMmpp2ClosedForm:
    """Printed formulas against the general pipeline"""

    def test_discriminant(self):
        """sqrt(B^2 - 4A) = sqrt(8) for the reference parameters"""
        assert mmpp2_metrics(PARAMS).discriminant == pytest.approx(np.sqrt(8.0), rel=1e-14)

    def test_nonpositive_discriminant_raises(self):
        """Inconsistent A and B are reported, not asserted"""
        closed = Mmpp2ClosedForm(params=PARAMS, c2=1.0, d2=1.0, A=1.0, B=2.0)
        with pytest.raises(NumericFailureError):
            closed.discriminant

    def test_reference_values(self):
        """c^2 = 9/7, d^2 = 3/2, A = 7, B = 6"""
        closed = mmpp2_metrics(PARAMS)
        assert closed.c2 == pytest.approx(9.0 / 7.0, rel=1e-14)
        assert closed.d2 == pytest.approx(1.5, rel=1e-14)
        assert closed.A == 7.0
        assert closed.B == 6.0
        assert closed.discriminant == pytest.approx(np.sqrt(8.0))

    @pytest.mark.parametrize("params", [PARAMS, ASYMMETRIC, Mmpp2Params(lambda1=0.0, lambda2=1.0, sigma1=3.0, sigma2=0.1)])
    def test_scv_and_dispersion_match_pipeline(self, params):
        """Closed forms agree with the matrix route"""
        closed = mmpp2_metrics(params)
        model = params.to_model()
        assert scv(model) == pytest.approx(closed.c2, rel=1e-9)
        assert dispersion_index(model) == pytest.approx(closed.d2, rel=1e-9)

    def test_equal_rates_are_poisson(self):
        """lambda1 = lambda2 gives c^2 = d^2 = 1 and a flat hazard"""
        closed = mmpp2_metrics(Mmpp2Params(lambda1=2.0, lambda2=2.0, sigma1=0.5, sigma2=1.5))
        assert closed.c2 == 1.0
        assert closed.d2 == 1.0
        assert closed.hazard_numerator(1.0) == 0.0
        assert closed.hazard_derivative_sign_factor == 0.0

    def test_hazard_numerator_matches_matrix_expression(self):
        """Printed h' numerator equals the expression evaluated with alpha"""
        closed = mmpp2_metrics(ASYMMETRIC)
        times = np.linspace(0.0, 5.0, 26)
        expected = [closed.hazard_numerator(t) for t in times]
        actual = hazard_derivative_numerator(ASYMMETRIC.to_model(), times)
        assert_allclose(actual, expected, rtol=1e-8, atol=1e-15)
        assert closed.hazard_derivative_sign_factor == -1.0

    def test_gap_matches_pipeline(self):
        """Displayed gap equals (pi - alpha) e^{Ct} 1"""
        closed = mmpp2_metrics(ASYMMETRIC)
        times = np.linspace(0.0, 10.0, 51)
        expected = [closed.gap(t) for t in times]
        assert_allclose(stochastic_order_gap(ASYMMETRIC.to_model(), times).gap, expected, rtol=1e-8, atol=1e-14)

    def test_variance_ratio_matches_curve(self):
        """Closed-form Var/E agrees with the deviation-matrix formula"""
        closed = mmpp2_metrics(ASYMMETRIC)
        times = [0.0, 0.1, 1.0, 10.0, 50.0]
        curve = variance_curve(ASYMMETRIC.to_model(), times)
        assert_allclose([p.ratio for p in curve], [closed.variance_ratio(t) for t in times], rtol=1e-9)

    def test_variance_ratio_at_fifty(self):
        """Reference model: Var/E(50) = 3/2 - 1/200"""
        assert mmpp2_metrics(PARAMS).variance_ratio(50.0) == pytest.approx(1.495, rel=1e-12)

    def test_stationary_alpha(self):
        """alpha = pi D / lambda*"""
        closed = mmpp2_metrics(PARAMS)
        assert_allclose(closed.alpha.values, [0.25, 0.75])
        assert_allclose(closed.pi.values, [0.5, 0.5])


class TestGapConvention:
    """Which alpha the displayed gap formula uses"""

    def test_stationary_alpha_reproduces_formula(self):
        """The formula agrees with the stationary alpha"""
        report = check_gap_convention(ASYMMETRIC)
        assert report.matches_stationary_alpha
        assert report.convention == "stationary"

    def test_printed_alpha_differs_for_asymmetric_switching(self):
        """The (sigma1 lambda1, sigma2 lambda2) weights give another curve"""
        report = check_gap_convention(ASYMMETRIC)
        assert not report.matches_printed_alpha


class TestMsppBounds:
    """SCV band 1 <= c^2 <= 2 kappa^2 / gamma^2 - 1"""

    def test_fixture_band(self, mspp):
        """Exit rates (1, 2): upper bound 5/4 contains c^2 = 11/9"""
        bounds = mspp_scv_bounds(mspp)
        assert bounds.kappa == pytest.approx(1.5)
        assert bounds.gamma == pytest.approx(np.sqrt(2.0))
        assert bounds.upper == pytest.approx(1.25)
        assert bounds.contains(scv(mspp))
        assert bounds.contains(bounds.upper + 5e-10)
        assert not bounds.contains(bounds.upper + 1e-3, slack=0.0)

    def test_random_instances_inside_band(self):
        """Random MSPPs respect the band"""
        rng = np.random.default_rng(5)
        for _ in range(50):
            model = random_mspp(4, rng)
            assert mspp_scv_bounds(model).contains(scv(model))

    def test_requires_mspp(self, mmpp2):
        """MMPPs are rejected"""
        with pytest.raises(ModelClassError):
            mspp_scv_bounds(mmpp2)
