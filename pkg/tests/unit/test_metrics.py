"""
Unit tests for interval moments, dispersion, hazard and stochastic-order metrics
"""
import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.schemas import TimeGrid
from src.services.experiment import random_mmpp
from src.services.map_core import mmpp_model, poisson_model, stationary_pair, validate_model
from src.services.metrics import (
    as_time_grid,
    deviation_matrix,
    dispersion_index,
    hazard_curve,
    hazard_derivative_numerator,
    interval_moment,
    interval_moments,
    lemma1_residual,
    overdispersion_term,
    scv,
    scv_product,
    stochastic_order_gap,
    survival,
    survival_at,
    time_stationary_mean,
    variance_curve,
)


class TestTimeGrid:
    """Grid normalization"""

    def test_default_grid(self):
        """0, 0.2, ..., 10"""
        times = as_time_grid(None)
        assert times.size == 51
        assert times[0] == 0.0
        assert times[-1] == 10.0
        assert times[5] == 1.0

    def test_explicit_sequence(self):
        """Sequences pass through"""
        assert_allclose(as_time_grid([0.0, 0.5, 2.0]), [0.0, 0.5, 2.0])

    def test_rejects_negative(self):
        """Negative times are invalid"""
        with pytest.raises(ValueError):
            as_time_grid([-1.0, 0.0])

    def test_rejects_unsorted(self):
        """Grids must be ascending"""
        with pytest.raises(ValueError):
            as_time_grid([1.0, 0.5])


class TestMoments:
    """Interval moments and SCV"""

    def test_mmpp2_moments(self, mmpp2):
        """M1 = 1/2, M2 = 4/7, M3 = 51/49"""
        assert_allclose(interval_moments(mmpp2, 3), [0.5, 4.0 / 7.0, 51.0 / 49.0], rtol=1e-12)

    def test_first_moment_is_inverse_rate(self, counterexample):
        """M1 = 1 / lambda*"""
        assert interval_moment(counterexample, 1) == pytest.approx(1.0 / stationary_pair(counterexample).lambda_star)

    def test_invalid_order(self, mmpp2):
        """Moment order must be positive"""
        with pytest.raises(ValueError):
            interval_moments(mmpp2, 0)

    def test_scv_values(self, poisson, mmpp2, mspp):
        """Poisson 1, MMPP2 9/7, MSPP 11/9"""
        assert scv(poisson) == pytest.approx(1.0, abs=1e-13)
        assert scv(mmpp2) == pytest.approx(9.0 / 7.0, rel=1e-12)
        assert scv(mspp) == pytest.approx(11.0 / 9.0, rel=1e-12)

    def test_scv_product_form(self, mmpp2):
        """pi C 1 pi C^{-1} 1 = (c^2 + 1) / 2"""
        assert scv_product(mmpp2) == pytest.approx(8.0 / 7.0, rel=1e-12)

    def test_time_stationary_mean(self, mmpp2):
        """pi (-C)^{-1} 1 = 4/7"""
        assert time_stationary_mean(mmpp2) == pytest.approx(4.0 / 7.0, rel=1e-12)

    def test_lemma1_identity(self, mmpp2, counterexample, mspp):
        """E[T1^pi] = lambda*/2 E[(T1^alpha)^2]"""
        for model in (mmpp2, counterexample, mspp):
            assert abs(lemma1_residual(model)) <= 1e-9 * interval_moment(model, 1)


class TestDeviationMatrix:
    """D# and the index of dispersion"""

    def test_symmetric_two_state(self, mmpp2):
        """Unit switching gives D# = (I - 1 pi) / 2"""
        sharp = deviation_matrix(mmpp2)
        assert_allclose(sharp.matrix, [[0.25, -0.25], [-0.25, 0.25]], atol=1e-14)
        assert_allclose(sharp.group_inverse, [[0.75, 0.25], [0.25, 0.75]], atol=1e-14)

    def test_defining_identities(self, counterexample):
        """D# 1 = 0 and pi D# = 0"""
        sharp = deviation_matrix(counterexample)
        assert_allclose(sharp.matrix.sum(axis=1), np.zeros(4), atol=1e-12)
        assert_allclose(sharp.pi.values @ sharp.matrix, np.zeros(4), atol=1e-12)

    def test_overdispersion_routes_agree(self, mmpp2, mspp):
        """Event and phase forms of pi D D# D 1 coincide"""
        assert overdispersion_term(mmpp2) == pytest.approx(0.5, rel=1e-12)
        for model in (mmpp2, mspp):
            assert overdispersion_term(model, via="events") == pytest.approx(
                overdispersion_term(model, via="phases"), rel=1e-10, abs=1e-14
            )

    def test_unknown_route(self, mmpp2):
        """Only events and phases are accepted"""
        with pytest.raises(ValueError):
            overdispersion_term(mmpp2, via="other")

    def test_dispersion_index(self, poisson, mmpp2, mspp):
        """Poisson 1, MMPP2 3/2, renewal MSPP equal to its c^2"""
        assert dispersion_index(poisson) == pytest.approx(1.0, abs=1e-13)
        assert dispersion_index(mmpp2) == pytest.approx(1.5, rel=1e-12)
        assert dispersion_index(mspp) == pytest.approx(11.0 / 9.0, rel=1e-10)


class TestVarianceCurve:
    """Var N(t) / E N(t)"""

    def test_poisson_ratio_is_one(self, poisson):
        """Counts of a Poisson process are Poisson"""
        for point in variance_curve(poisson, [0.0, 1.0, 7.5]):
            assert point.ratio == pytest.approx(1.0, abs=1e-12)

    def test_mmpp2_transient(self, mmpp2):
        """Var/E = 3/2 - (1 - e^{-2t}) / (4t)"""
        times = np.array([0.5, 2.0, 50.0])
        ratios = [p.ratio for p in variance_curve(mmpp2, times)]
        expected = 1.5 - (1.0 - np.exp(-2.0 * times)) / (4.0 * times)
        assert_allclose(ratios, expected, rtol=1e-10)

    def test_mmpp2_limit(self, mmpp2):
        """The ratio tends to d^2"""
        (point,) = variance_curve(mmpp2, [1e6])
        assert point.ratio == pytest.approx(1.5, abs=1e-6)

    def test_zero_time(self, mmpp2):
        """Var N(0) = E N(0) = 0"""
        (point,) = variance_curve(mmpp2, [0.0])
        assert point.mean == 0.0
        assert point.variance == pytest.approx(0.0, abs=1e-15)
        assert point.ratio == 1.0


class TestHazard:
    """Hazard rate of T1"""

    def test_poisson_constant(self, poisson):
        """h = lambda, h' = 0"""
        curve = hazard_curve(poisson)
        assert_allclose(curve.hazard, np.full(51, 2.0), rtol=1e-12)
        assert_allclose(curve.derivative, np.zeros(51), atol=1e-10)
        assert not curve.is_truncated

    def test_initial_value(self, mmpp2):
        """h(0) = alpha D 1 = 5/2"""
        curve = hazard_curve(mmpp2)
        assert curve.hazard[0] == pytest.approx(2.5, rel=1e-14)

    def test_two_state_mmpp_decreasing(self, mmpp2):
        """Two-state MMPPs have a non-increasing hazard"""
        curve = hazard_curve(mmpp2, t_grid=TimeGrid(step=0.05))
        assert np.all(curve.derivative <= 1e-12)
        assert np.all(np.diff(curve.hazard) <= 1e-12)

    def test_counterexample_rises(self, counterexample):
        """The cyclic example has a positive derivative somewhere"""
        curve = hazard_curve(counterexample, t_grid=TimeGrid(step=0.01))
        assert curve.derivative.max() > 1e-9
        assert curve.derivative[0] < 0

    def test_numerator_matches_sign(self, counterexample):
        """h'(t) S(t)^2 has the sign of h'"""
        grid = TimeGrid(step=0.1)
        curve = hazard_curve(counterexample, t_grid=grid)
        numerator = hazard_derivative_numerator(counterexample, grid)
        assert_allclose(numerator, curve.derivative * curve.survival**2, rtol=1e-9, atol=1e-15)

    def test_high_rate_poisson(self):
        """Rate 50 on the default grid: S(10) = e^{-500} stays above the floor"""
        curve = hazard_curve(poisson_model(50.0))
        assert not curve.is_truncated
        assert np.all(np.isfinite(curve.derivative))
        assert_allclose(curve.hazard, np.full(51, 50.0), rtol=1e-10)
        assert_allclose(curve.derivative, np.zeros(51), atol=1e-6)

    def test_high_rate_mmpp(self):
        """Scaling time by 100 scales h by 100 and h' by 10^4"""
        model = mmpp_model([[-100.0, 100.0], [100.0, -100.0]], [100.0, 300.0])
        curve = hazard_curve(model)
        assert np.all(np.isfinite(curve.hazard))
        assert np.all(np.isfinite(curve.derivative))
        assert curve.hazard[0] == pytest.approx(250.0, rel=1e-12)
        # alpha C (-C) 1 + (alpha C 1)^2 = -8 + 6.25 for the unscaled model
        assert curve.derivative[0] == pytest.approx(-17_500.0, rel=1e-9)
        assert np.all(curve.derivative <= 1e-6)

    def test_rescaled_random_mmpps(self):
        """Random order-4 MMPPs with rates scaled by 10^U(-2, 3) give finite curves"""
        rng = np.random.default_rng(21)
        for _ in range(30):
            base = random_mmpp(4, rng)
            factor = 10.0 ** rng.uniform(-2.0, 3.0)
            model = validate_model(base.C * factor, base.D * factor)
            curve = hazard_curve(model)
            assert len(curve) > 0
            assert np.all(np.isfinite(curve.hazard))
            assert np.all(np.isfinite(curve.derivative))

    def test_truncated_where_survival_underflows(self):
        """Samples stop at the first time with S(t) below the floor"""
        curve = hazard_curve(poisson_model(50.0), t_grid=TimeGrid(stop=20.0))
        # e^{-50 t} < 1e-300 first at t = 14 on a 0.2 grid
        assert curve.is_truncated
        assert curve.truncated_at == pytest.approx(14.0)
        assert len(curve) == 70
        assert curve.times[-1] < curve.truncated_at
        assert np.all(np.isfinite(curve.hazard))
        assert np.all(np.isfinite(curve.derivative))

    def test_derivative_agrees_with_finite_differences(self, counterexample):
        """The recorded discrepancy stays well inside the check"""
        curve = hazard_curve(counterexample, t_grid=TimeGrid(step=0.05))
        assert 0.0 <= curve.max_derivative_discrepancy < 1e-6

    def test_survival_and_density(self, poisson):
        """S(t) = e^{-2t}, f(t) = 2 e^{-2t}"""
        curve = hazard_curve(poisson, t_grid=[0.0, 1.0])
        assert_allclose(curve.survival, np.exp([0.0, -2.0]), rtol=1e-13)
        assert_allclose(curve.density, 2.0 * np.exp([0.0, -2.0]), rtol=1e-13)


class TestSurvivalAndGap:
    """Survival functions and the stochastic-order gap"""

    def test_poisson_survival(self, poisson):
        """e^{-2t}"""
        pi = stationary_pair(poisson).pi
        assert_allclose(survival(poisson, pi, [0.0, 0.5, 3.0]), np.exp([0.0, -1.0, -6.0]), rtol=1e-13)

    def test_survival_at_unsorted(self, poisson):
        """Evaluation order follows the input"""
        pi = stationary_pair(poisson).pi
        assert_allclose(survival_at(poisson, pi, [3.0, 0.0, 0.5]), np.exp([-6.0, 0.0, -1.0]), rtol=1e-13)

    def test_ph_survival_shape(self, mmpp2, counterexample, mspp):
        """S(0) = 1 and S is non-increasing under both stationary starts"""
        grid = TimeGrid(step=0.05)
        for model in (mmpp2, counterexample, mspp):
            pair = stationary_pair(model)
            for eta in (pair.pi, pair.alpha):
                values = survival(model, eta, grid)
                assert values[0] == pytest.approx(1.0, abs=1e-14)
                assert np.all(np.diff(values) <= 1e-15)
                assert np.all(values > 0)

    def test_poisson_gap_zero(self, poisson):
        """pi = alpha for a Poisson process"""
        curve = stochastic_order_gap(poisson)
        assert_allclose(curve.gap, np.zeros(51), atol=1e-15)

    def test_mmpp2_gap(self, mmpp2):
        """Nonnegative, zero at t = 0, slope alpha D 1 - lambda* = 1/2 at the origin"""
        curve = stochastic_order_gap(mmpp2, [0.0, 1e-6, 1.0, 5.0])
        assert curve.gap[0] == pytest.approx(0.0, abs=1e-15)
        assert curve.gap[1] == pytest.approx(0.5e-6, rel=1e-5)
        assert curve.min_gap >= -1e-15
