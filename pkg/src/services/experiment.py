"""
Randomized conjecture sweeps and the non-monotone hazard example
"""
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.config import settings
from src.detectors import (
    detect_increasing_hazard,
    detect_low_scv,
    detect_overdispersion,
    detect_stochastic_order_violation,
)
from src.exceptions import CounterexampleRegressionError, MapAnalysisError, NumericFailureError
from src.models import HazardCurve, MapModel
from src.schemas import (
    FailureRecord,
    GeneratorKind,
    InstanceRecord,
    MetricsReport,
    SweepConfig,
    SweepOutcome,
    TimeGrid,
)
from src.services.map_core import mmpp_model, stationary_pair, validate_model
from src.services.metrics import hazard_curve, interval_moment, lemma1_residual, scv, time_stationary_mean
from src.services.properties import property_verdicts
from src.utils.logger import setup_logger

logger = setup_logger(__name__)

_MAX_REDRAWS = 100
_KIND_CODES = {
    GeneratorKind.DENSE_UNIFORM: 0,
    GeneratorKind.CYCLIC_UNIFORM: 1,
    GeneratorKind.MSPP: 2,
}
# Below this |c^2 - 1| the Lemma 1 sign comparison is not meaningful
_SIGN_THRESHOLD = 1e-6


@dataclass
class RedrawCounter:
    """Number of degenerate draws discarded by a generator"""

    count: int = 0


def instance_rng(seed: int, kind: GeneratorKind, order: int, index: int) -> np.random.Generator:
    """Independent stream per instance; the same instance draws the same model under any worker count"""
    return np.random.default_rng([seed, _KIND_CODES[GeneratorKind(kind)], order, index])


def _redraw(draw: Callable[[], Tuple], accept: Callable[..., bool], counter: Optional[RedrawCounter]):
    for _ in range(_MAX_REDRAWS):
        values = draw()
        if accept(*values):
            return values
        if counter is not None:
            counter.count += 1
    raise NumericFailureError(f"No admissible draw after {_MAX_REDRAWS} attempts")


# ============================================================================
# Model builders
# ============================================================================

def cyclic_mmpp(cycle_rates: Sequence[float], event_rates: Sequence[float]) -> MapModel:
    """MMPP whose phases move only i -> i+1 (mod p) at the given rates"""
    cycle_rates = np.asarray(cycle_rates, dtype=np.float64)
    p = cycle_rates.size
    if p < 2:
        raise ValueError(f"A cyclic MMPP needs at least two phases, got {p}")
    Q = np.zeros((p, p))
    Q[np.arange(p), (np.arange(p) + 1) % p] = cycle_rates
    Q[np.diag_indices(p)] = -cycle_rates
    return mmpp_model(Q, event_rates)


def counterexample_model() -> MapModel:
    """Order-4 cyclic MMPP with unit switching rates and event rates (0.01, 0.01, 1, 1)"""
    return cyclic_mmpp([1.0, 1.0, 1.0, 1.0], [0.01, 0.01, 1.0, 1.0])


def random_mmpp(order: int, rng: np.random.Generator, counter: Optional[RedrawCounter] = None) -> MapModel:
    """
    MMPP with U(0,1) off-diagonal switching rates and Exp(1) event rates

    Draws with an exactly zero rate are discarded and counted.
    """
    if order < 2:
        raise ValueError(f"Order must be at least 2, got {order}")
    off_diagonal = ~np.eye(order, dtype=bool)

    def draw():
        switching = rng.random((order, order))
        return switching, rng.exponential(1.0, order)

    switching, rates = _redraw(draw, lambda s, r: bool(np.all(s[off_diagonal] > 0) and np.all(r > 0)), counter)
    switching[~off_diagonal] = 0.0
    Q = switching - np.diag(switching.sum(axis=1))
    return mmpp_model(Q, rates)


def random_cyclic_mmpp(order: int, rng: np.random.Generator, counter: Optional[RedrawCounter] = None) -> MapModel:
    """Cyclic MMPP with U(0,1) cycle rates and Exp(1) event rates"""
    if order < 2:
        raise ValueError(f"Order must be at least 2, got {order}")

    def draw():
        return rng.random(order), rng.exponential(1.0, order)

    cycle, rates = _redraw(draw, lambda c, r: bool(np.all(c > 0) and np.all(r > 0)), counter)
    return cyclic_mmpp(cycle, rates)


def random_mspp(order: int, rng: np.random.Generator, counter: Optional[RedrawCounter] = None) -> MapModel:
    """
    MSPP with exit rates c_i ~ U(0.1, 5)

    Row i of D splits c_i over the target phases in proportion to U(0,1)
    weights, so every event may switch the Poisson stream.
    """
    if order < 2:
        raise ValueError(f"Order must be at least 2, got {order}")
    off_diagonal = ~np.eye(order, dtype=bool)

    def draw():
        return rng.uniform(0.1, 5.0, order), rng.random((order, order))

    rates, weights = _redraw(draw, lambda r, w: bool(np.all(w[off_diagonal] > 0)), counter)
    D = rates[:, None] * weights / weights.sum(axis=1, keepdims=True)
    C = -np.diag(rates)
    return validate_model(C, D)


GENERATORS: Dict[GeneratorKind, Callable[..., MapModel]] = {
    GeneratorKind.DENSE_UNIFORM: random_mmpp,
    GeneratorKind.CYCLIC_UNIFORM: random_cyclic_mmpp,
    GeneratorKind.MSPP: random_mspp,
}


# ============================================================================
# Sweeps
# ============================================================================

def lemma1_consistent(model: MapModel) -> Tuple[float, bool]:
    """
    Residual of E[T1^pi] = lambda*/2 E[(T1^alpha)^2] and whether it holds

    Also requires sign(c^2 - 1) = sign(E[T1^pi] - E[T1^alpha]) when c^2 is
    not within the sign threshold of one.
    """
    residual = lemma1_residual(model)
    m1 = interval_moment(model, 1)
    consistent = abs(residual) <= settings.identity_tolerance * m1

    excess = scv(model) - 1.0
    if abs(excess) > _SIGN_THRESHOLD:
        consistent = consistent and np.sign(excess) == np.sign(time_stationary_mean(model) - m1)
    return residual, bool(consistent)


def instance_model(cfg: SweepConfig, order: int, index: int, counter: Optional[RedrawCounter] = None) -> MapModel:
    """Regenerate the model of instance (order, index) from its own seed stream"""
    rng = instance_rng(cfg.seed, cfg.generator, order, index)
    return GENERATORS[cfg.generator](order, rng, counter)


def evaluate_instance(cfg: SweepConfig, order: int, index: int) -> InstanceRecord:
    """Draw instance (order, index) and record its (I) to (IV) margins"""
    counter = RedrawCounter()
    model = instance_model(cfg, order, index, counter)

    scv_verdict = detect_low_scv(model, tolerance=cfg.tolerance)
    order_verdict = detect_stochastic_order_violation(model, cfg.grid, tolerance=cfg.tolerance)
    dispersion_verdict = detect_overdispersion(model, tolerance=cfg.tolerance)
    hazard_verdict = detect_increasing_hazard(model, cfg.grid, tolerance=cfg.tolerance)
    residual, consistent = lemma1_consistent(model)

    return InstanceRecord(
        order=order,
        index=index,
        scv_margin=scv_verdict.margin,
        min_gap=order_verdict.margin,
        argmin_t=order_verdict.worst_t,
        overdispersion_margin=dispersion_verdict.margin,
        hazard_margin=hazard_verdict.margin,
        lemma1_residual=residual,
        lemma1_consistent=consistent,
        overdispersion_holds=dispersion_verdict.holds,
        hazard_holds=hazard_verdict.holds,
        scv_holds=scv_verdict.holds,
        order_holds=order_verdict.holds,
        redraws=counter.count,
    )


def _evaluate_job(job: Tuple[SweepConfig, int, int]) -> Union[InstanceRecord, FailureRecord]:
    cfg, order, index = job
    try:
        return evaluate_instance(cfg, order, index)
    except (MapAnalysisError, ArithmeticError, np.linalg.LinAlgError, ValueError) as e:
        logger.error(f"Instance (order {order}, index {index}) failed: {e}")
        return FailureRecord(order=order, index=index, error=f"{type(e).__name__}: {e}")


def summarize_sweep(
    cfg: SweepConfig,
    instances: List[InstanceRecord],
    failures: List[FailureRecord],
    runtime_seconds: float = 0.0,
) -> SweepOutcome:
    """Aggregate minima and violation counts over the recorded instances"""
    outcome = SweepOutcome(config=cfg, instances=instances, failures=failures, runtime_seconds=runtime_seconds)
    if not instances:
        return outcome

    outcome.min_scv_margin = min(r.scv_margin for r in instances)
    outcome.min_gap = min(r.min_gap for r in instances)
    outcome.min_overdispersion_margin = min(r.overdispersion_margin for r in instances)
    outcome.redraws = sum(r.redraws for r in instances)

    for record in instances:
        worst = min(record.scv_margin, record.min_gap)
        if record.flagged:
            outcome.flagged += 1
        if worst < -cfg.hard_threshold:
            outcome.hard_violations += 1
        elif worst < 0:
            outcome.noise_band += 1
        if not record.overdispersion_holds:
            outcome.overdispersion_violations += 1
        if record.order_holds and not record.scv_holds:
            outcome.implication_violations += 1
        if record.hazard_holds and record.scv_margin < -cfg.hard_threshold:
            outcome.dhr_implication_violations += 1
        if not record.lemma1_consistent:
            outcome.lemma1_inconsistencies += 1
    return outcome


def run_sweep(cfg: SweepConfig) -> SweepOutcome:
    """
    Evaluate n_instances random models for every order in the config

    Instance failures are kept in a ledger; the result does not depend on
    the number of workers.
    """
    started = time.perf_counter()
    jobs = [(cfg, order, index) for order in cfg.orders for index in range(cfg.n_instances)]
    logger.info(
        f"Sweep started: {cfg.generator.value} generator, orders {cfg.orders}, "
        f"{cfg.n_instances} instances each, seed {cfg.seed}, {cfg.workers} worker(s)"
    )

    if cfg.workers > 1:
        chunksize = max(1, len(jobs) // (cfg.workers * 16))
        with ProcessPoolExecutor(max_workers=cfg.workers) as executor:
            results = list(executor.map(_evaluate_job, jobs, chunksize=chunksize))
    else:
        results = [_evaluate_job(job) for job in jobs]

    instances = [r for r in results if isinstance(r, InstanceRecord)]
    failures = [r for r in results if isinstance(r, FailureRecord)]
    outcome = summarize_sweep(cfg, instances, failures, time.perf_counter() - started)

    logger.info(
        f"Sweep finished in {outcome.runtime_seconds:.1f}s: {len(instances)} instances, "
        f"{len(failures)} failures, {outcome.flagged} flagged, {outcome.hard_violations} hard violations, "
        f"{outcome.noise_band} in the noise band"
    )
    if outcome.noise_band:
        logger.warning(f"{outcome.noise_band} instances have margins in [-{cfg.hard_threshold}, 0)")
    if outcome.dhr_implication_violations:
        logger.warning(f"{outcome.dhr_implication_violations} instances have a non-increasing hazard but c^2 < 1")
    return outcome


# ============================================================================
# Non-monotone hazard example
# ============================================================================

@dataclass(frozen=True)
class CounterexampleResult:
    """Hazard curve of the example with the located decrease and rise"""

    curve: HazardCurve
    report: MetricsReport
    decrease_t: float
    rise_start_t: float
    rise_end_t: float
    rise: float
    hazard_at_zero: float
    expected_hazard_at_zero: float = field(default=0.0)


def _counterexample_grid() -> TimeGrid:
    return TimeGrid(start=0.0, stop=10.0, step=0.01)


def reproduce_counterexample(t_grid: Optional[TimeGrid] = None, margin: float = 1e-9) -> CounterexampleResult:
    """
    Hazard of the order-4 cyclic example with eta = alpha

    Locates a strict decrease of h followed by a later rise larger than
    ``margin``, and checks h(0) = alpha D 1.

    Raises:
        CounterexampleRegressionError: If the curve no longer shows the pattern
    """
    grid = t_grid or _counterexample_grid()
    model = counterexample_model()
    pair = stationary_pair(model)
    curve = hazard_curve(model, pair.alpha, grid)
    times, h = np.asarray(curve.times), np.asarray(curve.hazard)

    expected = float(pair.alpha.values @ model.event_rates)
    if times[0] != 0.0 or abs(h[0] - expected) > 1e-10:
        raise CounterexampleRegressionError(f"h(0) = {h[0]!r}, expected alpha D 1 = {expected!r}")

    drops = np.flatnonzero(np.diff(h) < -margin)
    if not drops.size:
        raise CounterexampleRegressionError("Hazard never strictly decreases on the grid")
    start = int(drops[0]) + 1

    tail = h[start:]
    running_min = np.minimum.accumulate(tail)
    rises = tail - running_min
    k = int(np.argmax(rises))
    if rises[k] <= margin:
        raise CounterexampleRegressionError(f"No rise above {margin} after t = {times[start]}")
    low = start + int(np.argmin(tail[: k + 1]))

    report = property_verdicts(model, TimeGrid())
    logger.info(
        f"Hazard decreases by t = {times[start]}, then rises by {rises[k]:.6f} "
        f"from t = {times[low]} to t = {times[start + k]}"
    )
    return CounterexampleResult(
        curve=curve,
        report=report,
        decrease_t=float(times[start]),
        rise_start_t=float(times[low]),
        rise_end_t=float(times[start + k]),
        rise=float(rises[k]),
        hazard_at_zero=float(h[0]),
        expected_hazard_at_zero=expected,
    )
