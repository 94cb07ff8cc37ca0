"""
Command-line interface for the MAP burstiness analyzer

    python -m src.main analyze model.json
    python -m src.main sweep --generator cyclic --order 4
    python -m src.main hazard model.json --format csv

Machine-readable results go to standard output (or --output); logs and
diagnostics go to standard error.
"""
import argparse
import json
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from src.config import settings
from src.exceptions import MapAnalysisError, ModelValidationError
from src.schemas import GeneratorKind, SimConfig, SimulationReport, StartKind, SweepConfig, SweepOutcome, TimeGrid
from src.services.experiment import counterexample_model, instance_model, reproduce_counterexample, run_sweep
from src.services.map_core import ph_distribution
from src.services.metrics import dispersion_index, hazard_curve, scv, stochastic_order_gap, variance_curve
from src.services.model_io import load_model, save_model
from src.services.properties import property_verdicts
from src.services.report_generator import report_generator
from src.services.simulator import (
    estimate_dispersion,
    estimate_dispersion_from_intervals,
    estimate_scv,
    first_interval_ks_test,
    simulate_events,
)
from src.utils.logger import setup_logger

logger = setup_logger(__name__)

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_PROPERTY_VIOLATED = 2
EXIT_HARD_VIOLATION = 3


class CliParser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors exit with the input-error code"""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT_ERROR, f"{self.prog}: error: {message}\n")


def _emit(text: str, output: Optional[Path]) -> None:
    if output is None:
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        output.write_text(text)
        logger.info(f"Wrote {output}")


def _grid_from_args(args: argparse.Namespace) -> TimeGrid:
    return TimeGrid(
        start=settings.grid_start if args.t_start is None else args.t_start,
        stop=settings.grid_stop if args.t_stop is None else args.t_stop,
        step=settings.grid_step if args.t_step is None else args.t_step,
    )


# ============================================================================
# Commands
# ============================================================================

def cmd_analyze(args: argparse.Namespace) -> int:
    """Full metrics report; exit 2 when any property is violated"""
    model = load_model(args.model)
    report = property_verdicts(model, _grid_from_args(args), tolerance=args.tolerance)
    _emit(report_generator.schema_json(report), args.output)
    return EXIT_OK if report.all_hold else EXIT_PROPERTY_VIOLATED


def _sweep_config(args: argparse.Namespace) -> SweepConfig:
    """Config file values overridden by explicit flags"""
    values: Dict[str, Any] = {}
    if args.config is not None:
        values.update(json.loads(Path(args.config).read_text()))
    if args.full_scale:
        values["n_instances"] = settings.full_scale_instances
    overrides = {
        "orders": args.order,
        "n_instances": args.n,
        "generator": args.generator,
        "tolerance": args.tolerance,
        "seed": args.seed,
        "workers": args.workers,
    }
    values.update({k: v for k, v in overrides.items() if v is not None})
    if any(v is not None for v in (args.t_start, args.t_stop, args.t_step)):
        values["grid"] = _grid_from_args(args)
    return SweepConfig.model_validate(values)


def _save_flagged(outcome: SweepOutcome, directory: Path) -> None:
    """Write every flagged instance as a model file order<p>_<index>.json"""
    directory.mkdir(parents=True, exist_ok=True)
    flagged = [r for r in outcome.instances if r.flagged]
    for record in flagged:
        model = instance_model(outcome.config, record.order, record.index)
        save_model(model, directory / f"order{record.order}_{record.index}.json")
    logger.info(f"Wrote {len(flagged)} flagged model(s) to {directory}")


def cmd_sweep(args: argparse.Namespace) -> int:
    """Randomized sweep; exit 3 on a hard (III) or (IV) violation or a (II) holding with c^2 < 1"""
    cfg = _sweep_config(args)
    logger.info(f"Sweep seed: {cfg.seed}")
    outcome = run_sweep(cfg)
    if args.csv is not None:
        args.csv.write_text(report_generator.to_csv(report_generator.sweep_frame(outcome)))
        logger.info(f"Wrote per-instance margins to {args.csv}")
    if args.save_flagged is not None:
        _save_flagged(outcome, args.save_flagged)
    _emit(report_generator.schema_json(outcome), args.output)
    if outcome.has_hard_violation:
        logger.warning(
            f"{outcome.hard_violations} hard violation(s), "
            f"{outcome.dhr_implication_violations} with a non-increasing hazard"
        )
        return EXIT_HARD_VIOLATION
    return EXIT_OK


def cmd_hazard(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    dist = ph_distribution(model, args.start)
    curve = hazard_curve(model, dist.eta, _grid_from_args(args))
    logger.info(
        f"Hazard of T1 from the {dist.label} start: {len(curve)} samples, "
        f"max derivative discrepancy {curve.max_derivative_discrepancy:.2e}"
    )
    if curve.is_truncated:
        logger.warning(f"Samples stop before t = {curve.truncated_at}")
    _emit(report_generator.render(report_generator.hazard_frame(curve), args.format), args.output)
    return EXIT_OK


def cmd_gap(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    curve = stochastic_order_gap(model, _grid_from_args(args))
    _emit(report_generator.render(report_generator.gap_frame(curve), args.format), args.output)
    return EXIT_OK


def cmd_variance(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    points = variance_curve(model, _grid_from_args(args))
    _emit(report_generator.render(report_generator.variance_frame(points), args.format), args.output)
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    """Simulated c^2 and d^2 against the analytic values, plus a KS test of T1"""
    model = load_model(args.model)
    seed = settings.default_seed if args.seed is None else args.seed
    cfg = SimConfig(
        seed=seed,
        n_events=args.n_events,
        horizon=args.horizon,
        start=args.start,
        phase=args.phase,
        n_replications=args.replications,
        workers=args.workers,
    )
    logger.info(f"Simulation seed: {seed}")

    stream = simulate_events(model, cfg)
    if args.events_csv is not None:
        args.events_csv.write_text(report_generator.to_csv(report_generator.events_frame(stream)))
        logger.info(f"Wrote {stream.n_events} events to {args.events_csv}")

    ks = first_interval_ks_test(model, start=StartKind.EVENT_STATIONARY, n=args.ks_samples, seed=seed)
    report = SimulationReport(
        seed=seed,
        n_events=cfg.n_events,
        horizon=cfg.horizon,
        scv=estimate_scv(model, cfg),
        scv_analytic=scv(model),
        d2=estimate_dispersion(model, cfg),
        d2_analytic=dispersion_index(model),
        d2_from_intervals=estimate_dispersion_from_intervals(stream, cfg.n_batches),
        ks_statistic=ks.statistic,
        ks_pvalue=ks.pvalue,
        ks_passed=ks.passed,
    )
    _emit(report_generator.schema_json(report), args.output)
    return EXIT_OK


def cmd_counterexample(args: argparse.Namespace) -> int:
    """Hazard samples of the non-monotone example"""
    result = reproduce_counterexample(_grid_from_args(args))
    if args.model_out is not None:
        save_model(counterexample_model(), args.model_out)
        logger.info(f"Wrote the model to {args.model_out}")
    logger.info(
        f"Hazard rises by {result.rise:.6f} between t = {result.rise_start_t} and t = {result.rise_end_t}"
    )
    _emit(report_generator.render(report_generator.hazard_frame(result.curve), args.format), args.output)
    return EXIT_OK


# ============================================================================
# Parser
# ============================================================================

def _add_grid_args(parser: argparse.ArgumentParser, step: Optional[float] = None) -> None:
    parser.add_argument("--t-start", type=float, default=None, help="Grid start (default 0)")
    parser.add_argument("--t-stop", type=float, default=None, help="Grid stop (default 10)")
    parser.add_argument(
        "--t-step",
        type=float,
        default=step,
        help=f"Grid step (default {step if step is not None else settings.grid_step})",
    )


def _add_output_args(parser: argparse.ArgumentParser, formats: bool = False) -> None:
    parser.add_argument("-o", "--output", type=Path, default=None, help="Output file (default stdout)")
    if formats:
        parser.add_argument("--format", choices=["json", "csv"], default="csv", help="Output format")


def build_parser() -> argparse.ArgumentParser:
    parser = CliParser(prog="mapburst", description="Burstiness properties of Markovian arrival processes")
    sub = parser.add_subparsers(dest="command", required=True)

    analyze = sub.add_parser("analyze", help="Metrics and property verdicts for a model file")
    analyze.add_argument("model", type=Path, help='JSON file {"C": [[...]], "D": [[...]]}')
    analyze.add_argument("--tolerance", type=float, default=None, help="Verdict tolerance")
    _add_grid_args(analyze)
    _add_output_args(analyze)
    analyze.set_defaults(handler=cmd_analyze)

    sweep = sub.add_parser("sweep", help="Randomized conjecture sweep")
    sweep.add_argument("--config", type=Path, default=None, help="JSON file with SweepConfig fields")
    sweep.add_argument("--order", type=int, action="append", default=None, help="Order p (repeatable)")
    sweep.add_argument("--n", type=int, default=None, help="Instances per order")
    sweep.add_argument("--generator", choices=[g.value for g in GeneratorKind], default=None)
    sweep.add_argument("--tolerance", type=float, default=None, help="Flag margins below -tolerance")
    sweep.add_argument("--seed", type=int, default=None)
    sweep.add_argument("--workers", type=int, default=None)
    sweep.add_argument(
        "--full-scale",
        action="store_true",
        help=f"Use {settings.full_scale_instances} instances per order unless --n is given",
    )
    sweep.add_argument("--csv", type=Path, default=None, help="Also write per-instance margins as CSV")
    sweep.add_argument(
        "--save-flagged", type=Path, default=None, help="Directory for model files of flagged instances"
    )
    _add_grid_args(sweep)
    _add_output_args(sweep)
    sweep.set_defaults(handler=cmd_sweep)

    for name, handler, helptext in (
        ("hazard", cmd_hazard, "Hazard rate of T1 and its derivative"),
        ("gap", cmd_gap, "Stochastic-order gap (pi - alpha) e^{Ct} 1"),
        ("variance", cmd_variance, "Var N(t) / E N(t) of the time-stationary process"),
    ):
        curve = sub.add_parser(name, help=helptext)
        curve.add_argument("model", type=Path)
        if name == "hazard":
            curve.add_argument(
                "--start",
                choices=[StartKind.EVENT_STATIONARY.value, StartKind.TIME_STATIONARY.value],
                default=StartKind.EVENT_STATIONARY.value,
                help="Initial phase law eta",
            )
        _add_grid_args(curve)
        _add_output_args(curve, formats=True)
        curve.set_defaults(handler=handler)

    simulate = sub.add_parser("simulate", help="Monte Carlo estimates of c^2 and d^2")
    simulate.add_argument("model", type=Path)
    simulate.add_argument("--seed", type=int, default=None, help=f"Seed (default {settings.default_seed})")
    simulate.add_argument("--n-events", type=int, default=settings.sim_events)
    simulate.add_argument("--horizon", type=float, default=None)
    simulate.add_argument("--start", choices=[s.value for s in StartKind], default=StartKind.EVENT_STATIONARY.value)
    simulate.add_argument("--phase", type=int, default=None, help="Initial phase for --start phase")
    simulate.add_argument("--replications", type=int, default=1)
    simulate.add_argument("--workers", type=int, default=1)
    simulate.add_argument("--ks-samples", type=int, default=100_000)
    simulate.add_argument("--events-csv", type=Path, default=None, help="Export the event stream as CSV")
    _add_output_args(simulate)
    simulate.set_defaults(handler=cmd_simulate)

    counterexample = sub.add_parser("counterexample", help="Hazard of the non-monotone cyclic MMPP")
    _add_grid_args(counterexample, step=0.01)
    counterexample.add_argument("--model-out", type=Path, default=None, help="Also write the model as a JSON file")
    _add_output_args(counterexample, formats=True)
    counterexample.set_defaults(handler=cmd_counterexample)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Run one subcommand and return its exit code"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    try:
        return args.handler(args)
    except ModelValidationError as e:
        details = f"rule={e.rule}"
        if e.entry is not None:
            details += f", entry={e.entry}"
        if e.states is not None:
            details += f", states={list(e.states)}"
        logger.error(f"Invalid model: {e} ({details})")
    except (MapAnalysisError, ValueError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
    return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
