"""Command-line interface for shapeci."""

import argparse
import logging
import sys
from collections.abc import Callable, Iterator
from contextlib import contextmanager
from dataclasses import asdict
from pathlib import Path
from typing import Any

from dotenv import dotenv_values
from pydantic import ValidationError
from rich.console import Console
from rich.progress import BarColumn, MofNCompleteColumn, Progress, TextColumn, TimeElapsedColumn

from shapeci import __version__
from shapeci.config import ShapeCISettings, get_settings
from shapeci.core.errors import (
    CoverageInvalidError,
    InvalidInputError,
    MissingNuisanceError,
    ShapeCIError,
)
from shapeci.core.manifest import RunManifest, manifest_path, stdout_manifest_path
from shapeci.core.metrics import MetricsCollector, MetricsTimer
from shapeci.core.piecewise import linear_piece_containing, mode_bracket
from shapeci.estimators import (
    SolverOptions,
    characterization_tolerance,
    check_convex_density_characterization,
    check_logconcave_characterization,
    check_lse_characterization,
    fit_convex_density_lse,
    fit_convex_lse,
    fit_log_concave_mle,
)
from shapeci.inference import (
    NONNEGATIVE,
    ConfidenceInterval,
    CriticalValueTable,
    NuisanceScale,
    Target,
    ci_derivative,
    ci_mode,
    ci_value,
    estimate_sigma,
    nuisance_a_random_design,
    nuisance_density,
    nuisance_logconcave,
)
from shapeci.simulation import (
    ExperimentConfig,
    SimulationConfig,
    build_full_table,
    run_coverage,
    simulate_lne_samples,
    write_ecdf_csv,
)
from shapeci.simulation.executor import ProgressCallback
from shapeci.utils.io import (
    FIT_MODELS,
    FitFile,
    fit_payload,
    load_fit,
    read_regression_csv,
    read_sample_csv,
    save_fit,
    write_json,
)

logger = logging.getLogger(__name__)

# stdout carries payloads only; everything human-facing goes to stderr.
stderr_console = Console(stderr=True)


def setup_logging(debug: bool = False, log_file: str | None = None, level: str = "WARNING") -> None:
    """
    Configure application logging on stderr and, optionally, a file.

    Args:
        debug: Force DEBUG level
        log_file: Optional path of a log file
        level: Level used when ``debug`` is off (from SHAPECI_LOG_LEVEL)
    """
    log_level = logging.DEBUG if debug else getattr(logging, level, logging.WARNING)
    handlers: list[logging.Handler] = [logging.StreamHandler(sys.stderr)]

    if log_file is not None:
        try:
            log_path = Path(log_file).expanduser()
            log_path.parent.mkdir(parents=True, exist_ok=True)
            handlers.append(logging.FileHandler(log_path))
        except OSError as e:
            print(f"Warning: could not create log file {log_file}: {e}", file=sys.stderr)
            log_file = None

    logging.basicConfig(
        level=log_level,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        handlers=handlers,
        force=True,
    )
    logger.debug(
        "Logging initialized: level=%s, file=%s", logging.getLevelName(log_level), log_file
    )


@contextmanager
def progress_bar(
    description: str, total: int, enabled: bool
) -> Iterator[ProgressCallback | None]:
    """Rich progress bar on stderr, yielding a (completed, message) callback."""
    if not enabled or not stderr_console.is_terminal:
        yield None
        return
    with Progress(
        TextColumn("[bold]{task.description}"),
        BarColumn(),
        MofNCompleteColumn(),
        TimeElapsedColumn(),
        console=stderr_console,
        transient=True,
    ) as progress:
        task_id = progress.add_task(description, total=total)

        def update(completed: int, message: str) -> None:
            progress.update(task_id, completed=completed)

        yield update


def load_table(path: Path | None, settings: ShapeCISettings) -> tuple[CriticalValueTable, str]:
    """User table (falling back to the builtin one for missing statistics) and its source."""
    chosen = path or settings.table_path
    builtin = CriticalValueTable.builtin()
    if chosen is None:
        return builtin, "builtin"
    logger.info("Loading critical-value table from %s", chosen)
    return CriticalValueTable.load(chosen).with_fallback(builtin), str(chosen)


def handle_fit(args: argparse.Namespace, settings: ShapeCISettings) -> int:
    """Handle 'shapeci fit'."""
    options = SolverOptions.from_settings(settings)
    metrics = MetricsCollector()

    with MetricsTimer(metrics, "fit_seconds"):
        if args.model == "convex-regression":
            data: Any = read_regression_csv(args.input)
            fit: Any = fit_convex_lse(data, options)
            report = check_lse_characterization(
                fit, data, characterization_tolerance(data, options.char_rtol)
            )
        elif args.model == "log-concave":
            data = read_sample_csv(args.input)
            fit = fit_log_concave_mle(data, options)
            report = check_logconcave_characterization(fit, data)
        else:
            data = read_sample_csv(args.input)
            fit = fit_convex_density_lse(data, options)
            report = check_convex_density_characterization(fit, data)

    report.require_passed(args.model)
    logger.info("Characterization check passed: %s", report.to_dict())

    manifest = RunManifest(
        command="fit",
        config={"input": str(args.input), "model": args.model, "options": asdict(options)},
        metrics=metrics.export_summary(),
    )
    if args.out is None:
        write_json(fit_payload(args.model, fit, data), stream=sys.stdout)
        manifest.finish().write(args.manifest or stdout_manifest_path("fit"))
        return 0

    save_fit(args.out, args.model, fit, data)
    manifest.add_output(args.out)
    manifest.finish().write(args.manifest or manifest_path(args.out))
    return 0


def _nuisance_scale(args: argparse.Namespace, fit_file: FitFile, piece: Any) -> NuisanceScale:
    if fit_file.model == "log-concave":
        return nuisance_logconcave(fit_file.log_concave, args.x0)
    if fit_file.model == "convex-density":
        return nuisance_density(fit_file.function, args.x0)

    if args.sigma is not None:
        sigma, source = args.sigma, "user"
    elif args.auto_sigma:
        if fit_file.data is None:
            raise MissingNuisanceError(
                "--auto-sigma needs the responses, which this fit file does not record"
            )
        sigma, source = estimate_sigma(fit_file.data), "difference-estimator"
    else:
        raise MissingNuisanceError(
            "The value and derivative intervals scale with sigma; pass --sigma VALUE or "
            "--auto-sigma (mode intervals need neither)"
        )
    if args.design == "uniform":
        if fit_file.data is None:
            raise MissingNuisanceError("--design uniform needs the design points in the fit file")
        return nuisance_a_random_design(fit_file.data, piece, sigma)
    return NuisanceScale(a_hat=sigma, source=source)


def handle_ci(args: argparse.Namespace, settings: ShapeCISettings) -> int:
    """Handle 'shapeci ci'."""
    fit_file = load_fit(args.fit)
    table, table_source = load_table(args.table, settings)
    target = Target(args.target)
    delta = 1.0 - args.level

    interval: ConfidenceInterval
    if target is Target.MODE:
        if fit_file.model == "convex-density":
            raise InvalidInputError("Convex nonincreasing densities have no interior mode")
        if fit_file.model == "log-concave":
            interval = ci_mode(fit_file.log_concave.mode_bracket(), delta, table)
        else:
            interval = ci_mode(
                mode_bracket(fit_file.function), delta, table, fit_file.function.domain
            )
    else:
        if args.x0 is None:
            raise InvalidInputError(f"--x0 is required for the {target.value} target")
        estimator = fit_file.estimator
        piece = (
            fit_file.log_concave.linear_piece_containing(args.x0)
            if fit_file.model == "log-concave"
            else linear_piece_containing(fit_file.function, args.x0)
        )
        scale = _nuisance_scale(args, fit_file, piece)
        domain = None if fit_file.model == "convex-regression" else NONNEGATIVE
        if target is Target.VALUE:
            interval = ci_value(
                estimator, piece, args.x0, fit_file.n, scale, delta, table, domain
            )
        else:
            interval = ci_derivative(estimator, piece, args.x0, fit_file.n, scale, delta, table)

    write_json(interval.to_dict(), stream=sys.stdout)

    config = {k: v for k, v in vars(args).items() if k != "handler"}
    manifest = RunManifest(command="ci", config=config, table_source=table_source)
    manifest.finish().write(args.manifest or stdout_manifest_path("ci"))
    return 0


def handle_simulate(args: argparse.Namespace, settings: ShapeCISettings) -> int:
    """Handle 'shapeci simulate-critical-values'."""
    config = SimulationConfig(
        f0=args.f0,
        x0=args.x0,
        n=args.n,
        B=args.reps,
        seed=settings.default_seed if args.seed is None else args.seed,
        sigma=args.sigma,
        design=args.design,
        workers=settings.resolve_workers(args.workers),
    )
    options = SolverOptions.from_settings(settings)
    metrics = MetricsCollector()

    with progress_bar("Simulating", config.B, settings.progress) as callback:
        samples = simulate_lne_samples(config, options, callback, metrics)
    table = build_full_table(samples, config)

    table.save(args.out)
    ecdf_path = args.ecdf or args.out.with_name(args.out.stem + ".ecdf.csv")
    write_ecdf_csv(table, ecdf_path)

    kinks_hit = sum(s.at_kink for s in samples)
    if kinks_hit:
        logger.info("x0 coincided with a kink in %d of %d replications", kinks_hit, len(samples))

    manifest = RunManifest(
        command="simulate-critical-values",
        config=config.model_dump(mode="json"),
        seed=config.seed,
        metrics=metrics.export_summary(),
    )
    manifest.add_output(args.out)
    manifest.add_output(ecdf_path)
    manifest.finish().write(manifest_path(args.out))
    stderr_console.print(
        f"Wrote {len(table.statistics)} statistics from {config.B} replications to {args.out}"
    )
    return 0


def parse_config_file(path: Path) -> dict[str, str]:
    """
    Parse a flat ``key = value`` file.

    Raises:
        InvalidInputError: If the file is missing or a line is not a key-value pair
    """
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise InvalidInputError(f"Cannot read config file {path}: {e}") from e

    expected = sum(
        1 for line in text.splitlines() if line.strip() and not line.strip().startswith("#")
    )
    values = dotenv_values(path)
    missing = [key for key, value in values.items() if value is None]
    if missing or len(values) != expected:
        raise InvalidInputError(
            f"Config file {path} has lines that are not 'key = value' pairs"
            + (f" (keys without value: {', '.join(missing)})" if missing else "")
        )
    return {key: value for key, value in values.items() if value is not None}


def handle_coverage(args: argparse.Namespace, settings: ShapeCISettings) -> int:
    """Handle 'shapeci coverage'."""
    raw: dict[str, Any] = dict(parse_config_file(args.config))
    raw.setdefault("seed", settings.default_seed)
    if args.workers is not None or "workers" not in raw:
        raw["workers"] = settings.resolve_workers(args.workers)
    config = ExperimentConfig(**raw)

    table, table_source = load_table(config.table, settings)
    options = SolverOptions.from_settings(settings)
    metrics = MetricsCollector()
    total = config.replications * len(config.n_grid)

    out: Path = args.out
    json_path = out.with_suffix(".json")
    manifest = RunManifest(
        command="coverage",
        config=config.model_dump(mode="json"),
        seed=config.seed,
        table_source=table_source,
    )
    try:
        with progress_bar("Coverage", total, settings.progress) as callback:
            report = run_coverage(config, table, options, callback, metrics)
    except CoverageInvalidError as e:
        if e.report is not None:
            write_json({**e.report.to_dict(), "valid": False}, json_path)
            manifest.add_output(json_path)
            manifest.metrics = metrics.export_summary()
            manifest.finish().write(manifest_path(json_path))
        raise

    report.to_csv(out)
    write_json({**report.to_dict(), "valid": True}, json_path)
    manifest.add_output(out)
    manifest.add_output(json_path)
    manifest.metrics = metrics.export_summary()
    manifest.finish().write(manifest_path(out))
    stderr_console.print(report.to_frame().to_string(index=False))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shapeci",
        description="Pivotal confidence intervals for shape-constrained estimators",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  shapeci fit data.csv --model convex-regression --out fit.json
  shapeci ci fit.json --target value --x0 0.5 --sigma 1
  shapeci ci fit.json --target mode --level 0.9
  shapeci simulate-critical-values --f0 quadratic --n 10000 --reps 10000 --out table.json
  shapeci coverage experiment.cfg --out coverage.csv --workers 8

Environment Variables:
  SHAPECI_WORKERS      # Default worker count (--workers overrides)
  SHAPECI_TABLE_PATH   # Critical-value table used when --table is omitted
  SHAPECI_LOG_LEVEL    # DEBUG, INFO, WARNING (default) or ERROR
  SHAPECI_PROGRESS     # Render progress bars on stderr (default: true)

Exit codes: 0 ok, 2 invalid input, 3 solver, simulation or certification failure,
4 point out of range, 5 missing statistic or nuisance scale.
        """,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--debug", action="store_true", help="Enable debug logging")
    parser.add_argument("--log-file", type=str, default=None, help="Also log to this file")

    subparsers = parser.add_subparsers(dest="command", help="Available commands")

    fit_parser = subparsers.add_parser("fit", help="Fit a shape-constrained estimator")
    fit_parser.add_argument("input", type=Path, help="CSV with header x,y (regression) or x")
    fit_parser.add_argument("--model", choices=FIT_MODELS, default="convex-regression")
    fit_parser.add_argument(
        "--out", type=Path, default=None, help="Fit file to write (default: stdout)"
    )
    fit_parser.add_argument(
        "--manifest",
        type=Path,
        default=None,
        help="Run manifest path (default: beside --out, else ./shapeci-fit.manifest.json)",
    )
    fit_parser.set_defaults(handler=handle_fit)

    ci_parser = subparsers.add_parser("ci", help="Confidence interval from a fit file")
    ci_parser.add_argument("fit", type=Path, help="Fit file written by 'shapeci fit'")
    ci_parser.add_argument("--target", choices=[t.value for t in Target], default="value")
    ci_parser.add_argument("--x0", type=float, default=None, help="Evaluation point")
    ci_parser.add_argument("--level", type=float, default=0.95, help="Nominal level 1 - delta")
    ci_parser.add_argument("--table", type=Path, default=None, help="Critical-value table JSON")
    sigma_group = ci_parser.add_mutually_exclusive_group()
    sigma_group.add_argument("--sigma", type=float, default=None, help="Known noise level")
    sigma_group.add_argument(
        "--auto-sigma", action="store_true", help="Difference-based sigma estimate"
    )
    ci_parser.add_argument("--design", choices=["fixed", "uniform"], default="fixed")
    ci_parser.add_argument(
        "--manifest",
        type=Path,
        default=None,
        help="Run manifest path (default: ./shapeci-ci.manifest.json)",
    )
    ci_parser.set_defaults(handler=handle_ci)

    sim_parser = subparsers.add_parser(
        "simulate-critical-values", help="Monte Carlo tables of the pivotal and oracle laws"
    )
    sim_parser.add_argument("--f0", default="quadratic", help="Truth spec, e.g. quadratic:c=6")
    sim_parser.add_argument("--x0", type=float, default=0.5)
    sim_parser.add_argument("--n", type=int, default=10_000)
    sim_parser.add_argument("--reps", type=int, default=10_000)
    sim_parser.add_argument("--seed", type=int, default=None)
    sim_parser.add_argument("--sigma", type=float, default=1.0)
    sim_parser.add_argument("--design", choices=["fixed", "uniform"], default="fixed")
    sim_parser.add_argument("--workers", type=int, default=None)
    sim_parser.add_argument("--out", type=Path, required=True, help="Table JSON to write")
    sim_parser.add_argument("--ecdf", type=Path, default=None, help="ECDF CSV to write")
    sim_parser.set_defaults(handler=handle_simulate)

    cov_parser = subparsers.add_parser("coverage", help="Coverage and length experiment")
    cov_parser.add_argument("config", type=Path, help="Flat key = value experiment file")
    cov_parser.add_argument("--out", type=Path, required=True, help="Report CSV to write")
    cov_parser.add_argument("--workers", type=int, default=None)
    cov_parser.set_defaults(handler=handle_coverage)

    return parser


def main(argv: list[str] | None = None) -> int:
    """Main CLI entry point."""
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        settings = get_settings()
    except ValidationError as e:
        print(f"Configuration error: {e}", file=sys.stderr)
        return 2

    setup_logging(
        debug=args.debug,
        log_file=args.log_file or (str(settings.log_file) if settings.log_file else None),
        level=settings.log_level,
    )

    handler: Callable[[argparse.Namespace, ShapeCISettings], int] | None = getattr(
        args, "handler", None
    )
    if handler is None:
        parser.print_help(sys.stderr)
        return 2

    try:
        return handler(args, settings)
    except ShapeCIError as e:
        print(f"Error: {e}", file=sys.stderr)
        return e.exit_code
    except ValidationError as e:
        print(f"Invalid configuration: {e}", file=sys.stderr)
        return 2
    except ValueError as e:
        print(f"Invalid input: {e}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        print("\nInterrupted", file=sys.stderr)
        return 130
    except Exception as e:
        logger.exception("Unexpected failure")
        print(f"Unexpected error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
