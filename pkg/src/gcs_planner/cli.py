"""Command-line interface for gcs-planner.

Commands:
    gcs-planner plan     Plan a scenario, audit the trajectory and write the result files
    gcs-planner verify   Re-audit a stored result against its scenario
    gcs-planner bench    Time repeated planning runs on the packaged fixtures
    gcs-planner info     Show a scenario summary

Exit codes: 0 success, 1 planner or write failure, 2 infeasible, 3 audit failure,
64 usage error, missing input or invalid scenario.
"""

from __future__ import annotations

import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

import click
import numpy as np

from gcs_planner import __version__
from gcs_planner.config import RunConfig
from gcs_planner.errors import InfeasibleError, PlannerError, ResultWriteError, ScenarioError
from gcs_planner.scenario import Scenario, fixture_names, fixture_path, load_scenario

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INFEASIBLE = 2
EXIT_AUDIT = 3
EXIT_USAGE = 64

# Published GCS mean and standard deviation per fixture, in milliseconds.
REFERENCE_MS = {
    "static_avoidance": (12.1, 1.04),
    "lane_change": (13.9, 2.43),
    "overtaking": (12.4, 1.03),
}
LOWER_BOUND_TOL = 1e-6


class PlannerGroup(click.Group):
    """Click group that reports usage errors with exit code 64.

    Click uses 2 for usage errors, which here means an infeasible scenario.
    """

    def main(self, args=None, prog_name=None, complete_var=None, standalone_mode=True, **extra):
        try:
            return super().main(args, prog_name, complete_var, standalone_mode=False, **extra)
        except click.UsageError as exc:
            exc.show()
            sys.exit(EXIT_USAGE)
        except click.ClickException as exc:
            exc.show()
            sys.exit(exc.exit_code)
        except click.Abort:
            click.echo("Aborted!", err=True)
            sys.exit(EXIT_FAILURE)


# ====================================================================
# Main group
# ====================================================================
@click.group(cls=PlannerGroup)
@click.version_option(version=__version__, prog_name="gcs-planner")
@click.option("-v", "--verbose", count=True, help="-v for INFO logging, -vv for DEBUG")
@click.pass_context
def cli(ctx, verbose):
    """Trajectory planning over graphs of convex regions.

    Get started:  gcs-planner plan --scenario static_avoidance
    """
    ctx.ensure_object(dict)
    ctx.obj["verbosity"] = verbose
    _setup_logging(verbose)


def _run_options(f):
    """Flags shared by plan and bench: the RunConfig fields in kebab-case."""
    options = [
        click.option("--config", type=click.Path(exists=True, dir_okay=False),
                     help="Path to config.yaml"),
        click.option("--strategy", type=click.Choice(["auto", "enumerate", "relax-round", "both"]),
                     help="Path selection strategy (default: auto)"),
        click.option("--degree", type=int, help="Bezier degree, 4..10"),
        click.option("--facets", type=int, help="Facets of the polyhedral speed bound, 4..64"),
        click.option("--alpha", type=float, nargs=4, default=None,
                     help="Smoothness weights on derivatives 1..4"),
        click.option("--v-min", type=float, help="Minimum speed along the region direction [m/s]"),
        click.option("--v-max", type=float, help="Maximum speed [m/s]"),
        click.option("--h-prime-min", type=float, help="Lower bound on the time-scaling slope"),
        click.option("--t-max", type=float, help="Planning horizon [s]"),
        click.option("--audit-dt", type=float, help="Audit sampling step [s], at most 0.1"),
        click.option("--max-len", type=int, help="Longest region path to enumerate"),
        click.option("--enumerate-limit", type=int, help="Auto strategy enumerates up to this many paths"),
        click.option("--workers", type=int, help="Threads for per-path solves"),
        click.option("--seed", type=int, help="Seed for randomized ordering"),
    ]
    for option in reversed(options):
        f = option(f)
    return f


# ====================================================================
# plan: Solve, audit, write
# ====================================================================
@cli.command()
@click.option("--scenario", "scenario_ref", help="Scenario JSON file or packaged fixture name")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), help="Output directory (default: $GCS_PLANNER_OUT or ./out)")
@_run_options
@click.pass_context
def plan(ctx, scenario_ref, out_dir, config, **flags):
    """Plan a trajectory, audit it and write the result files."""
    cfg = _load_config(ctx, config, scenario=_resolve_scenario(scenario_ref), out_dir=out_dir, **flags)
    if cfg.scenario is None:
        raise click.UsageError("No scenario given. Pass --scenario or set 'scenario' in the config file.")
    # the config file may name a fixture too
    cfg = replace(cfg, scenario=_resolve_scenario(str(cfg.scenario)))
    scenario = _load(cfg)
    raise SystemExit(_run_plan(scenario, cfg))


# ====================================================================
# verify: Re-audit a stored result
# ====================================================================
@cli.command()
@click.option("--result", "result_path", required=True, type=click.Path(exists=True, dir_okay=False),
              help="result.json written by 'gcs-planner plan'")
@click.option("--scenario", "scenario_ref", required=True, help="Scenario JSON file or packaged fixture name")
@click.option("--v-max", type=float, help="Audit against a different maximum speed [m/s]")
@click.option("--facets", type=int, help="Facets of the polyhedral speed bound, 4..64")
@click.option("--audit-dt", type=float, help="Audit sampling step [s], at most 0.1")
@click.pass_context
def verify(ctx, result_path, scenario_ref, v_max, facets, audit_dt):
    """Audit a stored result independently of the planner."""
    cfg = _load_config(ctx, None, scenario=_resolve_scenario(scenario_ref),
                       v_max=v_max, facets=facets, audit_dt=audit_dt)
    scenario = _load(cfg)
    raise SystemExit(_run_verify(Path(result_path), scenario))


# ====================================================================
# bench: Repeated planning runs
# ====================================================================
@cli.command()
@click.option("--scenario", "scenario_refs", multiple=True,
              help="Scenario file or fixture name (repeatable; default: all packaged fixtures)")
@click.option("--runs", type=click.IntRange(min=1), default=500, show_default=True,
              help="Planning runs per scenario")
@_run_options
@click.pass_context
def bench(ctx, scenario_refs, runs, config, **flags):
    """Time the planning phase over repeated runs, one table row per scenario."""
    cfg = _load_config(ctx, config, **flags)
    refs = scenario_refs or tuple(fixture_names())
    scenarios = [_load(replace(cfg, scenario=_resolve_scenario(ref))) for ref in refs]
    _run_bench(scenarios, cfg, runs)


# ====================================================================
# info: Scenario summary
# ====================================================================
@cli.command()
@click.option("--scenario", "scenario_ref", required=True, help="Scenario JSON file or packaged fixture name")
@click.pass_context
def info(ctx, scenario_ref):
    """Show regions, edges, candidate paths and timing windows of a scenario."""
    from gcs_planner.graph import enumerate_paths

    cfg = _load_config(ctx, None, scenario=_resolve_scenario(scenario_ref))
    scenario = _load(cfg)
    paths = enumerate_paths(scenario.graph)

    click.echo()
    click.secho(f"  gcs-planner: {scenario.name}", bold=True)
    if scenario.description:
        click.echo(f"  {scenario.description}")
    click.echo(f"  File:           {cfg.scenario}")
    click.echo(f"  Regions:        {len(scenario.regions)} ({', '.join(r.id for r in scenario.regions)})")
    click.echo(f"  Edges:          {len(scenario.edges)}")
    click.echo(f"  Source/target:  {scenario.source} -> {scenario.target}")
    click.echo(f"  Paths:          {len(paths)}")
    click.echo(f"  Obstacles:      {len(scenario.static_obstacles)} static, "
               f"{len(scenario.dynamic_obstacles)} dynamic")
    click.echo(f"  Settings:       degree {scenario.settings.degree}, {scenario.settings.facets} facets")
    if scenario.timing:
        click.echo()
        click.echo("  Timing windows:")
        for w in scenario.timing:
            click.echo(f"    {w.vertex:<10} {_format_window(w)}  ({', '.join(w.sources)})")
    if scenario.provenance:
        click.echo()
        click.echo("  Defaults and overrides:")
        for note in scenario.provenance:
            click.echo(f"    {note}")
    click.echo()


# ====================================================================
# Helpers
# ====================================================================

def _setup_logging(verbosity: int) -> None:
    from rich.logging import RichHandler

    level = logging.WARNING
    if verbosity == 1:
        level = logging.INFO
    elif verbosity >= 2:
        level = logging.DEBUG
    logging.basicConfig(
        level=level,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(show_path=False)],
        force=True,
    )


def _resolve_scenario(ref: str | None) -> Path | None:
    """A scenario reference is either a file path or a packaged fixture name."""
    if ref is None:
        return None
    path = Path(ref).expanduser()
    if path.is_file():
        return path
    if ref in fixture_names():
        return fixture_path(ref)
    raise click.BadParameter(
        f"'{ref}' is neither a file nor a fixture ({', '.join(fixture_names())})",
        param_hint="'--scenario'",
    )


def _load_config(ctx, config, **overrides) -> RunConfig:
    overrides["verbosity"] = ctx.obj.get("verbosity", 0) if ctx.obj else 0
    try:
        return RunConfig.load(config or None, **overrides)
    except (ValueError, TypeError) as exc:
        raise click.UsageError(f"Invalid configuration: {exc}") from exc
    except FileNotFoundError as exc:
        raise click.UsageError(str(exc)) from exc


def _load(cfg: RunConfig) -> Scenario:
    try:
        scenario = load_scenario(cfg.scenario)
        return scenario.with_overrides(**cfg.scenario_overrides())
    except FileNotFoundError as exc:
        raise click.UsageError(str(exc)) from exc
    except ScenarioError as exc:
        check = f" [{exc.check}]" if exc.check else ""
        raise click.UsageError(f"Invalid scenario {cfg.scenario}{check}: {exc}") from exc
    except ValueError as exc:
        raise click.UsageError(f"Invalid override: {exc}") from exc


def _format_window(w) -> str:
    parts = []
    if w.entry_min is not None or w.entry_max is not None:
        parts.append(f"entry [{_bound(w.entry_min)}, {_bound(w.entry_max)}]")
    if w.exit_min is not None or w.exit_max is not None:
        parts.append(f"exit [{_bound(w.exit_min)}, {_bound(w.exit_max)}]")
    if w.max_dwell is not None:
        parts.append(f"dwell <= {w.max_dwell:g}")
    return ", ".join(parts) or "unconstrained"


def _bound(value: float | None) -> str:
    return "-" if value is None else f"{value:.3f}"


def _print_infeasible(exc: InfeasibleError) -> None:
    click.secho(f"Infeasible: {exc}", fg="red")
    for label, residuals in exc.diagnostics.items():
        top = ", ".join(f"{family} {value:.3g}" for family, value in list(residuals.items())[:3])
        click.echo(f"  {label}: {top or 'no residual'}")


def _print_report(report) -> None:
    dist = "n/a (no obstacles)" if report.closest_obstacle is None else (
        f"{report.min_distance:.3f} m to {report.closest_obstacle} at t={report.min_distance_time:.2f} s"
    )
    v_lo, v_hi = report.speed_range
    click.echo(f"  Min distance:   {dist}")
    click.echo(f"  Speed range:    {v_lo:.2f} .. {v_hi:.2f} m/s")
    click.echo(f"  Max |a_T|:      {report.max_accel_tangential:.2f} m/s^2")
    click.echo(f"  Max |a_N|:      {report.max_accel_normal:.2f} m/s^2")
    steer = report.max_steering
    click.echo(f"  Max |delta|:    {'n/a' if steer is None else f'{steer:.4f} rad'}")
    if report.rollout is not None:
        click.echo(f"  Rollout drift:  {report.rollout.max_deviation:.3f} m")
    for t, v in report.speed_violations[:5]:
        click.echo(f"    speed {v:.3f} m/s at t={t:.2f} s")
    if len(report.speed_violations) > 5:
        click.echo(f"    ... {len(report.speed_violations) - 5} more")
    for failure in report.failures:
        click.secho(f"  ✗ {failure}", fg="red")


def _check_lower_bound(result) -> list[str]:
    """The relaxation objective must not exceed any exactly solved path objective."""
    if result.lower_bound is None:
        return []
    problems = []
    for outcome in result.candidates:
        if not outcome.feasible:
            continue
        slack = LOWER_BOUND_TOL * max(1.0, abs(outcome.objective))
        if result.lower_bound > outcome.objective + slack:
            problems.append(
                f"lower bound {result.lower_bound:.6g} exceeds the objective {outcome.objective:.6g} "
                f"of {outcome.label}"
            )
    return problems


def _run_plan(scenario: Scenario, cfg: RunConfig) -> int:
    """Plan, audit, write; returns the exit code."""
    from gcs_planner.planner import plan as plan_scenario
    from gcs_planner.results import write_result
    from gcs_planner.verify import audit

    click.echo(f"Planning {scenario.name} (strategy {cfg.strategy})...")
    try:
        result = plan_scenario(scenario, cfg.plan_options())
    except InfeasibleError as exc:
        _print_infeasible(exc)
        return EXIT_INFEASIBLE
    except PlannerError as exc:
        click.secho(f"Planning failed: {exc}", fg="red")
        return EXIT_FAILURE

    t = time.perf_counter()
    report = audit(result, scenario)
    result.timings["audit"] = time.perf_counter() - t
    report.failures.extend(_check_lower_bound(result))

    try:
        written = write_result(result, report, cfg.out_dir, scenario=scenario)
    except ResultWriteError as exc:
        click.secho(f"Could not write results: {exc}", fg="red")
        return EXIT_FAILURE

    click.echo()
    click.secho(f"  {scenario.name}", bold=True)
    click.echo(f"  Strategy:       {result.strategy}")
    click.echo(f"  Path:           {' > '.join(result.path)}")
    click.echo(f"  Objective:      {result.objective:.6g}")
    if result.lower_bound is not None:
        click.echo(f"  Lower bound:    {result.lower_bound:.6g}")
    if result.rounded_path is not None:
        rounded = next((c for c in result.candidates if c.path == result.rounded_path), None)
        if rounded is not None and rounded.feasible:
            click.echo(f"  Rounded path:   {' > '.join(rounded.path)} ({rounded.objective:.6g})")
    click.echo(f"  Duration:       {result.end_time - result.start_time:.3f} s")
    _print_report(report)
    click.echo("  Phase times:    " + ", ".join(
        f"{name} {seconds * 1000:.1f} ms" for name, seconds in result.timings.items()
    ))
    click.echo(f"  Output:         {written['result'].parent}")
    click.echo()

    if not report.passed:
        click.secho(f"Audit failed with {len(report.failures)} issue(s).", fg="red")
        return EXIT_AUDIT
    click.secho("  ✓ Plan feasible and collision-free", fg="green")
    return EXIT_OK


def _run_verify(result_path: Path, scenario: Scenario) -> int:
    from gcs_planner.results import read_result
    from gcs_planner.verify import audit

    try:
        stored = read_result(result_path)
    except (ScenarioError, ValueError) as exc:
        raise click.UsageError(f"Invalid result file: {exc}") from exc
    if stored.scenario != scenario.name:
        logger.warning("Result was planned for '%s', auditing against '%s'", stored.scenario, scenario.name)
    for vertex in stored.path:
        try:
            scenario.region(vertex)
        except KeyError:
            raise click.UsageError(f"Result visits region '{vertex}', which {scenario.name} does not define")

    try:
        report = audit(stored, scenario)
    except PlannerError as exc:
        click.secho(f"Audit could not run: {exc}", fg="red")
        return EXIT_AUDIT

    click.echo()
    click.secho(f"  Verifying {result_path} against {scenario.name}", bold=True)
    click.echo(f"  Path:           {' > '.join(stored.path)}")
    click.echo(f"  Objective:      {stored.objective:.6g}")
    _print_report(report)
    click.echo()
    if not report.passed:
        click.secho(f"Audit failed with {len(report.failures)} issue(s).", fg="red")
        return EXIT_AUDIT
    click.secho("  ✓ Stored trajectory passes the audit", fg="green")
    return EXIT_OK


def bench_stats(samples_ms) -> tuple[float, float]:
    """Mean and unbiased standard deviation; a single sample has zero spread."""
    samples = np.asarray(samples_ms, dtype=float)
    if samples.size < 2:
        return float(samples.mean()), 0.0
    return float(samples.mean()), float(samples.std(ddof=1))


def _run_bench(scenarios: list[Scenario], cfg: RunConfig, runs: int) -> dict[str, list[float]]:
    """Plan each scenario *runs* times in a seeded interleaved order."""
    from rich.console import Console
    from rich.progress import BarColumn, Progress, SpinnerColumn, TaskProgressColumn, TextColumn, TimeRemainingColumn
    from rich.table import Table

    from gcs_planner.planner import plan as plan_scenario

    options = cfg.plan_options()
    order = np.random.default_rng(cfg.seed).permutation(np.repeat(np.arange(len(scenarios)), runs))
    samples: dict[str, list[float]] = {s.name: [] for s in scenarios}
    failed: dict[str, int] = {s.name: 0 for s in scenarios}

    with Progress(
        SpinnerColumn(),
        TextColumn("[progress.description]{task.description}"),
        BarColumn(),
        TaskProgressColumn(),
        TimeRemainingColumn(),
    ) as progress:
        task = progress.add_task("Planning...", total=len(order))
        for i in order:
            scenario = scenarios[int(i)]
            # fresh copy so cached graph and windows are rebuilt inside the timed phase
            try:
                result = plan_scenario(replace(scenario), options)
                samples[scenario.name].append(result.timings["total"] * 1000.0)
            except PlannerError as exc:
                failed[scenario.name] += 1
                logger.warning("Bench run of %s failed: %s", scenario.name, exc)
            progress.update(task, advance=1, description=f"Planning {scenario.name}...")

    table = Table(title=f"Planning time over {runs} run(s), strategy {cfg.strategy}")
    table.add_column("Scenario")
    table.add_column("Runs", justify="right")
    table.add_column("Mean [ms]", justify="right")
    table.add_column("Std [ms]", justify="right")
    table.add_column("Reference GCS [ms]", justify="right")
    for s in scenarios:
        values = samples[s.name]
        ref = REFERENCE_MS.get(s.name)
        ref_text = f"{ref[0]:.1f} ± {ref[1]:.2f}" if ref else "-"
        if values:
            mean, std = bench_stats(values)
            table.add_row(s.name, str(len(values)), f"{mean:.2f}", f"{std:.2f}", ref_text)
        else:
            table.add_row(s.name, "0", "-", "-", ref_text)
    Console().print(table)
    for name, count in failed.items():
        if count:
            click.secho(f"  {name}: {count} run(s) failed", fg="yellow")
    return samples


def main():
    cli()


if __name__ == "__main__":
    main()
