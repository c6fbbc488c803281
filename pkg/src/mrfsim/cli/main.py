"""
mrfsim CLI - file-based pipeline stages
"""

import functools
import json
import math
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Any, Callable, Dict, Optional

import click
import numpy as np
from rich.console import Console
from rich.table import Table

from ..core.config import CONFIG_PATH_ENV, RunConfig, load_run_config
from ..core.errors import USAGE_ERRORS, CacheInvalidError, MRFSimError
from ..core.observability import configure_logging, get_global_metrics
from ..core.suite import MRFSimulationSuite
from ..core.tensorfile import TensorFile
from ..imaging.phantom import CANONICAL_DIRECTIONS, load_phantom, load_phase_map, synthesize_phase_map
from ..imaging.spatial_response import load_spatial_responses, save_spatial_responses
from ..imaging.trajectory import load_spiral_set, nyquist_gap
from ..mapping.matching import load_quant_maps
from ..optimization.annealing import write_trace
from ..optimization.objective import evaluate_phase_robustness
from ..sequence.dictionary import load_dictionary
from ..sequence.schedule import load_schedule
from ..simulation.benchmark import benchmark
from ..simulation.simulator import InterleafOrdering, load_image_series, simulate_gaussian_series
from .render import write_csv, write_pgm

console = Console()
err_console = Console(stderr=True)


def _stamp(path: Path, config: RunConfig) -> Path:
    """Embed the resolved run config in a written tensor file's header."""
    tensor = TensorFile.load(path)
    tensor.meta["run_config"] = config.resolved()
    return tensor.save(path)


def _write_json(data: Dict[str, Any], path: Path, config: RunConfig) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps({**data, "run_config": config.resolved()}, indent=2), encoding="utf-8")
    return path


def _suite(ctx: click.Context, **overrides: Any) -> MRFSimulationSuite:
    """Suite for this invocation; section overrides are given as {section: {key: value}}."""
    merged = dict(ctx.obj["overrides"])
    for section, values in overrides.items():
        values = {k: v for k, v in values.items() if v is not None}
        if values:
            merged[section] = {**merged.get(section, {}), **values}
    return MRFSimulationSuite(load_run_config(ctx.obj["config_path"], merged))


def handle_errors(command: Callable[..., None]) -> Callable[..., None]:
    """Report MRFSimError on stderr; usage errors exit 2, the rest exit 1."""
    @functools.wraps(command)
    def wrapper(*args: Any, **kwargs: Any) -> None:
        try:
            command(*args, **kwargs)
        except MRFSimError as e:
            err_console.print(f"[red]ERROR[/red] {e.error_code}: {e.message}")
            if e.details:
                err_console.print(json.dumps(e.details, default=str))
            sys.exit(2 if isinstance(e, USAGE_ERRORS) else 1)
    return wrapper


@click.group()
@click.option('--config', '-c', 'config_path', type=click.Path(dir_okay=False),
              help=f'YAML/JSON run config (default: ${CONFIG_PATH_ENV})')
@click.option('--seed', type=int, default=None, help='Seed for every random draw')
@click.option('--threads', type=int, default=None, help='Worker threads')
@click.option('--log-level', default=None, help='DEBUG, INFO, WARNING, ERROR')
@click.option('--json-logs', is_flag=True, help='Emit JSON log lines on stderr')
@click.pass_context
def main(ctx, config_path: Optional[str], seed: Optional[int], threads: Optional[int], log_level: Optional[str],
         json_logs: bool) -> None:
    """mrfsim - fast MR fingerprinting simulation, matching and sequence optimization"""
    ctx.ensure_object(dict)
    overrides = {k: v for k, v in {"seed": seed, "threads": threads, "log_level": log_level}.items() if v is not None}
    ctx.obj["config_path"] = config_path
    ctx.obj["overrides"] = overrides
    try:
        config = load_run_config(config_path, overrides)
    except MRFSimError as e:
        err_console.print(f"[red]ERROR[/red] {e.error_code}: {e.message}")
        sys.exit(2)
    configure_logging(config.log_level, json_logs)


@main.command()
@click.option('--out', '-o', required=True, type=click.Path(dir_okay=False), help='Phantom tensor file')
@click.option('--kind', type=click.Choice(['three', 'eleven']), default=None)
@click.option('--grid', type=int, default=None, help='Matrix size')
@click.option('--phase-out', type=click.Path(dir_okay=False), help='Also write the background phase map')
@click.option('--direction', type=click.Choice(sorted(CANONICAL_DIRECTIONS)), default=None,
              help='Phase direction (default: config)')
@click.pass_context
@handle_errors
def phantom(ctx, out: str, kind: Optional[str], grid: Optional[int], phase_out: Optional[str],
            direction: Optional[str]) -> None:
    """Build a tissue phantom (and optionally its phase map)"""
    suite = _suite(ctx, grid={"size": grid}, phantom={"kind": kind})
    built = suite.build_phantom()
    _stamp(built.save(out), suite.config)
    console.print(f"[green]SUCCESS[/green] phantom {built.labels} {built.grid_size} -> {out}")

    if phase_out:
        phase = suite.config.phase
        vector = CANONICAL_DIRECTIONS[direction] if direction else phase.direction
        phase_map = synthesize_phase_map(suite.config.grid.size, vector, (phase.range_min, phase.range_max))
        _stamp(phase_map.save(phase_out), suite.config)
        console.print(f"[green]SUCCESS[/green] phase map -> {phase_out}")


@main.command()
@click.option('--out', '-o', required=True, type=click.Path(dir_okay=False))
@click.option('--grid', type=int, default=None)
@click.option('--interleaves', type=int, default=None)
@click.pass_context
@handle_errors
def traj(ctx, out: str, grid: Optional[int], interleaves: Optional[int]) -> None:
    """Generate spiral interleaves with density compensation"""
    suite = _suite(ctx, grid={"size": grid}, trajectory={"n_interleaves": interleaves})
    spiral_set = suite.build_spiral_set()
    _stamp(spiral_set.save(out), suite.config)
    gap = nyquist_gap(spiral_set) * spiral_set.matrix_size
    console.print(f"[green]SUCCESS[/green] {spiral_set.n_interleaves} interleaves x {spiral_set.readout_len} "
                  f"samples, union gap {gap:.3f}/N -> {out}")


@main.command()
@click.option('--phantom', 'phantom_path', required=True, type=click.Path(exists=True, dir_okay=False))
@click.option('--spirals', 'spirals_path', required=True, type=click.Path(exists=True, dir_okay=False))
@click.option('--phase', 'phase_path', type=click.Path(exists=True, dir_okay=False))
@click.option('--sampling', type=click.Choice(['undersampled', 'full']), default='undersampled')
@click.option('--cache-dir', type=click.Path(file_okay=False), default=None)
@click.option('--out', '-o', required=True, type=click.Path(dir_okay=False))
@click.pass_context
@handle_errors
def srf(ctx, phantom_path: str, spirals_path: str, phase_path: Optional[str], sampling: str,
        cache_dir: Optional[str], out: str) -> None:
    """Precompute spatial responses for every tissue and interleaf"""
    suite = _suite(ctx, spatial_response={"cache_dir": cache_dir})
    phantom_ = load_phantom(phantom_path)
    phase_map = load_phase_map(phase_path) if phase_path else None
    srf_set = suite.spatial_responses(phantom_, load_spiral_set(spirals_path), phase_map, sampling)
    _stamp(save_spatial_responses(srf_set, out), suite.config)
    console.print(f"[green]SUCCESS[/green] {len(srf_set)} spatial responses (key {srf_set.metadata.key()}) -> {out}")


@main.command()
@click.option('--out', '-o', required=True, type=click.Path(dir_okay=False))
@click.option('--n', 'n_timepoints', type=int, default=None)
@click.pass_context
@handle_errors
def schedule(ctx, out: str, n_timepoints: Optional[int]) -> None:
    """Write the default FISP schedule as JSON"""
    suite = _suite(ctx, sequence={"n_timepoints": n_timepoints})
    built = suite.default_schedule()
    _write_json(built.to_dict(), Path(out), suite.config)
    console.print(f"[green]SUCCESS[/green] {built.n_timepoints} timepoints, scan time "
                  f"{built.scan_time_ms / 1000:.2f} s -> {out}")


@main.command('dict')
@click.option('--schedule', 'schedule_path', required=True, type=click.Path(exists=True, dir_okay=False))
@click.option('--phantom', 'phantom_path', type=click.Path(exists=True, dir_okay=False),
              help='Add the phantom tissues as exact entries')
@click.option('--grid', type=click.Choice(['full', 'coarse']), default='full')
@click.option('--out', '-o', required=True, type=click.Path(dir_okay=False))
@click.pass_context
@handle_errors
def dict_(ctx, schedule_path: str, phantom_path: Optional[str], grid: str, out: str) -> None:
    """Build the matching dictionary for a schedule"""
    suite = _suite(ctx)
    phantom_ = load_phantom(phantom_path) if phantom_path else None
    dictionary = suite.build_dictionary(load_schedule(schedule_path), grid, phantom_)
    _stamp(dictionary.save(out), suite.config)
    console.print(f"[green]SUCCESS[/green] {dictionary.n_entries} entries x {dictionary.n_timepoints} -> {out}")


@main.command()
@click.option('--method', type=click.Choice(['fast', 'conventional', 'gaussian']), default='fast')
@click.option('--schedule', 'schedule_path', required=True, type=click.Path(exists=True, dir_okay=False))
@click.option('--phantom', 'phantom_path', required=True, type=click.Path(exists=True, dir_okay=False))
@click.option('--srf', 'srf_path', type=click.Path(exists=True, dir_okay=False), help='Responses (fast)')
@click.option('--spirals', 'spirals_path', type=click.Path(exists=True, dir_okay=False), help='Spirals (conventional)')
@click.option('--phase', 'phase_path', type=click.Path(exists=True, dir_okay=False))
@click.option('--ordering', type=click.Choice(['linear', 'permuted', 'golden']), default='linear')
@click.option('--sampling', type=click.Choice(['undersampled', 'full']), default='undersampled')
@click.option('--snr-db', type=float, default=None, help='Gaussian model SNR (default: config)')
@click.option('--out', '-o', required=True, type=click.Path(dir_okay=False))
@click.pass_context
@handle_errors
def simulate(ctx, method: str, schedule_path: str, phantom_path: str, srf_path: Optional[str],
             spirals_path: Optional[str], phase_path: Optional[str], ordering: str, sampling: str,
             snr_db: Optional[float], out: str) -> None:
    """Synthesize an image series"""
    suite = _suite(ctx)
    schedule_ = load_schedule(schedule_path)
    phantom_ = load_phantom(phantom_path)
    signals = suite.tissue_signals(phantom_, schedule_)
    order = InterleafOrdering(ordering, suite.config.seed)

    if method == "fast":
        if not srf_path:
            raise click.UsageError("--srf is required for the fast method")
        srf_set = load_spatial_responses(srf_path)
        if srf_set.metadata.phantom_hash != phantom_.content_hash():
            raise CacheInvalidError("Spatial responses were built for another phantom",
                                    details={"srf": srf_set.metadata.phantom_hash, "phantom": phantom_.content_hash()})
        series = suite.simulate_fast(srf_set, signals, schedule_, order)
    elif method == "conventional":
        if not spirals_path:
            raise click.UsageError("--spirals is required for the conventional method")
        phase_map = load_phase_map(phase_path) if phase_path else None
        series = suite.simulate_conventional(phantom_, schedule_, load_spiral_set(spirals_path), phase_map,
                                             order, sampling)
    else:
        level = suite.config.noise.snr_db if snr_db is None else snr_db
        series = simulate_gaussian_series(phantom_, signals, level, suite.rng, schedule_.content_hash())

    _stamp(series.save(out), suite.config)
    console.print(f"[green]SUCCESS[/green] {method}: {series.n_timepoints} frames {series.grid_size} -> {out} "
                  f"(NUFFT calls: {int(get_global_metrics().nufft_count())})")


@main.command()
@click.option('--series', 'series_path', required=True, type=click.Path(exists=True, dir_okay=False))
@click.option('--dict', 'dict_path', required=True, type=click.Path(exists=True, dir_okay=False))
@click.option('--out', '-o', required=True, type=click.Path(dir_okay=False))
@click.pass_context
@handle_errors
def match(ctx, series_path: str, dict_path: str, out: str) -> None:
    """Match every pixel against the dictionary"""
    suite = _suite(ctx)
    dictionary = load_dictionary(dict_path)
    maps = suite.match(load_image_series(series_path), dictionary)
    _stamp(maps.save(out, dictionary.schedule_hash), suite.config)
    console.print(f"[green]SUCCESS[/green] matched {int(maps.match_mask.sum())} pixels -> {out}")


@main.command()
@click.option('--maps', 'maps_path', required=True, type=click.Path(exists=True, dir_okay=False))
@click.option('--phantom', 'phantom_path', required=True, type=click.Path(exists=True, dir_okay=False))
@click.option('--schedule', 'schedule_path', required=True, type=click.Path(exists=True, dir_okay=False))
@click.option('--out', '-o', type=click.Path(dir_okay=False), help='CostReport JSON')
@click.pass_context
@handle_errors
def cost(ctx, maps_path: str, phantom_path: str, schedule_path: str, out: Optional[str]) -> None:
    """Segment errors and total cost of a set of maps"""
    suite = _suite(ctx)
    report = suite.cost(load_quant_maps(maps_path), load_phantom(phantom_path), load_schedule(schedule_path))

    table = Table(title="Segment errors")
    table.add_column("Tissue", style="cyan")
    table.add_column("T1 rel. RMSE", style="magenta")
    table.add_column("T2 rel. RMSE", style="green")
    for label, error in report.errors.items():
        table.add_row(label, f"{error.rmse_t1_rel:.4f}", f"{error.rmse_t2_rel:.4f}")
    console.print(table)
    console.print(f"total cost {report.total_cost:.6g} (scan {report.scan_time_ms / 1000:.2f} s)")
    if out:
        _write_json(report.to_dict(), Path(out), suite.config)


@main.command()
@click.option('--phantom', 'phantom_path', required=True, type=click.Path(exists=True, dir_okay=False))
@click.option('--spirals', 'spirals_path', required=True, type=click.Path(exists=True, dir_okay=False))
@click.option('--phase', 'phase_path', type=click.Path(exists=True, dir_okay=False))
@click.option('--schedule', 'schedule_path', type=click.Path(exists=True, dir_okay=False),
              help='Starting schedule (default: box midpoint)')
@click.option('--iterations', type=int, default=None)
@click.option('--robustness/--no-robustness', default=True, help='Evaluate the winner under all 4 phase directions')
@click.option('--out-dir', required=True, type=click.Path(file_okay=False))
@click.pass_context
@handle_errors
def optimize(ctx, phantom_path: str, spirals_path: str, phase_path: Optional[str], schedule_path: Optional[str],
             iterations: Optional[int], robustness: bool, out_dir: str) -> None:
    """Anneal the schedule against the simulated-map cost"""
    suite = _suite(ctx, anneal={"max_iterations": iterations})
    out = Path(out_dir)
    phantom_ = load_phantom(phantom_path)
    phase_map = load_phase_map(phase_path) if phase_path else None
    context = suite.objective_context(phantom_, load_spiral_set(spirals_path), phase_map)
    initial = suite.initial_params(load_schedule(schedule_path) if schedule_path else None)

    result = suite.optimize(context, initial)
    best_schedule = result.best_params.expand()
    _write_json(best_schedule.to_dict(), out / "best_schedule.json", suite.config)
    write_trace(result.trace, out / "trace.csv", header={"best_cost": result.best_cost,
                                                         **(asdict(result.config) if result.config else {})})
    _write_json(suite.final_report(context, result.best_params).to_dict(), out / "cost_report.json", suite.config)
    if robustness:
        reports = evaluate_phase_robustness(result.best_params, context)
        _write_json({name: r.to_dict() for name, r in reports.items()}, out / "robustness.json", suite.config)
    console.print(f"[green]SUCCESS[/green] best cost {result.best_cost:.6g} from {result.initial_cost:.6g} "
                  f"-> {out}")


@main.command()
@click.option('--out', '-o', required=True, type=click.Path(dir_okay=False))
@click.option('--repetitions', type=int, default=3)
@click.option('--grid', type=int, default=None)
@click.option('--n', 'n_timepoints', type=int, default=None)
@click.option('--kind', type=click.Choice(['three', 'eleven']), default=None)
@click.pass_context
@handle_errors
def bench(ctx, out: str, repetitions: int, grid: Optional[int], n_timepoints: Optional[int],
          kind: Optional[str]) -> None:
    """Time the fast simulator against the conventional pipeline"""
    suite = _suite(ctx, grid={"size": grid}, sequence={"n_timepoints": n_timepoints}, phantom={"kind": kind})
    report = benchmark(suite.build_phantom(), suite.build_spiral_set(), suite.default_schedule(),
                       suite.build_phase_map(), repetitions, suite.config.spatial_response.dcf_mode, suite.nufft,
                       suite.config.threads, config={"run_config": suite.config.resolved()})
    report.save(out)
    console.print(f"fast {report.fast_ms:.1f} ms, conventional {report.conventional_ms:.1f} ms, "
                  f"speedup {report.speedup:.1f}x (precompute {report.precompute_ms:.1f} ms)")


@main.command()
@click.option('--maps', 'maps_path', required=True, type=click.Path(exists=True, dir_okay=False))
@click.option('--layer', type=click.Choice(['t1', 't2', 'm0', 'match_mask']), default='t1')
@click.option('--window', type=(float, float), required=True, help='Display window MIN MAX')
@click.option('--out-prefix', required=True, type=click.Path(dir_okay=False))
@click.pass_context
@handle_errors
def render(ctx, maps_path: str, layer: str, window, out_prefix: str) -> None:
    """Export one map layer as PGM and CSV"""
    if not all(math.isfinite(v) for v in window):
        raise click.BadParameter("window bounds must be finite", param_hint="--window")
    values = load_quant_maps(maps_path).layer(layer)
    pgm = write_pgm(values, out_prefix, window)
    csv_path = write_csv(values, Path(f"{out_prefix}.csv"))
    console.print(f"[green]SUCCESS[/green] {pgm} and {csv_path} (range {np.min(values):g}..{np.max(values):g})")


if __name__ == "__main__":
    main()
