"""
Fast versus conventional simulation timings across matrix sizes and phantoms.

    python benchmarks/benchmark_suite.py --sizes 64 128 256 --out bench-results
"""

import sys
from pathlib import Path

import click
from rich.console import Console
from rich.table import Table

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from mrfsim.core.config import load_run_config  # noqa: E402
from mrfsim.core.observability import configure_logging  # noqa: E402
from mrfsim.core.suite import MRFSimulationSuite  # noqa: E402
from mrfsim.simulation.benchmark import benchmark  # noqa: E402

console = Console()


@click.command()
@click.option('--config', '-c', 'config_path', type=click.Path(exists=True, dir_okay=False), default=None)
@click.option('--sizes', type=int, multiple=True, default=(64, 128, 256))
@click.option('--kinds', type=click.Choice(['three', 'eleven']), multiple=True, default=('three', 'eleven'))
@click.option('--n', 'n_timepoints', type=int, default=480)
@click.option('--repetitions', type=int, default=3)
@click.option('--out', type=click.Path(file_okay=False), default='bench-results')
def run_benchmark(config_path, sizes, kinds, n_timepoints, repetitions, out):
    configure_logging("WARNING")
    table = Table(title=f"Fast vs conventional ({n_timepoints} frames, median of {repetitions})")
    for column in ("Phantom", "Grid", "Precompute ms", "Fast ms", "Conventional ms", "Speedup"):
        table.add_column(column)

    for kind in kinds:
        for size in sizes:
            config = load_run_config(config_path, {"grid": {"size": size}, "phantom": {"kind": kind},
                                                   "sequence": {"n_timepoints": n_timepoints}})
            suite = MRFSimulationSuite(config)
            report = benchmark(suite.build_phantom(), suite.build_spiral_set(), suite.default_schedule(),
                               suite.build_phase_map(), repetitions, config.spatial_response.dcf_mode, suite.nufft,
                               config.threads, config={"run_config": config.resolved()})
            report.save(Path(out) / f"bench_{kind}_{size}.json")
            table.add_row(kind, str(size), f"{report.precompute_ms:.0f}", f"{report.fast_ms:.1f}",
                          f"{report.conventional_ms:.0f}", f"{report.speedup:.1f}x")

    console.print(table)


if __name__ == "__main__":
    run_benchmark()
