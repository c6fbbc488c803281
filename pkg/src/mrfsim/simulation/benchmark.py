"""
Wall-clock comparison of the fast and conventional simulators.

Fast timings cover signal simulation plus the response-weighted sums; the one-off spatial
response precomputation is timed and reported separately.
"""

import json
import statistics
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Union

import structlog

from ..core.errors import InvalidArgumentError
from ..core.observability import HostInfo
from ..imaging.phantom import PhaseMap, TissuePhantom
from ..imaging.spatial_response import DcfMode, NufftParams, compute_spatial_responses
from ..imaging.trajectory import SpiralSet
from ..sequence.epg import simulate_tissue_signals
from ..sequence.schedule import SequenceSchedule
from .simulator import simulate_conventional, simulate_fast

logger = structlog.get_logger(__name__)


@dataclass
class BenchReport:
    fast_ms: float
    conventional_ms: float
    precompute_ms: float
    speedup: float
    repetitions: int
    fast_samples_ms: List[float] = field(default_factory=list)
    conventional_samples_ms: List[float] = field(default_factory=list)
    config: Dict[str, Any] = field(default_factory=dict)
    host: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")
        return path


def _time_ms(fn: Callable[[], Any]) -> float:
    start = time.perf_counter()
    fn()
    return (time.perf_counter() - start) * 1000.0


def benchmark(
    phantom: TissuePhantom,
    spiral_set: SpiralSet,
    schedule: SequenceSchedule,
    phase_map: Optional[PhaseMap] = None,
    repetitions: int = 3,
    dcf_mode: DcfMode = "scaled",
    nufft: Optional[NufftParams] = None,
    threads: int = 1,
    config: Optional[Dict[str, Any]] = None,
) -> BenchReport:
    """Median wall-clock of both simulators over ``repetitions`` runs with identical settings."""
    if repetitions < 1:
        raise InvalidArgumentError("repetitions must be positive", details={"repetitions": repetitions})
    nufft = nufft or NufftParams()

    holder: Dict[str, Any] = {}
    precompute_ms = _time_ms(lambda: holder.setdefault("srf", compute_spatial_responses(
        phantom, spiral_set, phase_map, dcf_mode, "undersampled", nufft, threads)))
    srf_set = holder["srf"]

    def run_fast() -> None:
        signals = simulate_tissue_signals(phantom.tissues, schedule)
        simulate_fast(srf_set, signals, threads=threads)

    def run_conventional() -> None:
        simulate_conventional(phantom, schedule, spiral_set, phase_map, dcf_mode=dcf_mode, nufft=nufft,
                              threads=threads)

    fast_samples = [_time_ms(run_fast) for _ in range(repetitions)]
    conventional_samples = [_time_ms(run_conventional) for _ in range(repetitions)]
    fast_ms = statistics.median(fast_samples)
    conventional_ms = statistics.median(conventional_samples)

    report = BenchReport(
        fast_ms=fast_ms,
        conventional_ms=conventional_ms,
        precompute_ms=precompute_ms,
        speedup=conventional_ms / fast_ms if fast_ms > 0 else float("inf"),
        repetitions=repetitions,
        fast_samples_ms=fast_samples,
        conventional_samples_ms=conventional_samples,
        config={"grid": list(phantom.grid_size), "n_timepoints": schedule.n_timepoints,
                "tissues": phantom.labels, "n_interleaves": spiral_set.n_interleaves,
                "dcf_mode": dcf_mode, "nufft": asdict(nufft), "threads": threads, **(config or {})},
        host=HostInfo.collect().to_dict(),
    )
    logger.info("Benchmark finished", fast_ms=round(fast_ms, 2), conventional_ms=round(conventional_ms, 2),
                precompute_ms=round(precompute_ms, 2), speedup=round(report.speedup, 2))
    return report
