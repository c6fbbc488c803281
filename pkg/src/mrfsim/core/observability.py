"""
mrfsim Observability Module

Structured logging setup, Prometheus counters for the expensive operations of the
pipeline and host information for benchmark reports.
"""

import logging
import platform
import sys
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from datetime import datetime
from typing import Any, Dict, Iterator, Optional

import psutil
import structlog
from prometheus_client import CollectorRegistry, Counter, Histogram, generate_latest

logger = structlog.get_logger(__name__)


@dataclass
class HostInfo:
    """Host description recorded next to benchmark timings."""
    hostname: str
    platform: str
    python_version: str
    cpu_count_logical: int
    cpu_count_physical: Optional[int]
    memory_total_gb: float
    timestamp: datetime = field(default_factory=datetime.now)

    @classmethod
    def collect(cls) -> "HostInfo":
        memory = psutil.virtual_memory()
        return cls(
            hostname=platform.node(),
            platform=platform.platform(),
            python_version=platform.python_version(),
            cpu_count_logical=psutil.cpu_count(logical=True) or 1,
            cpu_count_physical=psutil.cpu_count(logical=False),
            memory_total_gb=memory.total / (1024**3),
        )

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["timestamp"] = self.timestamp.isoformat()
        return data


class MetricsCollector:
    """Counts NUFFT calls, response precomputations and objective evaluations."""

    def __init__(self) -> None:
        self.registry = CollectorRegistry()

        self.nufft_operations = Counter(
            'mrfsim_nufft_operations_total', 'NUFFT forward/adjoint applications',
            ['direction'], registry=self.registry)
        self.srf_precomputations = Counter(
            'mrfsim_srf_precomputations_total', 'Spatial response set precomputations',
            registry=self.registry)
        self.objective_evaluations = Counter(
            'mrfsim_objective_evaluations_total', 'Optimizer objective evaluations',
            ['status'], registry=self.registry)
        self.epg_simulations = Counter(
            'mrfsim_epg_simulations_total', 'EPG signal simulations',
            registry=self.registry)
        self.stage_duration = Histogram(
            'mrfsim_stage_duration_seconds', 'Pipeline stage duration',
            ['stage'], registry=self.registry)

    def record_nufft(self, direction: str, count: int = 1) -> None:
        self.nufft_operations.labels(direction=direction).inc(count)

    def record_srf_precomputation(self) -> None:
        self.srf_precomputations.inc()

    def record_objective_evaluation(self, status: str) -> None:
        self.objective_evaluations.labels(status=status).inc()

    def record_epg_simulation(self, entries: int = 1) -> None:
        self.epg_simulations.inc(entries)

    def record_stage(self, stage: str, duration: float) -> None:
        self.stage_duration.labels(stage=stage).observe(duration)

    def count(self, name: str, **labels: str) -> float:
        """Current value of a sample, 0.0 if it was never recorded."""
        sample = self.registry.get_sample_value(name, labels or None)
        return float(sample) if sample is not None else 0.0

    def nufft_count(self) -> float:
        return (self.count('mrfsim_nufft_operations_total', direction='forward')
                + self.count('mrfsim_nufft_operations_total', direction='adjoint'))

    def get_prometheus_metrics(self) -> str:
        """Get metrics in Prometheus format."""
        return generate_latest(self.registry).decode('utf-8')


def configure_logging(log_level: str = "INFO", json_output: bool = False) -> None:
    """Route structlog to stderr so stdout stays free for command output."""
    level = logging.getLevelName(log_level.upper())
    logging.basicConfig(stream=sys.stderr, level=level, format="%(message)s")

    renderer: Any = (structlog.processors.JSONRenderer() if json_output
                     else structlog.dev.ConsoleRenderer(colors=False))
    structlog.configure(
        processors=[
            structlog.contextvars.merge_contextvars,
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            renderer,
        ],
        context_class=dict,
        logger_factory=lambda *args: structlog.PrintLogger(file=sys.stderr),
        wrapper_class=structlog.make_filtering_bound_logger(level),
        cache_logger_on_first_use=False,
    )


@contextmanager
def timed_stage(stage: str, **context: Any) -> Iterator[Dict[str, float]]:
    """Time a block, log it and record it in the stage histogram.

    Yields a dict whose ``seconds`` entry is filled in on exit.
    """
    timing: Dict[str, float] = {"seconds": 0.0}
    start = time.perf_counter()
    try:
        yield timing
    finally:
        timing["seconds"] = time.perf_counter() - start
        get_global_metrics().record_stage(stage, timing["seconds"])
        logger.info("Stage finished", stage=stage, seconds=round(timing["seconds"], 4), **context)


# Global metrics collector instance
_metrics_collector: Optional[MetricsCollector] = None


def get_global_metrics() -> MetricsCollector:
    """Get the global metrics collector instance."""
    global _metrics_collector
    if _metrics_collector is None:
        _metrics_collector = MetricsCollector()
    return _metrics_collector


def set_global_metrics(collector: Optional[MetricsCollector]) -> None:
    """Set (or reset with None) the global metrics collector instance."""
    global _metrics_collector
    _metrics_collector = collector
