"""
mrfsim Core Components
"""

from .config import RunConfig, load_run_config
from .errors import MRFSimError, error_boundary
from .observability import MetricsCollector, configure_logging, get_global_metrics

__all__ = [
    "MRFSimError",
    "MetricsCollector",
    "RunConfig",
    "configure_logging",
    "error_boundary",
    "get_global_metrics",
    "load_run_config",
]
