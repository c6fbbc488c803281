"""
mrfsim - Fast MR fingerprinting simulation

Pipeline stages:
- Tissue phantoms, background phase and variable-density spirals
- Per-tissue spatial responses precomputed with a gridding NUFFT
- EPG signal simulation, dictionary building and template matching
- Fast image-series synthesis and simulated-map cost
- Simulated annealing over flip-angle / TR schedules
"""

__version__ = "0.1.0"

from .core import MRFSimError, RunConfig, load_run_config
from .core.suite import MRFSimulationSuite

__all__ = [
    "MRFSimError",
    "MRFSimulationSuite",
    "RunConfig",
    "load_run_config",
]
