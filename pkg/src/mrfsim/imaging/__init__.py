"""
Phantoms, spiral trajectories, gridding NUFFT and spatial responses
"""

from .phantom import PhaseMap, TissuePhantom, TissueSpec
from .spatial_response import SpatialResponseCache, SpatialResponseSet, compute_spatial_responses
from .trajectory import SpiralSet, build_spiral_set

__all__ = [
    "PhaseMap",
    "SpatialResponseCache",
    "SpatialResponseSet",
    "SpiralSet",
    "TissuePhantom",
    "TissueSpec",
    "build_spiral_set",
    "compute_spatial_responses",
]
