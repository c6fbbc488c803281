"""
Template matching and map-error cost
"""

from .cost import CostReport, compute_cost, compute_segment_rmse
from .matching import QuantMaps, match_series

__all__ = ["CostReport", "QuantMaps", "compute_cost", "compute_segment_rmse", "match_series"]
