"""
Image-series synthesis: fast, conventional and Gaussian-noise models
"""

from .simulator import ImageSeries, InterleafOrdering, simulate_conventional, simulate_fast

__all__ = ["ImageSeries", "InterleafOrdering", "simulate_conventional", "simulate_fast"]
