"""
Schedule parametrization and simulated annealing
"""

from .annealing import AnnealConfig, AnnealResult, anneal
from .params import ScheduleParams

__all__ = ["AnnealConfig", "AnnealResult", "ScheduleParams", "anneal"]
