"""
Acquisition schedules, EPG signal simulation and dictionaries
"""

from .dictionary import Dictionary, build_dictionary
from .epg import TissueSignal, simulate_signal, simulate_tissue_signals
from .schedule import SequenceSchedule, default_fisp_schedule

__all__ = [
    "Dictionary",
    "SequenceSchedule",
    "TissueSignal",
    "build_dictionary",
    "default_fisp_schedule",
    "simulate_signal",
    "simulate_tissue_signals",
]
