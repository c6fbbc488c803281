"""
Sequence cost evaluated through the fast simulator.

The context owns the spatial responses, which are computed once and shared by every
candidate; an objective call simulates signals, rebuilds the (coarse) dictionary for the
candidate schedule, synthesizes the undersampled series and scores the matched maps.
"""

from dataclasses import dataclass, field, replace
from typing import Dict, Literal, Mapping, Optional, Tuple

import numpy as np
import structlog

from ..core.config import RunConfig
from ..core.errors import MRFSimError
from ..core.observability import get_global_metrics
from ..imaging.phantom import PhaseMap, TissuePhantom, canonical_phase_maps, synthesize_phase_map
from ..imaging.spatial_response import (
    NufftParams,
    SpatialResponseCache,
    SpatialResponseSet,
)
from ..imaging.trajectory import SpiralSet
from ..mapping.cost import CostReport, compute_cost, compute_segment_rmse, quality_factor_hook
from ..mapping.matching import match_series
from ..sequence.dictionary import build_dictionary, coarse_grid, grid_from_ranges, tissue_anchors
from ..sequence.epg import simulate_tissue_signals
from ..simulation.simulator import InterleafOrdering, simulate_fast
from .params import ScheduleParams

logger = structlog.get_logger(__name__)

GridName = Literal["coarse", "full"]


@dataclass(frozen=True, eq=False)
class ObjectiveContext:
    """Everything an objective call needs besides the candidate parameters."""
    phantom: TissuePhantom
    spiral_set: SpiralSet
    srf_set: SpatialResponseSet
    config: RunConfig
    phase_map: Optional[PhaseMap] = None
    ordering: InterleafOrdering = field(default_factory=InterleafOrdering)
    srf_cache: SpatialResponseCache = field(default_factory=SpatialResponseCache)

    @classmethod
    def build(cls, phantom: TissuePhantom, spiral_set: SpiralSet, config: RunConfig,
              phase_map: Optional[PhaseMap] = None, srf_cache: Optional[SpatialResponseCache] = None,
              ordering: Optional[InterleafOrdering] = None) -> "ObjectiveContext":
        cache = srf_cache or SpatialResponseCache(config.spatial_response.cache_dir)
        srf_set = cache.get_or_compute(phantom, spiral_set, phase_map, config.spatial_response.dcf_mode,
                                       "undersampled", NufftParams(**config.nufft.model_dump()), config.threads)
        return cls(phantom=phantom, spiral_set=spiral_set, srf_set=srf_set, config=config, phase_map=phase_map,
                   ordering=ordering or InterleafOrdering(), srf_cache=cache)

    def dictionary_grid(self, grid: GridName = "coarse") -> Tuple[np.ndarray, np.ndarray]:
        settings = self.config.dictionary
        if grid == "coarse":
            return (coarse_grid(settings.coarse_t1_range, settings.coarse_t1_count),
                    coarse_grid(settings.coarse_t2_range, settings.coarse_t2_count))
        return grid_from_ranges(settings.t1_ranges), grid_from_ranges(settings.t2_ranges)

    def with_phase(self, phase_map: Optional[PhaseMap]) -> "ObjectiveContext":
        """Same context under another background phase (responses from the shared cache)."""
        srf_set = self.srf_cache.get_or_compute(self.phantom, self.spiral_set, phase_map,
                                                self.config.spatial_response.dcf_mode, "undersampled",
                                                NufftParams(**self.config.nufft.model_dump()), self.config.threads)
        return replace(self, phase_map=phase_map, srf_set=srf_set)


class ScheduleObjective:
    """Callable cost of a ScheduleParams candidate."""

    def __init__(self, context: ObjectiveContext, grid: GridName = "coarse"):
        self.context = context
        self.grid = grid
        self._t1_grid, self._t2_grid = context.dictionary_grid(grid)
        cost = context.config.cost
        self.weights = {label: w for label, w in cost.weights.items() if w > 0}
        self.extra_entries = (tissue_anchors(context.phantom.tissues)
                              if context.config.dictionary.include_tissue_entries else ())

    def __call__(self, params: ScheduleParams) -> float:
        return self.evaluate(params).total_cost

    def evaluate(self, params: ScheduleParams) -> CostReport:
        context, config = self.context, self.context.config
        metrics = get_global_metrics()
        try:
            schedule = params.expand()
            signals = simulate_tissue_signals(context.phantom.tissues, schedule,
                                              max_states=config.sequence.epg_state_cap)
            dictionary = build_dictionary(self._t1_grid, self._t2_grid, schedule, self.extra_entries,
                                          chunk_size=config.dictionary.chunk_size, threads=config.threads,
                                          max_states=config.sequence.epg_state_cap)
            series = simulate_fast(context.srf_set, signals, context.ordering, threads=config.threads,
                                   schedule_hash=schedule.content_hash())
            maps = match_series(series, dictionary, config.matching.skip_threshold, config.matching.chunk_size,
                                config.threads)
            errors = compute_segment_rmse(maps, context.phantom, labels=list(self.weights))
            qf = None
            if config.cost.qf_weight > 0:
                qf = quality_factor_hook([s for s in signals if s.label in self.weights], dictionary)
            report = compute_cost(errors, schedule, self.weights, config.cost.time_ref_ms,
                                  config.cost.formulation, qf, config.cost.qf_weight)
        except MRFSimError:
            metrics.record_objective_evaluation("error")
            raise
        metrics.record_objective_evaluation("ok")
        report.extra.update({"grid": self.grid, "schedule_hash": schedule.content_hash(),
                             "dictionary_entries": dictionary.n_entries})
        return report


def direction_phase_maps(context: ObjectiveContext,
                         directions: Optional[Mapping[str, Tuple[float, float]]] = None) -> Dict[str, PhaseMap]:
    phase = context.config.phase
    grid = context.phantom.grid_size
    if directions is None:
        return canonical_phase_maps(grid, (phase.range_min, phase.range_max))
    return {name: replace(synthesize_phase_map(grid, direction, (phase.range_min, phase.range_max)), label=name)
            for name, direction in directions.items()}


def evaluate_phase_robustness(params: ScheduleParams, context: ObjectiveContext,
                              directions: Optional[Mapping[str, Tuple[float, float]]] = None,
                              grid: GridName = "coarse") -> Dict[str, CostReport]:
    """Cost of one schedule under each background-phase direction."""
    reports: Dict[str, CostReport] = {}
    for name, phase_map in direction_phase_maps(context, directions).items():
        reports[name] = ScheduleObjective(context.with_phase(phase_map), grid).evaluate(params)
        logger.info("Phase direction evaluated", direction=name, total_cost=reports[name].total_cost)
    return reports