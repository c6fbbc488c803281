"""
mrfsim Suite

One object that turns a RunConfig into pipeline stages, used by the CLI and the benchmark
script.
"""

from typing import Dict, List, Literal, Optional, Sequence

import numpy as np
import structlog

from ..imaging.phantom import PhaseMap, TissuePhantom, make_eleven_tissue_phantom, make_three_tissue_phantom, \
    synthesize_phase_map
from ..imaging.spatial_response import NufftParams, SamplingMode, SpatialResponseCache, SpatialResponseSet
from ..imaging.trajectory import DensityProfile, SpiralSet, build_spiral_set
from ..mapping.cost import CostReport, compute_cost, compute_segment_rmse, quality_factor_hook
from ..mapping.matching import QuantMaps, match_series
from ..optimization.annealing import AnnealConfig, AnnealResult, anneal_restarts
from ..optimization.objective import ObjectiveContext, ScheduleObjective
from ..optimization.params import ScheduleParams, params_from_settings
from ..sequence.dictionary import Dictionary, build_dictionary, coarse_grid, grid_from_ranges, tissue_anchors
from ..sequence.epg import TissueSignal, simulate_tissue_signals
from ..sequence.schedule import SequenceSchedule, default_fisp_schedule
from ..simulation.simulator import ImageSeries, InterleafOrdering, simulate_conventional, simulate_fast
from .config import RunConfig
from .errors import error_boundary

logger = structlog.get_logger(__name__)


class MRFSimulationSuite:
    """
    Pipeline facade: every stage reads its settings from one RunConfig.
    """

    def __init__(self, config: Optional[RunConfig] = None):
        self.config = config or RunConfig()
        self.srf_cache = SpatialResponseCache(self.config.spatial_response.cache_dir)
        self.rng = np.random.default_rng(self.config.seed)
        logger.debug("Suite initialized", grid=self.config.grid.size, seed=self.config.seed)

    @property
    def nufft(self) -> NufftParams:
        return NufftParams(**self.config.nufft.model_dump())

    def build_phantom(self) -> TissuePhantom:
        settings = self.config.phantom
        if settings.kind == "eleven":
            return make_eleven_tissue_phantom(self.config.grid.size, settings.supersampling)
        return make_three_tissue_phantom(self.config.grid.size)

    def build_spiral_set(self) -> SpiralSet:
        t = self.config.trajectory
        profile = DensityProfile(gamma=t.gamma, pitch_inner=t.pitch_inner, pitch_outer=t.pitch_outer,
                                 readout_oversampling=t.readout_oversampling, readout_sampling=t.readout_sampling)
        return build_spiral_set(self.config.grid.size, t.n_interleaves, profile)

    def build_phase_map(self) -> Optional[PhaseMap]:
        phase = self.config.phase
        if not phase.enabled:
            return None
        return synthesize_phase_map(self.config.grid.size, phase.direction, (phase.range_min, phase.range_max))

    def default_schedule(self) -> SequenceSchedule:
        s = self.config.sequence
        return default_fisp_schedule(s.n_timepoints, s.flip_scale, s.inversion, s.ti_ms, s.rf_phase_mode)

    def tissue_signals(self, phantom: TissuePhantom, schedule: SequenceSchedule) -> List[TissueSignal]:
        s = self.config.sequence
        return simulate_tissue_signals(phantom.tissues, schedule, s.epg_state_cap, s.debug_checks)

    def build_dictionary(self, schedule: SequenceSchedule, grid: Literal["full", "coarse"] = "full",
                         phantom: Optional[TissuePhantom] = None) -> Dictionary:
        d = self.config.dictionary
        if grid == "coarse":
            t1, t2 = coarse_grid(d.coarse_t1_range, d.coarse_t1_count), coarse_grid(d.coarse_t2_range,
                                                                                    d.coarse_t2_count)
        else:
            t1, t2 = grid_from_ranges(d.t1_ranges), grid_from_ranges(d.t2_ranges)
        extra = tissue_anchors(phantom.tissues) if (phantom is not None and d.include_tissue_entries) else ()
        with error_boundary("build_dictionary", grid=grid):
            return build_dictionary(t1, t2, schedule, extra, d.chunk_size, self.config.threads,
                                    self.config.sequence.epg_state_cap)

    def spatial_responses(self, phantom: TissuePhantom, spiral_set: SpiralSet, phase_map: Optional[PhaseMap],
                          sampling: SamplingMode = "undersampled") -> SpatialResponseSet:
        with error_boundary("spatial_responses", sampling=sampling):
            return self.srf_cache.get_or_compute(phantom, spiral_set, phase_map,
                                                 self.config.spatial_response.dcf_mode, sampling, self.nufft,
                                                 self.config.threads)

    def simulate_fast(self, srf_set: SpatialResponseSet, signals: Sequence[TissueSignal],
                      schedule: SequenceSchedule, ordering: Optional[InterleafOrdering] = None) -> ImageSeries:
        return simulate_fast(srf_set, signals, ordering, self.config.noise.image_snr_db, self.rng,
                             self.config.threads, schedule.content_hash())

    def simulate_conventional(self, phantom: TissuePhantom, schedule: SequenceSchedule, spiral_set: SpiralSet,
                              phase_map: Optional[PhaseMap], ordering: Optional[InterleafOrdering] = None,
                              sampling: SamplingMode = "undersampled") -> ImageSeries:
        return simulate_conventional(phantom, schedule, spiral_set, phase_map, ordering,
                                     self.config.spatial_response.dcf_mode, sampling, self.nufft,
                                     threads=self.config.threads)

    def match(self, series: ImageSeries, dictionary: Dictionary) -> QuantMaps:
        m = self.config.matching
        with error_boundary("match", pixels=series.grid_size[0] * series.grid_size[1]):
            return match_series(series, dictionary, m.skip_threshold, m.chunk_size, self.config.threads)

    def cost(self, maps: QuantMaps, phantom: TissuePhantom, schedule: SequenceSchedule,
             dictionary: Optional[Dictionary] = None) -> CostReport:
        """Segment errors and total cost, with the quality-factor term when qf_weight > 0."""
        c = self.config.cost
        weights = {label: w for label, w in c.weights.items() if w > 0}
        errors = compute_segment_rmse(maps, phantom, labels=list(weights))
        qf = None
        if c.qf_weight > 0:
            signals = [s for s in self.tissue_signals(phantom, schedule) if s.label in weights]
            qf = quality_factor_hook(signals, dictionary)
        return compute_cost(errors, schedule, weights, c.time_ref_ms, c.formulation, qf, c.qf_weight)

    def objective_context(self, phantom: TissuePhantom, spiral_set: SpiralSet,
                          phase_map: Optional[PhaseMap]) -> ObjectiveContext:
        return ObjectiveContext.build(phantom, spiral_set, self.config, phase_map, self.srf_cache)

    def initial_params(self, schedule: Optional[SequenceSchedule] = None) -> ScheduleParams:
        o = self.config.optimizer
        return params_from_settings(schedule, o.n_segments, tuple(o.flip_bounds), tuple(o.tr_bounds),
                                    self.config.sequence.n_timepoints)

    def optimize(self, context: ObjectiveContext, initial: ScheduleParams) -> AnnealResult:
        config = AnnealConfig.from_settings(self.config.anneal, self.config.seed)
        objective = ScheduleObjective(context, "coarse")
        with error_boundary("optimize", iterations=config.max_iterations):
            return anneal_restarts(initial, objective, config, self.config.optimizer.restarts, self.config.threads)

    def final_report(self, context: ObjectiveContext, params: ScheduleParams) -> CostReport:
        """Winner scored against the full dictionary grid."""
        return ScheduleObjective(context, "full").evaluate(params)

    def summary(self) -> Dict[str, object]:
        return {"config": self.config.resolved(), "srf_cache": self.srf_cache.get_stats()}
