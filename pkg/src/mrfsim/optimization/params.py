"""
Segment parameterization of a FISP schedule and the annealing neighbourhood.

A schedule is described by ``n_segments`` flip amplitudes and TR values. Flip angles are
interpolated through the segment centers with a monotone cubic (PCHIP), TR is held
constant within each segment.
"""

from dataclasses import dataclass, replace
from typing import Any, Dict, Optional, Tuple

import numpy as np
from scipy.interpolate import PchipInterpolator

from ..core.errors import InvalidArgumentError
from ..sequence.schedule import DEFAULT_TI_MS, InversionSpec, SequenceSchedule

Bounds = Tuple[float, float]


def _vector(values: Any, name: str) -> np.ndarray:
    array = np.array(values, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(array)):
        raise InvalidArgumentError(f"{name} must be finite")
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class ScheduleParams:
    flip_amp_deg: np.ndarray
    tr_base_ms: np.ndarray
    n_timepoints: int = 480
    flip_bounds: Bounds = (5.0, 70.0)
    tr_bounds: Bounds = (11.0, 15.0)
    inversion: bool = True
    ti_ms: float = DEFAULT_TI_MS

    def __post_init__(self) -> None:
        flip = _vector(self.flip_amp_deg, "flip_amp_deg")
        tr = _vector(self.tr_base_ms, "tr_base_ms")
        object.__setattr__(self, "flip_amp_deg", flip)
        object.__setattr__(self, "tr_base_ms", tr)
        if flip.size < 1 or flip.size != tr.size:
            raise InvalidArgumentError("flip and TR controls must be nonempty and equally long",
                                       details={"flip": flip.size, "tr": tr.size})
        if flip.size > self.n_timepoints:
            raise InvalidArgumentError("more segments than timepoints",
                                       details={"n_segments": flip.size, "n_timepoints": self.n_timepoints})
        f_lo, f_hi = self.flip_bounds
        t_lo, t_hi = self.tr_bounds
        if not (0 <= f_lo <= f_hi <= 90 and 0 < t_lo <= t_hi):
            raise InvalidArgumentError("invalid parameter bounds",
                                       details={"flip_bounds": list(self.flip_bounds), "tr_bounds": list(self.tr_bounds)})
        if np.any(flip < f_lo) or np.any(flip > f_hi) or np.any(tr < t_lo) or np.any(tr > t_hi):
            raise InvalidArgumentError("controls lie outside their bounds")

    @property
    def n_segments(self) -> int:
        return int(self.flip_amp_deg.size)

    @property
    def te_ms(self) -> float:
        return self.tr_bounds[0] / 2

    def with_controls(self, flip_amp_deg: np.ndarray, tr_base_ms: np.ndarray) -> "ScheduleParams":
        """Copy with new controls clamped to the bounds."""
        return replace(self, flip_amp_deg=np.clip(flip_amp_deg, *self.flip_bounds),
                       tr_base_ms=np.clip(tr_base_ms, *self.tr_bounds))

    def segment_centers(self) -> np.ndarray:
        edges = np.linspace(0.0, self.n_timepoints, self.n_segments + 1)
        return (edges[:-1] + edges[1:]) / 2 - 0.5

    def segment_of(self) -> np.ndarray:
        """Segment index of every timepoint."""
        return np.minimum(np.arange(self.n_timepoints) * self.n_segments // self.n_timepoints, self.n_segments - 1)

    def expand(self) -> SequenceSchedule:
        t = np.arange(self.n_timepoints, dtype=np.float64)
        if self.n_segments == 1:
            flip = np.full(self.n_timepoints, self.flip_amp_deg[0])
        else:
            flip = PchipInterpolator(self.segment_centers(), self.flip_amp_deg, extrapolate=True)(t)
        flip = np.clip(flip, *self.flip_bounds)
        tr = self.tr_base_ms[self.segment_of()]
        return SequenceSchedule(
            flip_deg=flip,
            tr_ms=tr,
            te_ms=np.full(self.n_timepoints, self.te_ms),
            inversion=InversionSpec(enabled=self.inversion, ti_ms=self.ti_ms),
            label=f"segments={self.n_segments}",
        )

    def as_unit_vector(self) -> np.ndarray:
        """Controls mapped to [0, 1] by their bounds (flips first, then TRs)."""
        def unit(values: np.ndarray, bounds: Bounds) -> np.ndarray:
            lo, hi = bounds
            return (values - lo) / (hi - lo) if hi > lo else np.zeros_like(values)
        return np.concatenate([unit(self.flip_amp_deg, self.flip_bounds), unit(self.tr_base_ms, self.tr_bounds)])

    def to_dict(self) -> Dict[str, Any]:
        return {
            "flip_amp_deg": self.flip_amp_deg.tolist(),
            "tr_base_ms": self.tr_base_ms.tolist(),
            "n_timepoints": self.n_timepoints,
            "flip_bounds": list(self.flip_bounds),
            "tr_bounds": list(self.tr_bounds),
            "inversion": self.inversion,
            "ti_ms": self.ti_ms,
        }

    @classmethod
    def from_schedule(cls, schedule: SequenceSchedule, n_segments: int = 48, flip_bounds: Bounds = (5.0, 70.0),
                      tr_bounds: Bounds = (11.0, 15.0)) -> "ScheduleParams":
        """Segment means of an existing schedule, clamped to the bounds."""
        n = schedule.n_timepoints
        if not 1 <= n_segments <= n:
            raise InvalidArgumentError("n_segments must lie in [1, n_timepoints]",
                                       details={"n_segments": n_segments, "n_timepoints": n})
        segment = np.minimum(np.arange(n) * n_segments // n, n_segments - 1)
        counts = np.bincount(segment, minlength=n_segments)
        flips = np.bincount(segment, weights=schedule.flip_deg, minlength=n_segments) / counts
        trs = np.bincount(segment, weights=schedule.tr_ms, minlength=n_segments) / counts
        return cls(
            flip_amp_deg=np.clip(flips, *flip_bounds),
            tr_base_ms=np.clip(trs, *tr_bounds),
            n_timepoints=n,
            flip_bounds=flip_bounds,
            tr_bounds=tr_bounds,
            inversion=schedule.inversion.enabled,
            ti_ms=schedule.inversion.ti_ms,
        )

    @classmethod
    def midpoint(cls, n_segments: int = 48, n_timepoints: int = 480, flip_bounds: Bounds = (5.0, 70.0),
                 tr_bounds: Bounds = (11.0, 15.0)) -> "ScheduleParams":
        return cls(
            flip_amp_deg=np.full(n_segments, sum(flip_bounds) / 2),
            tr_base_ms=np.full(n_segments, sum(tr_bounds) / 2),
            n_timepoints=n_timepoints,
            flip_bounds=flip_bounds,
            tr_bounds=tr_bounds,
        )


def propose(params: ScheduleParams, rng: np.random.Generator, step_scale: float,
            temperature_fraction: float = 1.0) -> ScheduleParams:
    """Gaussian step on one segment's flip amplitude, TR, or both, clamped to the bounds."""
    if step_scale < 0 or temperature_fraction < 0:
        raise InvalidArgumentError("step_scale and temperature_fraction must be nonnegative",
                                   details={"step_scale": step_scale, "temperature_fraction": temperature_fraction})
    segment = int(rng.integers(params.n_segments))
    target = int(rng.integers(3))
    flip = params.flip_amp_deg.copy()
    tr = params.tr_base_ms.copy()
    scale = step_scale * temperature_fraction
    if target in (0, 2):
        flip[segment] += rng.normal(0.0, scale * (params.flip_bounds[1] - params.flip_bounds[0]))
    if target in (1, 2):
        tr[segment] += rng.normal(0.0, scale * (params.tr_bounds[1] - params.tr_bounds[0]))
    return params.with_controls(flip, tr)


def params_from_settings(schedule: Optional[SequenceSchedule], n_segments: int, flip_bounds: Bounds,
                         tr_bounds: Bounds, n_timepoints: int) -> ScheduleParams:
    """Starting point: the given schedule's segment means, or the box midpoint."""
    if schedule is not None:
        return ScheduleParams.from_schedule(schedule, n_segments, flip_bounds, tr_bounds)
    return ScheduleParams.midpoint(n_segments, n_timepoints, flip_bounds, tr_bounds)
