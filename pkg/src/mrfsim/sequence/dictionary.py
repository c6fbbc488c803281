"""
Matching dictionary over a (T1, T2) grid.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np
import structlog

from ..core.errors import InvalidArgumentError, TensorFormatError
from ..core.observability import timed_stage
from ..core.tensorfile import TensorFile
from ..imaging.phantom import TissueSpec
from .epg import simulate_epg
from .schedule import SequenceSchedule

logger = structlog.get_logger(__name__)

RangeTriple = Tuple[float, float, float]


@dataclass(frozen=True, eq=False)
class Dictionary:
    """Unit-norm signals with the (T1, T2) entry and original norm of each row."""
    entries: np.ndarray
    signals: np.ndarray
    norm_scale: np.ndarray
    schedule_hash: str

    def __post_init__(self) -> None:
        if self.entries.ndim != 2 or self.entries.shape[1] != 2:
            raise InvalidArgumentError("entries must have shape (E, 2)", details={"shape": list(self.entries.shape)})
        n = self.entries.shape[0]
        if self.signals.ndim != 2 or self.signals.shape[0] != n or self.norm_scale.shape != (n,):
            raise InvalidArgumentError("dictionary arrays disagree on the entry count",
                                       details={"entries": n, "signals": list(self.signals.shape),
                                                "norm_scale": list(self.norm_scale.shape)})

    @property
    def n_entries(self) -> int:
        return int(self.entries.shape[0])

    @property
    def n_timepoints(self) -> int:
        return int(self.signals.shape[1])

    @property
    def t1(self) -> np.ndarray:
        return self.entries[:, 0]

    @property
    def t2(self) -> np.ndarray:
        return self.entries[:, 1]

    def index_of(self, t1_ms: float, t2_ms: float) -> int:
        hits = np.flatnonzero((self.entries[:, 0] == t1_ms) & (self.entries[:, 1] == t2_ms))
        if hits.size == 0:
            raise InvalidArgumentError("entry is not in the dictionary", details={"t1_ms": t1_ms, "t2_ms": t2_ms})
        return int(hits[0])

    def save(self, path: Union[str, Path]) -> Path:
        meta = {"kind": "dictionary", "t1_list": self.t1.tolist(), "t2_list": self.t2.tolist(),
                "schedule_hash": self.schedule_hash, "n_timepoints": self.n_timepoints}
        return TensorFile(self.signals, meta=meta, blocks={"norm_scale": self.norm_scale}).save(path)


def load_dictionary(path: Union[str, Path]) -> Dictionary:
    tensor = TensorFile.load(path)
    tensor.require_meta("t1_list", "t2_list", "schedule_hash", "n_timepoints")
    signals = tensor.data
    if signals.ndim != 2 or not np.iscomplexobj(signals):
        raise TensorFormatError("Dictionary signals must be a complex (E, T) tensor", details={"shape": list(signals.shape)})
    entries = np.column_stack([np.asarray(tensor.meta["t1_list"], dtype=np.float64),
                               np.asarray(tensor.meta["t2_list"], dtype=np.float64)])
    if "norm_scale" not in tensor.blocks:
        raise TensorFormatError("Dictionary file is missing its norm_scale block")
    if entries.shape[0] != signals.shape[0] or signals.shape[1] != int(tensor.meta["n_timepoints"]):
        raise TensorFormatError("Dictionary header disagrees with its payload",
                                details={"entries": entries.shape[0], "shape": list(signals.shape)})
    try:
        return Dictionary(entries=entries, signals=signals.astype(np.complex128, copy=False),
                          norm_scale=tensor.blocks["norm_scale"].astype(np.float64, copy=False),
                          schedule_hash=str(tensor.meta["schedule_hash"]))
    except InvalidArgumentError as e:
        raise TensorFormatError(e.message, details=e.details)


def grid_from_ranges(ranges: Iterable[RangeTriple]) -> np.ndarray:
    """Concatenate inclusive ``start:step:stop`` ranges into one ascending grid."""
    pieces = []
    for start, step, stop in ranges:
        if step <= 0 or stop < start:
            raise InvalidArgumentError("ranges must have a positive step and stop >= start",
                                       details={"range": [start, step, stop]})
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        pieces.append(start + step * np.arange(count))
    if not pieces:
        raise InvalidArgumentError("at least one range is required")
    return np.unique(np.round(np.concatenate(pieces), 9))


def coarse_grid(value_range: Tuple[float, float], count: int) -> np.ndarray:
    """Log-spaced grid rounded to whole milliseconds."""
    lo, hi = value_range
    if not 0 < lo < hi or count < 2:
        raise InvalidArgumentError("coarse grid needs 0 < lo < hi and count >= 2",
                                   details={"range": [lo, hi], "count": count})
    return np.unique(np.round(np.geomspace(lo, hi, count)))


def _check_grid(values: np.ndarray, name: str) -> np.ndarray:
    if values.ndim != 1 or values.size == 0:
        raise InvalidArgumentError(f"{name} grid must be a nonempty vector")
    if np.any(np.diff(values) <= 0):
        raise InvalidArgumentError(f"{name} grid must be strictly ascending")
    if np.any(values <= 0) or not np.all(np.isfinite(values)):
        raise InvalidArgumentError(f"{name} grid values must be finite and positive")
    return values


def feasible_entries(t1_grid: Sequence[float], t2_grid: Sequence[float],
                     extra_entries: Iterable[Tuple[float, float]] = ()) -> np.ndarray:
    """Cartesian grid restricted to t2 <= t1, plus extra pairs, sorted by (t1, t2)."""
    t1 = _check_grid(np.asarray(t1_grid, dtype=np.float64), "t1")
    t2 = _check_grid(np.asarray(t2_grid, dtype=np.float64), "t2")
    t1_mesh, t2_mesh = np.meshgrid(t1, t2, indexing="ij")
    pairs = np.column_stack([t1_mesh.ravel(), t2_mesh.ravel()])

    extra = np.asarray(list(extra_entries), dtype=np.float64).reshape(-1, 2)
    if extra.size and np.any(extra <= 0):
        raise InvalidArgumentError("extra entries must have positive relaxation times")
    pairs = np.vstack([pairs, extra])
    pairs = pairs[pairs[:, 1] <= pairs[:, 0]]
    if pairs.shape[0] == 0:
        raise InvalidArgumentError("no (t1, t2) pair satisfies t2 <= t1",
                                   details={"t1": [float(t1[0]), float(t1[-1])], "t2": [float(t2[0]), float(t2[-1])]})
    return np.unique(pairs, axis=0)


def tissue_anchors(tissues: Iterable[TissueSpec]) -> Tuple[Tuple[float, float], ...]:
    return tuple((t.t1_ms, t.t2_ms) for t in tissues if not t.is_void)


def build_dictionary(
    t1_grid: Sequence[float],
    t2_grid: Sequence[float],
    schedule: SequenceSchedule,
    extra_entries: Iterable[Tuple[float, float]] = (),
    chunk_size: int = 512,
    threads: int = 1,
    max_states: Optional[int] = None,
) -> Dictionary:
    """Simulate and normalize every feasible entry.

    Chunks are simulated concurrently into disjoint rows, so the result does not depend on
    ``threads``.
    """
    if chunk_size < 1:
        raise InvalidArgumentError("chunk_size must be positive", details={"chunk_size": chunk_size})
    entries = feasible_entries(t1_grid, t2_grid, extra_entries)
    n_entries = entries.shape[0]
    signals = np.empty((n_entries, schedule.n_timepoints), dtype=np.complex128)

    def fill(start: int) -> None:
        stop = min(start + chunk_size, n_entries)
        signals[start:stop] = simulate_epg(entries[start:stop, 0], entries[start:stop, 1], schedule,
                                           max_states=max_states)

    with timed_stage("dictionary", entries=n_entries, n_timepoints=schedule.n_timepoints):
        with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
            list(pool.map(fill, range(0, n_entries, chunk_size)))

    norms = np.linalg.norm(signals, axis=1)
    if np.any(norms == 0):
        raise InvalidArgumentError("schedule produces zero signal for some entries",
                                   details={"zero_entries": int(np.sum(norms == 0))})
    signals /= norms[:, None]
    signals.setflags(write=False)
    norms.setflags(write=False)
    entries.setflags(write=False)

    logger.info("Dictionary built", entries=n_entries, n_timepoints=schedule.n_timepoints,
                schedule_hash=schedule.content_hash())
    return Dictionary(entries=entries, signals=signals, norm_scale=norms, schedule_hash=schedule.content_hash())
