"""
Dictionary matching of pixel time courses to (T1, T2).

The best entry maximizes the magnitude of the complex inner product with the unit-norm
dictionary signals, which makes the match invariant to any complex scale of the pixel.
Ties resolve to the lowest entry index.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
import structlog

from ..core.errors import InvalidArgumentError, TensorFormatError
from ..core.observability import timed_stage
from ..core.tensorfile import TensorFile
from ..sequence.dictionary import Dictionary
from ..simulation.simulator import ImageSeries

logger = structlog.get_logger(__name__)

MAP_LAYERS = ("t1", "t2", "m0", "match_mask")


@dataclass(frozen=True)
class MatchResult:
    t1_ms: float
    t2_ms: float
    m0: float
    score: float
    index: int = -1

    @property
    def matched(self) -> bool:
        return self.index >= 0


@dataclass(frozen=True, eq=False)
class QuantMaps:
    """Matched T1/T2 (ms) and M0 per pixel; skipped pixels hold 0 and a false mask."""
    t1_map: np.ndarray
    t2_map: np.ndarray
    m0_map: np.ndarray
    match_mask: np.ndarray

    @property
    def grid_size(self) -> Tuple[int, int]:
        return int(self.t1_map.shape[0]), int(self.t1_map.shape[1])

    def layer(self, name: str) -> np.ndarray:
        layers = {"t1": self.t1_map, "t2": self.t2_map, "m0": self.m0_map,
                  "match_mask": self.match_mask.astype(np.float64)}
        if name not in layers:
            raise InvalidArgumentError(f"Unknown map layer: {name}", details={"layers": list(MAP_LAYERS)})
        return layers[name]

    def save(self, path: Union[str, Path], schedule_hash: Optional[str] = None) -> Path:
        data = np.stack([self.layer(name) for name in MAP_LAYERS])
        meta = {"kind": "quant_maps", "layers": list(MAP_LAYERS), "schedule_hash": schedule_hash}
        return TensorFile(data, meta=meta).save(path)


def load_quant_maps(path: Union[str, Path]) -> QuantMaps:
    tensor = TensorFile.load(path)
    tensor.require_meta("layers")
    data = tensor.data
    if tensor.meta["layers"] != list(MAP_LAYERS) or data.ndim != 3 or data.shape[0] != len(MAP_LAYERS):
        raise TensorFormatError("Quantitative map tensor must hold t1, t2, m0 and match_mask layers",
                                details={"layers": tensor.meta["layers"], "shape": list(data.shape)})
    if np.iscomplexobj(data):
        raise TensorFormatError("Quantitative maps must be real")
    return QuantMaps(t1_map=data[0].astype(np.float64), t2_map=data[1].astype(np.float64),
                     m0_map=data[2].astype(np.float64), match_mask=data[3] > 0.5)


def best_entries(signals: np.ndarray, dictionary: Dictionary) -> Tuple[np.ndarray, np.ndarray]:
    """Argmax entry and |<signal, entry>| for each row of ``signals``."""
    correlation = np.abs(signals @ dictionary.signals.conj().T)
    index = np.argmax(correlation, axis=1)
    return index, correlation[np.arange(signals.shape[0]), index]


def _check_length(n_timepoints: int, dictionary: Dictionary) -> None:
    if n_timepoints != dictionary.n_timepoints:
        raise InvalidArgumentError("signal length does not match the dictionary",
                                   details={"signal": n_timepoints, "dictionary": dictionary.n_timepoints})


def match_signal(signal: np.ndarray, dictionary: Dictionary) -> MatchResult:
    """Single time course; a zero signal is reported as skipped with score 0."""
    signal = np.asarray(signal, dtype=np.complex128).reshape(-1)
    _check_length(signal.size, dictionary)
    norm = float(np.linalg.norm(signal))
    if norm == 0:
        return MatchResult(t1_ms=0.0, t2_ms=0.0, m0=0.0, score=0.0)
    index, magnitude = best_entries(signal[None, :], dictionary)
    i = int(index[0])
    return MatchResult(
        t1_ms=float(dictionary.entries[i, 0]),
        t2_ms=float(dictionary.entries[i, 1]),
        m0=float(magnitude[0] / dictionary.norm_scale[i]),
        score=float(magnitude[0] / norm),
        index=i,
    )


def match_series(
    series: ImageSeries,
    dictionary: Dictionary,
    skip_threshold: float = 1e-3,
    chunk_size: int = 4096,
    threads: int = 1,
) -> QuantMaps:
    """Per-pixel dictionary match of an image series."""
    _check_length(series.n_timepoints, dictionary)
    if series.schedule_hash is not None and series.schedule_hash != dictionary.schedule_hash:
        raise InvalidArgumentError("image series and dictionary were built for different schedules",
                                   details={"series": series.schedule_hash, "dictionary": dictionary.schedule_hash})
    if chunk_size < 1 or skip_threshold < 0:
        raise InvalidArgumentError("chunk_size must be positive and skip_threshold nonnegative",
                                   details={"chunk_size": chunk_size, "skip_threshold": skip_threshold})

    signals = series.pixel_signals()
    norms = np.linalg.norm(signals, axis=1)
    active = np.flatnonzero((norms > 0) & (norms >= skip_threshold * norms.max(initial=0.0)))
    index = np.full(signals.shape[0], -1, dtype=np.int64)
    magnitude = np.zeros(signals.shape[0])

    def fill(start: int) -> None:
        pixels = active[start:start + chunk_size]
        index[pixels], magnitude[pixels] = best_entries(signals[pixels], dictionary)

    with timed_stage("match", pixels=int(active.size), entries=dictionary.n_entries):
        with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
            list(pool.map(fill, range(0, active.size, chunk_size)))

    matched = index >= 0
    safe = np.where(matched, index, 0)
    t1 = np.where(matched, dictionary.entries[safe, 0], 0.0)
    t2 = np.where(matched, dictionary.entries[safe, 1], 0.0)
    m0 = np.where(matched, magnitude / dictionary.norm_scale[safe], 0.0)

    shape = series.grid_size
    logger.debug("Series matched", matched=int(matched.sum()), skipped=int((~matched).sum()))
    return QuantMaps(t1_map=t1.reshape(shape), t2_map=t2.reshape(shape), m0_map=m0.reshape(shape),
                     match_mask=matched.reshape(shape))
