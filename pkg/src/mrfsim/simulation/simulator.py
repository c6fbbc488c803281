"""
Image-series synthesis.

``simulate_fast`` forms every frame as the tissue-signal weighted sum of precomputed spatial
responses and never touches k-space. ``simulate_conventional`` runs the full per-frame
pipeline (compose, forward NUFFT, interleaf selection, gridding) and is the oracle the
fast path must agree with.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import structlog

from ..core.errors import InvalidArgumentError, TensorFormatError
from ..core.observability import timed_stage
from ..core.tensorfile import TensorFile
from ..imaging.nufft import forward
from ..imaging.phantom import PhaseMap, TissuePhantom
from ..imaging.spatial_response import (
    DcfMode,
    NufftParams,
    ReconstructionOperators,
    SamplingMode,
    SpatialResponseSet,
    check_geometry,
)
from ..imaging.trajectory import SpiralSet
from ..sequence.epg import TissueSignal, simulate_tissue_signals
from ..sequence.schedule import SequenceSchedule
from .noise import add_image_noise, complex_gaussian

logger = structlog.get_logger(__name__)

ORDERINGS = ("linear", "permuted", "golden")


@dataclass(frozen=True)
class InterleafOrdering:
    """Maps frame index t to the interleaf acquired at t."""
    name: str = "linear"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.name not in ORDERINGS:
            raise InvalidArgumentError("Unknown interleaf ordering", details={"ordering": self.name,
                                                                               "known": list(ORDERINGS)})

    def indices(self, n_timepoints: int, n_interleaves: int) -> np.ndarray:
        if n_interleaves < 1:
            raise InvalidArgumentError("n_interleaves must be positive")
        t = np.arange(n_timepoints)
        if self.name == "linear":
            return t % n_interleaves
        if self.name == "golden":
            return (t * golden_step(n_interleaves)) % n_interleaves
        cycle = np.random.default_rng(self.seed).permutation(n_interleaves)
        return cycle[t % n_interleaves]

    def to_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "seed": self.seed}


def golden_step(n_interleaves: int) -> int:
    """Interleaf increment closest to n / golden ratio that is coprime with n."""
    target = n_interleaves / ((1 + math.sqrt(5)) / 2)
    candidates = sorted(range(1, n_interleaves + 1), key=lambda s: (abs(s - target), s))
    return next(s for s in candidates if math.gcd(s, n_interleaves) == 1)


def linear_ordering() -> InterleafOrdering:
    return InterleafOrdering("linear")


def permuted_ordering(seed: int = 0) -> InterleafOrdering:
    return InterleafOrdering("permuted", seed)


def golden_angle_ordering() -> InterleafOrdering:
    return InterleafOrdering("golden")


@dataclass(frozen=True, eq=False)
class ImageSeries:
    """Complex frames (T, rows, cols) with the interleaf acquired at each frame."""
    frames: np.ndarray
    interleaf_order: np.ndarray
    provenance: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.frames.ndim != 3:
            raise InvalidArgumentError("frames must have shape (T, rows, cols)", details={"shape": list(self.frames.shape)})
        if self.interleaf_order.shape != (self.frames.shape[0],):
            raise InvalidArgumentError("interleaf_order must hold one index per frame",
                                       details={"frames": self.frames.shape[0],
                                                "order": list(self.interleaf_order.shape)})

    @property
    def n_timepoints(self) -> int:
        return int(self.frames.shape[0])

    @property
    def grid_size(self) -> Tuple[int, int]:
        return int(self.frames.shape[1]), int(self.frames.shape[2])

    @property
    def method(self) -> str:
        return str(self.provenance.get("method", ""))

    @property
    def schedule_hash(self) -> Optional[str]:
        return self.provenance.get("schedule_hash")

    def pixel_signals(self) -> np.ndarray:
        """Time courses as rows, shape (rows * cols, T)."""
        return self.frames.reshape(self.n_timepoints, -1).T

    def save(self, path: Union[str, Path]) -> Path:
        meta = {"kind": "image_series", "n_timepoints": self.n_timepoints, "grid": list(self.grid_size),
                "method": self.method, "ordering": self.provenance.get("ordering"), "provenance": self.provenance}
        blocks = {"interleaf_order": self.interleaf_order.astype(np.float64)}
        return TensorFile(np.ascontiguousarray(self.frames, dtype=np.complex128), meta=meta, blocks=blocks).save(path)


def load_image_series(path: Union[str, Path]) -> ImageSeries:
    tensor = TensorFile.load(path)
    tensor.require_meta("n_timepoints", "grid", "method", "provenance")
    frames = tensor.data
    if frames.ndim != 3 or not np.iscomplexobj(frames) or frames.shape[0] != int(tensor.meta["n_timepoints"]):
        raise TensorFormatError("Image series must be a complex (T, rows, cols) tensor",
                                details={"shape": list(frames.shape)})
    order = tensor.blocks.get("interleaf_order")
    if order is None or order.shape != (frames.shape[0],):
        raise TensorFormatError("Image series is missing its interleaf_order block")
    return ImageSeries(frames=frames.astype(np.complex128, copy=False), interleaf_order=order.astype(np.int64),
                       provenance=dict(tensor.meta["provenance"]))


def _signal_matrix(srf_set: SpatialResponseSet, tissue_signals: Sequence[TissueSignal]) -> np.ndarray:
    by_label = {s.label: s for s in tissue_signals}
    labels = [s.label for s in tissue_signals]
    if len(by_label) != len(labels) or sorted(by_label) != sorted(srf_set.labels):
        raise InvalidArgumentError("tissue signals do not match the spatial response tissues",
                                   details={"signals": labels, "responses": list(srf_set.labels)})
    lengths = {s.n_timepoints for s in tissue_signals}
    if len(lengths) != 1:
        raise InvalidArgumentError("tissue signals differ in length", details={"lengths": sorted(lengths)})
    return np.stack([by_label[label].signal for label in srf_set.labels])


def simulate_fast(
    srf_set: SpatialResponseSet,
    tissue_signals: Sequence[TissueSignal],
    ordering: Optional[InterleafOrdering] = None,
    noise_snr_db: Optional[float] = None,
    rng: Optional[np.random.Generator] = None,
    threads: int = 1,
    schedule_hash: Optional[str] = None,
) -> ImageSeries:
    """Frame t = sum_i Ψ_i(·, ·, order[t]) d_i(t)."""
    ordering = ordering or linear_ordering()
    signals = _signal_matrix(srf_set, tissue_signals)
    n_timepoints = signals.shape[1]
    order = ordering.indices(n_timepoints, srf_set.n_interleaves)
    rows, cols = srf_set.grid_size
    frames = np.empty((n_timepoints, rows, cols), dtype=np.complex128)

    def fill(interleaf: int) -> None:
        times = np.flatnonzero(order == interleaf)
        if times.size:
            frames[times] = np.einsum("jt,jrc->trc", signals[:, times], srf_set.responses[:, interleaf])

    with timed_stage("simulate_fast", n_timepoints=n_timepoints, tissues=srf_set.n_tissues):
        with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
            list(pool.map(fill, range(srf_set.n_interleaves)))
        if noise_snr_db is not None:
            frames = add_image_noise(frames, noise_snr_db, rng if rng is not None else np.random.default_rng(0))

    provenance = {
        "method": "fast",
        "ordering": ordering.to_dict(),
        "srf_key": srf_set.metadata.key(),
        "phantom_hash": srf_set.metadata.phantom_hash,
        "phase_hash": srf_set.metadata.phase_hash,
        "sampling": srf_set.metadata.sampling,
        "schedule_hash": schedule_hash,
        "noise_snr_db": noise_snr_db,
    }
    return ImageSeries(frames=frames, interleaf_order=order, provenance=provenance)


def simulate_conventional(
    phantom: TissuePhantom,
    schedule: SequenceSchedule,
    spiral_set: SpiralSet,
    phase_map: Optional[PhaseMap] = None,
    ordering: Optional[InterleafOrdering] = None,
    dcf_mode: DcfMode = "scaled",
    sampling: SamplingMode = "undersampled",
    nufft: Optional[NufftParams] = None,
    tissue_signals: Optional[Sequence[TissueSignal]] = None,
    threads: int = 1,
) -> ImageSeries:
    """Per-frame compose, forward NUFFT, select, density-compensate and grid."""
    check_geometry(phantom.grid_size, spiral_set, phase_map)
    if sampling not in ("undersampled", "full"):
        raise InvalidArgumentError("Unknown sampling mode", details={"sampling": sampling})
    ordering = ordering or linear_ordering()
    if tissue_signals is None:
        tissue_signals = simulate_tissue_signals(phantom.tissues, schedule)
    if [s.label for s in tissue_signals] != phantom.labels:
        raise InvalidArgumentError("tissue signals do not match the phantom tissues",
                                   details={"signals": [s.label for s in tissue_signals], "phantom": phantom.labels})
    signals = np.stack([s.signal for s in tissue_signals])
    n_timepoints = signals.shape[1]
    if n_timepoints != schedule.n_timepoints:
        raise InvalidArgumentError("tissue signals do not match the schedule length",
                                   details={"signals": n_timepoints, "schedule": schedule.n_timepoints})
    order = ordering.indices(n_timepoints, spiral_set.n_interleaves)
    rows, cols = phantom.grid_size
    frames = np.empty((n_timepoints, rows, cols), dtype=np.complex128)

    with timed_stage("simulate_conventional", n_timepoints=n_timepoints, tissues=phantom.n_tissues):
        operators = ReconstructionOperators.build(spiral_set, dcf_mode, nufft)
        weighted = phantom.masks * (phase_map.factor() if phase_map is not None else 1.0)

        def frame(t: int) -> None:
            image = np.tensordot(signals[:, t], weighted, axes=1)
            samples = forward(operators.union, image)
            if sampling == "full":
                frames[t] = operators.reconstruct_full(samples)
            else:
                frames[t] = operators.reconstruct_interleaf(samples, int(order[t]))

        with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
            list(pool.map(frame, range(n_timepoints)))

    provenance = {
        "method": "conventional",
        "ordering": ordering.to_dict(),
        "phantom_hash": phantom.content_hash(),
        "spiral_hash": spiral_set.content_hash(),
        "phase_hash": phase_map.content_hash() if phase_map is not None else "none",
        "sampling": sampling,
        "schedule_hash": schedule.content_hash(),
    }
    return ImageSeries(frames=frames, interleaf_order=order, provenance=provenance)


def relative_frame_errors(series: ImageSeries, reference: ImageSeries) -> List[float]:
    """Per-frame ||series - reference|| / ||reference|| (0 where both frames vanish)."""
    if series.frames.shape != reference.frames.shape:
        raise InvalidArgumentError("series shapes differ",
                                   details={"series": list(series.frames.shape), "reference": list(reference.frames.shape)})
    errors = []
    for a, b in zip(series.frames, reference.frames):
        norm = float(np.linalg.norm(b))
        diff = float(np.linalg.norm(a - b))
        errors.append(diff / norm if norm > 0 else diff)
    return errors


def simulate_gaussian_series(
    phantom: TissuePhantom,
    tissue_signals: Sequence[TissueSignal],
    snr_db: Optional[float] = 9.0,
    rng: Optional[np.random.Generator] = None,
    schedule_hash: Optional[str] = None,
) -> ImageSeries:
    """Fully sampled frames with independent Gaussian noise on every pixel time course.

    Each pixel's noise level follows its own clean signal power, as in the signal-level model.
    """
    if [s.label for s in tissue_signals] != phantom.labels:
        raise InvalidArgumentError("tissue signals do not match the phantom tissues",
                                   details={"signals": [s.label for s in tissue_signals], "phantom": phantom.labels})
    rng = rng if rng is not None else np.random.default_rng(0)
    signals = np.stack([s.signal for s in tissue_signals])
    frames = np.einsum("jt,jrc->trc", signals, phantom.masks)
    if snr_db is not None and snr_db != math.inf:
        power = np.mean(np.abs(frames) ** 2, axis=0)
        sigma = np.sqrt(power / 10 ** (snr_db / 10))
        frames = frames + complex_gaussian(rng, frames.shape, 1.0) * sigma[None]

    provenance = {
        "method": "gaussian",
        "ordering": None,
        "phantom_hash": phantom.content_hash(),
        "sampling": "full",
        "schedule_hash": schedule_hash,
        "snr_db": snr_db,
    }
    return ImageSeries(frames=frames, interleaf_order=np.full(frames.shape[0], -1, dtype=np.int64),
                       provenance=provenance)
