"""
Spatial response functions Ψ_i(x, y, S).

For every tissue mask (optionally weighted by a background phase) and every spiral
interleaf S, Ψ is the gridding reconstruction of that mask after full-union sampling,
selection of interleaf S and density compensation. The set is computed once and reused
for any number of sequences.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
import structlog

from ..core.cache import MemoryCache, content_hash
from ..core.errors import CacheInvalidError, InvalidArgumentError, TensorFormatError
from ..core.observability import get_global_metrics, timed_stage
from ..core.tensorfile import TensorFile
from .nufft import GriddingPlan, adjoint, cached_plan, forward
from .phantom import PhaseMap, TissuePhantom
from .trajectory import SpiralSet

logger = structlog.get_logger(__name__)

DcfMode = Literal["scaled", "union"]
SamplingMode = Literal["undersampled", "full"]
NO_PHASE = "none"


@dataclass(frozen=True)
class NufftParams:
    oversampling: float = 2.0
    kernel_width: int = 8
    table_size: int = 10000


@dataclass(frozen=True)
class SpatialResponseMetadata:
    """Hashes and settings that bind a response set to its inputs."""
    phantom_hash: str
    spiral_hash: str
    phase_hash: str
    dcf_mode: str
    sampling: str
    labels: Tuple[str, ...]
    n_interleaves: int
    grid: Tuple[int, int]
    nufft: NufftParams

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["labels"] = list(self.labels)
        data["grid"] = list(self.grid)
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SpatialResponseMetadata":
        try:
            return cls(
                phantom_hash=str(data["phantom_hash"]),
                spiral_hash=str(data["spiral_hash"]),
                phase_hash=str(data["phase_hash"]),
                dcf_mode=str(data["dcf_mode"]),
                sampling=str(data["sampling"]),
                labels=tuple(data["labels"]),
                n_interleaves=int(data["n_interleaves"]),
                grid=(int(data["grid"][0]), int(data["grid"][1])),
                nufft=NufftParams(**data["nufft"]),
            )
        except (KeyError, TypeError, IndexError) as e:
            raise TensorFormatError(f"Invalid spatial response metadata: {e}")

    def key(self) -> str:
        return content_hash(self.to_dict())


@dataclass(frozen=True, eq=False)
class SpatialResponseSet:
    """Ψ grids indexed [tissue, interleaf, row, col]."""
    responses: np.ndarray
    metadata: SpatialResponseMetadata

    @property
    def labels(self) -> Tuple[str, ...]:
        return self.metadata.labels

    @property
    def n_tissues(self) -> int:
        return int(self.responses.shape[0])

    @property
    def n_interleaves(self) -> int:
        return int(self.responses.shape[1])

    @property
    def grid_size(self) -> Tuple[int, int]:
        return int(self.responses.shape[2]), int(self.responses.shape[3])

    def __len__(self) -> int:
        return self.n_tissues * self.n_interleaves

    def response(self, label: str, interleaf: int) -> np.ndarray:
        try:
            index = self.labels.index(label)
        except ValueError:
            raise InvalidArgumentError(f"Unknown tissue label: {label}", details={"labels": list(self.labels)})
        return self.responses[index, interleaf]


def describe_inputs(phantom: TissuePhantom, spiral_set: SpiralSet, phase_map: Optional[PhaseMap] = None,
                    dcf_mode: DcfMode = "scaled", sampling: SamplingMode = "undersampled",
                    nufft: Optional[NufftParams] = None) -> SpatialResponseMetadata:
    """Metadata a response set built from these inputs would carry."""
    return SpatialResponseMetadata(
        phantom_hash=phantom.content_hash(),
        spiral_hash=spiral_set.content_hash(),
        phase_hash=phase_map.content_hash() if phase_map is not None else NO_PHASE,
        dcf_mode=dcf_mode,
        sampling=sampling,
        labels=tuple(phantom.labels),
        n_interleaves=spiral_set.n_interleaves,
        grid=phantom.grid_size,
        nufft=nufft or NufftParams(),
    )


def interleaf_weights(spiral_set: SpiralSet, dcf_mode: DcfMode = "scaled") -> List[np.ndarray]:
    """Density compensation applied to each single-interleaf reconstruction."""
    if dcf_mode not in ("scaled", "union"):
        raise InvalidArgumentError("Unknown dcf mode", details={"dcf_mode": dcf_mode})
    union = spiral_set.union_dcf()
    scale = float(spiral_set.n_interleaves) if dcf_mode == "scaled" else 1.0
    return [union[spiral_set.interleaf_indices(s)] * scale for s in range(spiral_set.n_interleaves)]


def check_geometry(phantom_grid: Tuple[int, int], spiral_set: SpiralSet, phase_map: Optional[PhaseMap]) -> None:
    if phantom_grid != (spiral_set.matrix_size, spiral_set.matrix_size):
        raise InvalidArgumentError("phantom grid does not match spiral matrix size",
                                   details={"grid": list(phantom_grid), "matrix_size": spiral_set.matrix_size})
    if phase_map is not None and phase_map.grid_size != phantom_grid:
        raise InvalidArgumentError("phase map grid does not match phantom",
                                   details={"phase": list(phase_map.grid_size), "grid": list(phantom_grid)})


@dataclass(frozen=True, eq=False)
class ReconstructionOperators:
    """Union plan, per-interleaf sub-plans and weights shared by Ψ and the per-frame pipeline."""
    union: GriddingPlan
    interleaves: Tuple[GriddingPlan, ...]
    indices: Tuple[np.ndarray, ...]
    weights: Tuple[np.ndarray, ...]
    union_dcf: np.ndarray

    @classmethod
    def build(cls, spiral_set: SpiralSet, dcf_mode: DcfMode = "scaled",
              nufft: Optional[NufftParams] = None) -> "ReconstructionOperators":
        nufft = nufft or NufftParams()
        size = spiral_set.matrix_size
        union = cached_plan(spiral_set.coords(), (size, size), nufft.oversampling,
                            nufft.kernel_width, nufft.table_size)
        indices = tuple(spiral_set.interleaf_indices(s) for s in range(spiral_set.n_interleaves))
        return cls(
            union=union,
            interleaves=tuple(union.select(idx) for idx in indices),
            indices=indices,
            weights=tuple(interleaf_weights(spiral_set, dcf_mode)),
            union_dcf=spiral_set.union_dcf(),
        )

    def reconstruct_interleaf(self, union_samples: np.ndarray, interleaf: int) -> np.ndarray:
        """Select one interleaf from union samples, weight and grid back."""
        return adjoint(self.interleaves[interleaf], union_samples[self.indices[interleaf]], self.weights[interleaf])

    def reconstruct_full(self, union_samples: np.ndarray) -> np.ndarray:
        return adjoint(self.union, union_samples, self.union_dcf)


def compute_spatial_responses(
    phantom: TissuePhantom,
    spiral_set: SpiralSet,
    phase_map: Optional[PhaseMap] = None,
    dcf_mode: DcfMode = "scaled",
    sampling: SamplingMode = "undersampled",
    nufft: Optional[NufftParams] = None,
    threads: int = 1,
) -> SpatialResponseSet:
    """Precompute Ψ for every (tissue, interleaf) pair.

    ``sampling="full"`` skips the interleaf selection: every interleaf slot then holds the
    full-union reconstruction, which is the fully sampled reference.
    """
    check_geometry(phantom.grid_size, spiral_set, phase_map)
    if sampling not in ("undersampled", "full"):
        raise InvalidArgumentError("Unknown sampling mode", details={"sampling": sampling})
    nufft = nufft or NufftParams()
    metadata = describe_inputs(phantom, spiral_set, phase_map, dcf_mode, sampling, nufft)

    with timed_stage("spatial_responses", tissues=phantom.n_tissues, interleaves=spiral_set.n_interleaves,
                     sampling=sampling):
        operators = ReconstructionOperators.build(spiral_set, dcf_mode, nufft)
        factor = phase_map.factor() if phase_map is not None else 1.0
        rows, cols = phantom.grid_size
        n = spiral_set.n_interleaves

        with ThreadPoolExecutor(max_workers=threads) as pool:
            union_samples = list(pool.map(lambda mask: forward(operators.union, mask * factor), phantom.masks))

            if sampling == "full":
                full = np.stack(list(pool.map(operators.reconstruct_full, union_samples)))
                responses = np.broadcast_to(full[:, None], (phantom.n_tissues, n, rows, cols))
            else:
                responses = np.empty((phantom.n_tissues, n, rows, cols), dtype=np.complex128)

                def fill(task: Tuple[int, int]) -> None:
                    tissue, interleaf = task
                    responses[tissue, interleaf] = operators.reconstruct_interleaf(union_samples[tissue], interleaf)

                tasks = [(i, s) for i in range(phantom.n_tissues) for s in range(n)]
                list(pool.map(fill, tasks))
                responses.setflags(write=False)

    get_global_metrics().record_srf_precomputation()
    logger.info("Spatial responses computed", tissues=phantom.n_tissues, interleaves=n,
                count=phantom.n_tissues * n, key=metadata.key())
    return SpatialResponseSet(responses=responses, metadata=metadata)


def save_spatial_responses(srf_set: SpatialResponseSet, path: Union[str, Path]) -> Path:
    metadata = srf_set.metadata.to_dict()
    meta = {"kind": "spatial_responses", "metadata": metadata, "metadata_hash": content_hash(metadata),
            "J": srf_set.n_tissues, "n_interleaves": srf_set.n_interleaves, "grid": list(srf_set.grid_size)}
    return TensorFile(np.ascontiguousarray(srf_set.responses), meta=meta).save(path)


def load_spatial_responses(path: Union[str, Path], expected: Optional[SpatialResponseMetadata] = None,
                           strict: bool = True) -> SpatialResponseSet:
    """Load a saved set; in strict mode the header must be intact and match ``expected``."""
    tensor = TensorFile.load(path)
    tensor.require_meta("metadata", "metadata_hash")
    metadata = SpatialResponseMetadata.from_dict(tensor.meta["metadata"])
    data = tensor.data
    if data.ndim != 4 or not np.iscomplexobj(data):
        raise TensorFormatError("Spatial responses must be a complex (J, n, rows, cols) tensor",
                                details={"shape": list(data.shape)})
    if data.shape[:2] != (len(metadata.labels), metadata.n_interleaves) or tuple(data.shape[2:]) != metadata.grid:
        raise TensorFormatError("Spatial response shape disagrees with its metadata",
                                details={"shape": list(data.shape)})

    if strict:
        if content_hash(tensor.meta["metadata"]) != tensor.meta["metadata_hash"]:
            raise CacheInvalidError("Spatial response header has been modified", details={"path": str(path)})
        if expected is not None and expected.key() != metadata.key():
            stale = {k: [v, expected.to_dict()[k]] for k, v in metadata.to_dict().items()
                     if expected.to_dict()[k] != v}
            raise CacheInvalidError("Spatial responses were built from different inputs",
                                    details={"path": str(path), "mismatch": stale})

    responses = data.astype(np.complex128, copy=False)
    responses.setflags(write=False)
    return SpatialResponseSet(responses=responses, metadata=metadata)


class SpatialResponseCache:
    """Memory cache backed by an optional directory of saved response sets."""

    def __init__(self, directory: Optional[Union[str, Path]] = None, max_size: int = 2):
        self.directory = Path(directory) if directory else None
        self.memory = MemoryCache(max_size=max_size)

    def path_for(self, metadata: SpatialResponseMetadata) -> Optional[Path]:
        return self.directory / f"srf_{metadata.key()}.mrft" if self.directory else None

    def get_or_compute(self, phantom: TissuePhantom, spiral_set: SpiralSet, phase_map: Optional[PhaseMap] = None,
                       dcf_mode: DcfMode = "scaled", sampling: SamplingMode = "undersampled",
                       nufft: Optional[NufftParams] = None, threads: int = 1) -> SpatialResponseSet:
        expected = describe_inputs(phantom, spiral_set, phase_map, dcf_mode, sampling, nufft)
        key = expected.key()

        found = self.memory.get(key)
        if found is not None:
            logger.debug("Spatial response cache hit", key=key, level="memory")
            return found

        path = self.path_for(expected)
        if path is not None and path.exists():
            try:
                found = load_spatial_responses(path, expected=expected, strict=True)
                logger.info("Spatial response cache hit", key=key, level="disk", path=str(path))
            except (CacheInvalidError, TensorFormatError) as e:
                logger.warning("Discarding unusable cached responses", path=str(path), error=e.message)
                found = None

        if found is None:
            found = compute_spatial_responses(phantom, spiral_set, phase_map, dcf_mode, sampling, nufft, threads)
            if path is not None:
                save_spatial_responses(found, path)

        self.memory.set(key, found)
        return found

    def get_stats(self) -> Dict[str, Any]:
        return {**self.memory.get_stats(), "directory": str(self.directory) if self.directory else None}

