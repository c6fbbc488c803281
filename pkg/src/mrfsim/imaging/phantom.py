"""
Digital tissue phantoms and background phase maps.

Built-in phantoms are synthetic elliptical head layouts (CSF rim and ventricles, GM ribbon,
WM interior); arbitrary segmentations can be loaded from tensor files.
"""

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Sequence, Tuple, Union

import numpy as np
import structlog

from ..core.cache import content_hash
from ..core.errors import InvalidArgumentError, MRFSimError, TensorFormatError, require
from ..core.tensorfile import TensorFile

logger = structlog.get_logger(__name__)

MIN_GRID = 16

# Head ellipse semi-axes in normalized [-1, 1] coordinates (x = columns, y = rows).
HEAD_AXES = (0.80, 0.92)
VENTRICLE_CENTERS = ((-0.14, 0.0), (0.14, 0.0))

THREE_TISSUES: Tuple[Tuple[str, float, float], ...] = (
    ("wm", 800.0, 40.0),
    ("gm", 1400.0, 60.0),
    ("csf", 3000.0, 500.0),
)

ELEVEN_TISSUES: Tuple[Tuple[str, float, float], ...] = THREE_TISSUES + (
    ("blood", 1600.0, 100.0),
    ("fat", 360.0, 70.0),
    ("tissues_around_fat", 500.0, 70.0),
    ("bone_marrow", 500.0, 70.0),
    ("muscle", 800.0, 48.0),
    ("skin_around_muscle", 560.0, 320.0),
    ("skull", 0.0, 0.0),
    ("dura", 0.0, 0.0),
)

# Outer-to-inner shells of the eleven-tissue head: (inner radius, label).
ELEVEN_SHELLS: Tuple[Tuple[float, str], ...] = (
    (0.955, "skin_around_muscle"),
    (0.910, "fat"),
    (0.875, "tissues_around_fat"),
    (0.830, "muscle"),
    (0.800, "skull"),
    (0.770, "bone_marrow"),
    (0.740, "skull"),
    (0.715, "dura"),
    (0.670, "csf"),
    (0.500, "gm"),
)

CANONICAL_DIRECTIONS: Dict[str, Tuple[float, float]] = {
    "+x": (1.0, 0.0),
    "-x": (-1.0, 0.0),
    "+y": (0.0, 1.0),
    "-y": (0.0, -1.0),
}


@dataclass(frozen=True)
class TissueSpec:
    """A tissue label with its relaxation times; (0, 0) is a signal void."""
    label: str
    t1_ms: float
    t2_ms: float

    def __post_init__(self) -> None:
        require(bool(self.label), "tissue label must be nonempty")
        require(self.t1_ms >= 0 and self.t2_ms >= 0, "relaxation times must be nonnegative",
                label=self.label, t1_ms=self.t1_ms, t2_ms=self.t2_ms)
        if self.t1_ms > 0 and self.t2_ms > 0:
            require(self.t2_ms <= self.t1_ms, "t2 must not exceed t1",
                    label=self.label, t1_ms=self.t1_ms, t2_ms=self.t2_ms)

    @property
    def is_void(self) -> bool:
        return self.t1_ms == 0 and self.t2_ms == 0

    def to_dict(self) -> Dict[str, object]:
        return {"label": self.label, "t1_ms": self.t1_ms, "t2_ms": self.t2_ms}

    @classmethod
    def from_dict(cls, data: Dict[str, object]) -> "TissueSpec":
        missing = [key for key in ("label", "t1_ms", "t2_ms") if key not in data]
        if missing:
            raise TensorFormatError("Tissue record is missing fields", details={"missing": missing, "record": data})
        try:
            return cls(label=str(data["label"]), t1_ms=float(data["t1_ms"]), t2_ms=float(data["t2_ms"]))  # type: ignore[arg-type]
        except (TypeError, ValueError) as e:
            raise TensorFormatError(f"Invalid tissue record: {e}", details={"record": data})


@dataclass(frozen=True, eq=False)
class TissuePhantom:
    """Per-tissue volume-fraction masks P_i(x, y) with registered relaxation times."""
    tissues: Tuple[TissueSpec, ...]
    masks: np.ndarray

    def __post_init__(self) -> None:
        masks = np.array(self.masks, dtype=np.float64, copy=True)
        require(len(self.tissues) >= 1, "phantom needs at least one tissue")
        labels = [t.label for t in self.tissues]
        require(len(set(labels)) == len(labels), "tissue labels must be unique", labels=labels)
        require(masks.ndim == 3 and masks.shape[0] == len(self.tissues),
                "masks must have shape (tissues, rows, cols)", shape=list(masks.shape), tissues=len(labels))
        require(bool(np.all(np.isfinite(masks))), "masks must be finite")
        require(bool(masks.min(initial=0.0) >= 0.0 and masks.max(initial=0.0) <= 1.0),
                "mask values must lie in [0, 1]", min=float(masks.min()), max=float(masks.max()))
        masks.setflags(write=False)
        object.__setattr__(self, "tissues", tuple(self.tissues))
        object.__setattr__(self, "masks", masks)

    @property
    def grid_size(self) -> Tuple[int, int]:
        return int(self.masks.shape[1]), int(self.masks.shape[2])

    @property
    def labels(self) -> List[str]:
        return [t.label for t in self.tissues]

    @property
    def n_tissues(self) -> int:
        return len(self.tissues)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise InvalidArgumentError(f"Unknown tissue label: {label}", details={"labels": self.labels})

    def tissue(self, label: str) -> TissueSpec:
        return self.tissues[self.index(label)]

    def mask(self, label: str) -> np.ndarray:
        return self.masks[self.index(label)]

    def segment(self, label: str, threshold: float = 0.5) -> np.ndarray:
        """Pixels where the tissue fraction reaches ``threshold``."""
        return self.mask(label) >= threshold

    def content_hash(self) -> str:
        return content_hash(self.masks, [t.to_dict() for t in self.tissues])

    def save(self, path: Union[str, Path]) -> Path:
        meta = {"kind": "phantom", "tissues": [t.to_dict() for t in self.tissues], "phantom_hash": self.content_hash()}
        return TensorFile(self.masks, meta=meta).save(path)


@dataclass(frozen=True, eq=False)
class PhaseMap:
    """Static background phase θ(x, y) in radians."""
    grid: np.ndarray
    direction: Tuple[float, float]
    range: Tuple[float, float]
    label: str = field(default="")

    @property
    def grid_size(self) -> Tuple[int, int]:
        return int(self.grid.shape[0]), int(self.grid.shape[1])

    def factor(self) -> np.ndarray:
        """Complex weighting e^{jθ}."""
        return np.exp(1j * self.grid)

    def content_hash(self) -> str:
        return content_hash(self.grid, list(self.direction), list(self.range))

    def save(self, path: Union[str, Path]) -> Path:
        meta = {"kind": "phase_map", "direction": list(self.direction), "range": list(self.range),
                "label": self.label, "phase_hash": self.content_hash()}
        return TensorFile(self.grid, meta=meta).save(path)


def _check_grid(grid_size: Union[int, Sequence[int]]) -> Tuple[int, int]:
    rows, cols = (grid_size, grid_size) if isinstance(grid_size, int) else tuple(grid_size)
    if rows < MIN_GRID or cols < MIN_GRID:
        raise InvalidArgumentError(f"Grid must be at least {MIN_GRID}x{MIN_GRID}", details={"grid_size": [rows, cols]})
    return int(rows), int(cols)


def _normalized_coordinates(rows: int, cols: int, supersampling: int) -> Tuple[np.ndarray, np.ndarray]:
    """Subpixel sample positions in [-1, 1], shape (rows, cols, s*s)."""
    offsets = (np.arange(supersampling) + 0.5) / supersampling - 0.5
    yy = (np.arange(rows)[:, None] + offsets[None, :] + 0.5) / rows * 2 - 1
    xx = (np.arange(cols)[:, None] + offsets[None, :] + 0.5) / cols * 2 - 1
    y, x = np.broadcast_arrays(yy[:, None, :, None], xx[None, :, None, :])
    return x.reshape(rows, cols, -1), y.reshape(rows, cols, -1)


def _head_radius(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.hypot(x / HEAD_AXES[0], y / HEAD_AXES[1])


def _in_ventricles(x: np.ndarray, y: np.ndarray, axes: Tuple[float, float]) -> np.ndarray:
    inside = np.zeros(x.shape, dtype=bool)
    for cx, cy in VENTRICLE_CENTERS:
        inside |= ((x - cx) / axes[0]) ** 2 + ((y - cy) / axes[1]) ** 2 < 1.0
    return inside


def _fractions(labels: Sequence[str], label_fn: Callable[[np.ndarray, np.ndarray], np.ndarray],
               rows: int, cols: int, supersampling: int) -> np.ndarray:
    x, y = _normalized_coordinates(rows, cols, supersampling)
    label_map = label_fn(x, y)
    masks = np.stack([(label_map == k).mean(axis=-1) for k in range(len(labels))])
    return masks


def _three_tissue_labels(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    rho = _head_radius(x, y)
    out = np.full(x.shape, -1, dtype=np.int64)
    out[rho < 1.0] = 2
    out[rho < 0.88] = 1
    out[rho < 0.68] = 0
    out[(rho < 0.68) & _in_ventricles(x, y, (0.09, 0.28))] = 2
    return out


def _eleven_tissue_labels(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    index = {label: k for k, (label, _, _) in enumerate(ELEVEN_TISSUES)}
    rho = _head_radius(x, y)
    out = np.full(x.shape, -1, dtype=np.int64)
    outer = 1.0
    for inner, label in ELEVEN_SHELLS:
        out[(rho < outer) & (rho >= inner)] = index[label]
        outer = inner
    core = rho < ELEVEN_SHELLS[-1][0]
    out[core] = index["wm"]
    out[core & _in_ventricles(x, y, (0.08, 0.22))] = index["csf"]
    for cy in (-0.3, 0.3):
        out[core & (np.hypot(x, y - cy) < 0.05)] = index["blood"]
    return out


def make_three_tissue_phantom(grid_size: Union[int, Sequence[int]] = 256) -> TissuePhantom:
    """WM/GM/CSF phantom with disjoint binary masks."""
    rows, cols = _check_grid(grid_size)
    masks = _fractions([t[0] for t in THREE_TISSUES], _three_tissue_labels, rows, cols, supersampling=1)
    phantom = TissuePhantom(tuple(TissueSpec(*t) for t in THREE_TISSUES), masks)
    logger.debug("Phantom built", kind="three", grid=[rows, cols], phantom_hash=phantom.content_hash())
    return phantom


def make_eleven_tissue_phantom(grid_size: Union[int, Sequence[int]] = 256, supersampling: int = 4) -> TissuePhantom:
    """Eleven-tissue head with fractional (partial-volume) masks summing to at most 1."""
    rows, cols = _check_grid(grid_size)
    require(supersampling >= 1, "supersampling must be positive", supersampling=supersampling)
    masks = _fractions([t[0] for t in ELEVEN_TISSUES], _eleven_tissue_labels, rows, cols, supersampling)
    phantom = TissuePhantom(tuple(TissueSpec(*t) for t in ELEVEN_TISSUES), masks)
    logger.debug("Phantom built", kind="eleven", grid=[rows, cols], phantom_hash=phantom.content_hash())
    return phantom


def load_phantom(path: Union[str, Path]) -> TissuePhantom:
    tensor = TensorFile.load(path)
    tensor.require_meta("tissues")
    records = tensor.meta["tissues"]
    if not isinstance(records, list):
        raise TensorFormatError("Phantom meta 'tissues' must be a list")
    tissues = tuple(TissueSpec.from_dict(r) for r in records)
    if tensor.data.ndim != 3 or tensor.data.shape[0] != len(tissues):
        raise TensorFormatError("Phantom masks do not match tissue list",
                                details={"shape": list(tensor.data.shape), "tissues": len(tissues)})
    if np.iscomplexobj(tensor.data):
        raise TensorFormatError("Phantom masks must be real-valued")
    try:
        return TissuePhantom(tissues, tensor.data.astype(np.float64))
    except MRFSimError as e:
        raise TensorFormatError(f"Invalid phantom: {e.message}", details=e.details)


def synthesize_phase_map(
    grid_size: Union[int, Sequence[int]],
    direction: Sequence[float] = (1.0, 0.0),
    range: Tuple[float, float] = (-math.pi, 2 * math.pi),
) -> PhaseMap:
    """Parabolic phase along ``direction`` (x = columns, y = rows), constant across it."""
    rows, cols = (grid_size, grid_size) if isinstance(grid_size, int) else tuple(grid_size)
    dx, dy = float(direction[0]), float(direction[1])
    norm = math.hypot(dx, dy)
    if norm == 0.0:
        raise InvalidArgumentError("Phase direction must be nonzero", details={"direction": [dx, dy]})
    lo, hi = float(range[0]), float(range[1])
    require(hi >= lo, "phase range max must not be below min", range=[lo, hi])
    dx, dy = dx / norm, dy / norm

    cy = np.arange(rows)[:, None] - (rows - 1) / 2.0
    cx = np.arange(cols)[None, :] - (cols - 1) / 2.0
    projection = dx * cx + dy * cy
    span = projection.max() - projection.min()
    u = (projection - projection.min()) / span if span > 0 else np.zeros_like(projection)
    grid = np.clip(lo + (hi - lo) * u ** 2, lo, hi)
    grid.setflags(write=False)
    return PhaseMap(grid=grid, direction=(dx, dy), range=(lo, hi))


def canonical_phase_maps(grid_size: Union[int, Sequence[int]],
                         range: Tuple[float, float] = (-math.pi, 2 * math.pi)) -> Dict[str, PhaseMap]:
    """The four ±x / ±y phase maps."""
    maps = {}
    for label, direction in CANONICAL_DIRECTIONS.items():
        phase = synthesize_phase_map(grid_size, direction, range)
        maps[label] = PhaseMap(grid=phase.grid, direction=phase.direction, range=phase.range, label=label)
    return maps


def load_phase_map(path: Union[str, Path]) -> PhaseMap:
    tensor = TensorFile.load(path)
    tensor.require_meta("direction", "range")
    if tensor.data.ndim != 2 or np.iscomplexobj(tensor.data):
        raise TensorFormatError("Phase map must be a real 2D grid", details={"shape": list(tensor.data.shape)})
    lo, hi = (float(v) for v in tensor.meta["range"])
    grid = tensor.data.astype(np.float64)
    if grid.size and (grid.min() < lo or grid.max() > hi):
        raise TensorFormatError("Phase values outside declared range", details={"range": [lo, hi]})
    grid.setflags(write=False)
    direction = tuple(float(v) for v in tensor.meta["direction"])
    return PhaseMap(grid=grid, direction=(direction[0], direction[1]), range=(lo, hi),
                    label=str(tensor.meta.get("label", "")))
