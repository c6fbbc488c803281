"""
Export of real-valued maps as 8-bit PGM (explicit window) and CSV.
"""

from pathlib import Path
from typing import Tuple, Union

import numpy as np
import structlog

from ..core.errors import InvalidArgumentError

logger = structlog.get_logger(__name__)


def window_suffix(window: Tuple[float, float]) -> str:
    return f"w{window[0]:g}_{window[1]:g}"


def to_gray8(values: np.ndarray, window: Tuple[float, float]) -> np.ndarray:
    """Linear map of [lo, hi] onto 0..255, clipped outside the window."""
    lo, hi = float(window[0]), float(window[1])
    if not hi > lo:
        raise InvalidArgumentError("window max must exceed window min", details={"window": [lo, hi]})
    values = np.asarray(values)
    if values.ndim != 2 or np.iscomplexobj(values):
        raise InvalidArgumentError("only real 2D maps can be rendered", details={"shape": list(values.shape)})
    values = values.astype(np.float64)
    scaled = np.clip((values - lo) / (hi - lo), 0.0, 1.0) * 255.0
    return np.round(scaled).astype(np.uint8)


def write_pgm(values: np.ndarray, prefix: Union[str, Path], window: Tuple[float, float]) -> Path:
    """Binary P5 file named ``<prefix>_w<lo>_<hi>.pgm``."""
    gray = to_gray8(values, window)
    prefix = Path(prefix)
    path = prefix.with_name(f"{prefix.name}_{window_suffix(window)}.pgm")
    path.parent.mkdir(parents=True, exist_ok=True)
    rows, cols = gray.shape
    path.write_bytes(f"P5\n{cols} {rows}\n255\n".encode("ascii") + gray.tobytes())
    logger.debug("PGM written", path=str(path), window=list(window))
    return path


def read_pgm(path: Union[str, Path]) -> np.ndarray:
    raw = Path(path).read_bytes()
    parts = raw.split(b"\n", 3)
    if len(parts) < 4 or parts[0] != b"P5" or parts[2] != b"255":
        raise InvalidArgumentError("not an 8-bit binary PGM", details={"path": str(path)})
    cols, rows = (int(v) for v in parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8, count=rows * cols).reshape(rows, cols)


def write_csv(values: np.ndarray, path: Union[str, Path]) -> Path:
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise InvalidArgumentError("only 2D maps can be exported", details={"shape": list(values.shape)})
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, values, delimiter=",", fmt="%.10g")
    return path
