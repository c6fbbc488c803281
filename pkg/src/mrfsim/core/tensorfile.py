"""
Portable tensor container used by every pipeline stage.

Layout: one line of JSON header, a newline, then raw little-endian row-major payload.
The header carries ``magic``, ``version``, ``dtype``, ``shape`` and a free ``meta`` map;
optional secondary arrays are listed under ``blocks`` and follow the primary payload in order.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Union

import numpy as np
import structlog

from .errors import TensorFormatError

logger = structlog.get_logger(__name__)

MAGIC = "MRFTENSOR"
VERSION = 1

DTYPES: Dict[str, np.dtype] = {
    "f32": np.dtype("<f4"),
    "f64": np.dtype("<f8"),
    "c64": np.dtype("<c8"),
    "c128": np.dtype("<c16"),
}


def dtype_code(array: np.ndarray) -> str:
    """Map a numpy array's dtype to its tensor-file code."""
    for code, dtype in DTYPES.items():
        if array.dtype.kind == dtype.kind and array.dtype.itemsize == dtype.itemsize:
            return code
    raise TensorFormatError(f"Unsupported tensor dtype: {array.dtype}", details={"dtype": str(array.dtype)})


def _json_default(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def _describe(array: np.ndarray) -> Dict[str, Any]:
    return {"dtype": dtype_code(array), "shape": list(array.shape)}


@dataclass
class TensorFile:
    """A primary array, its metadata and optional named secondary blocks."""
    data: np.ndarray
    meta: Dict[str, Any] = field(default_factory=dict)
    blocks: Dict[str, np.ndarray] = field(default_factory=dict)

    def to_bytes(self) -> bytes:
        header: Dict[str, Any] = {"magic": MAGIC, "version": VERSION, **_describe(self.data), "meta": self.meta}
        if self.blocks:
            header["blocks"] = [{"name": name, **_describe(array)} for name, array in self.blocks.items()]

        payload = [np.ascontiguousarray(self.data, dtype=DTYPES[dtype_code(self.data)]).tobytes()]
        for array in self.blocks.values():
            payload.append(np.ascontiguousarray(array, dtype=DTYPES[dtype_code(array)]).tobytes())

        head = json.dumps(header, sort_keys=True, default=_json_default).encode("utf-8")
        return head + b"\n" + b"".join(payload)

    @classmethod
    def from_bytes(cls, raw: bytes) -> "TensorFile":
        newline = raw.find(b"\n")
        if newline < 0:
            raise TensorFormatError("Tensor file has no header line")
        try:
            header = json.loads(raw[:newline].decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise TensorFormatError(f"Tensor header is not valid JSON: {e}")

        if not isinstance(header, dict) or header.get("magic") != MAGIC:
            raise TensorFormatError("Bad tensor magic", details={"magic": header.get("magic") if isinstance(header, dict) else None})
        if header.get("version") != VERSION:
            raise TensorFormatError("Unsupported tensor version", details={"version": header.get("version")})

        specs: List[Dict[str, Any]] = [{"name": None, "dtype": header.get("dtype"), "shape": header.get("shape")}]
        specs.extend(header.get("blocks", []))

        arrays: List[np.ndarray] = []
        offset = newline + 1
        for spec in specs:
            dtype = DTYPES.get(spec.get("dtype"))
            shape = spec.get("shape")
            if dtype is None:
                raise TensorFormatError("Unknown tensor dtype", details={"dtype": spec.get("dtype")})
            if not isinstance(shape, list) or not all(isinstance(d, int) and d >= 0 for d in shape):
                raise TensorFormatError("Tensor shape must be a list of nonnegative ints", details={"shape": shape})
            nbytes = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
            if offset + nbytes > len(raw):
                raise TensorFormatError("Tensor payload is truncated",
                                        details={"expected_bytes": nbytes, "available": len(raw) - offset})
            arrays.append(np.frombuffer(raw, dtype=dtype, count=int(np.prod(shape, dtype=np.int64)),
                                        offset=offset).reshape(shape).copy())
            offset += nbytes

        if offset != len(raw):
            raise TensorFormatError("Tensor payload length does not match header",
                                    details={"trailing_bytes": len(raw) - offset})

        meta = header.get("meta", {})
        if not isinstance(meta, dict):
            raise TensorFormatError("Tensor meta must be a mapping")
        blocks = {spec["name"]: array for spec, array in zip(specs[1:], arrays[1:])}
        return cls(data=arrays[0], meta=meta, blocks=blocks)

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(self.to_bytes())
        logger.debug("Tensor file written", path=str(path), shape=list(self.data.shape), blocks=list(self.blocks))
        return path

    @classmethod
    def load(cls, path: Union[str, Path]) -> "TensorFile":
        path = Path(path)
        if not path.exists():
            raise TensorFormatError(f"Tensor file not found: {path}", details={"path": str(path)})
        tensor = cls.from_bytes(path.read_bytes())
        logger.debug("Tensor file read", path=str(path), shape=list(tensor.data.shape))
        return tensor

    def require_meta(self, *keys: str) -> None:
        missing = [key for key in keys if key not in self.meta]
        if missing:
            raise TensorFormatError("Tensor meta is missing required fields", details={"missing": missing})
