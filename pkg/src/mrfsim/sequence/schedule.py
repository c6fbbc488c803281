"""
FISP flip-angle / repetition-time trains.

A schedule is the only sequence-dependent input of the simulator. Its content hash is
carried by dictionaries and image series so that matching refuses mixed schedules.
"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Literal, Optional, Sequence, Union

import numpy as np
import structlog

from ..core.cache import content_hash
from ..core.errors import InvalidArgumentError, TensorFormatError

logger = structlog.get_logger(__name__)

DEFAULT_TI_MS = 20.64
FLIP_FLOOR_DEG = 5.0
FLIP_PEAK_DEG = 70.0
TR_RANGE_MS = (11.0, 15.0)

# Relative heights of the four flip-angle lobes of the default train.
_LOBE_PEAKS = (1.0, 0.6, 0.85, 0.45)


@dataclass(frozen=True)
class InversionSpec:
    enabled: bool = True
    ti_ms: float = DEFAULT_TI_MS

    def to_dict(self) -> Dict[str, Any]:
        return {"enabled": self.enabled, "ti_ms": self.ti_ms}


def _as_train(values: Union[Sequence[float], np.ndarray], name: str) -> np.ndarray:
    array = np.array(values, dtype=np.float64).reshape(-1)
    array.setflags(write=False)
    if not np.all(np.isfinite(array)):
        raise InvalidArgumentError(f"{name} must be finite")
    return array


@dataclass(frozen=True, eq=False)
class SequenceSchedule:
    """Per-timepoint flip angle (deg), TR and TE (ms) and RF phase (deg)."""
    flip_deg: np.ndarray
    tr_ms: np.ndarray
    te_ms: np.ndarray
    inversion: InversionSpec = field(default_factory=InversionSpec)
    rf_phase_deg: Optional[np.ndarray] = None
    label: str = ""

    def __post_init__(self) -> None:
        flip = _as_train(self.flip_deg, "flip_deg")
        tr = _as_train(self.tr_ms, "tr_ms")
        te = _as_train(self.te_ms, "te_ms")
        phase = _as_train(np.zeros_like(flip) if self.rf_phase_deg is None else self.rf_phase_deg, "rf_phase_deg")
        object.__setattr__(self, "flip_deg", flip)
        object.__setattr__(self, "tr_ms", tr)
        object.__setattr__(self, "te_ms", te)
        object.__setattr__(self, "rf_phase_deg", phase)

        n = flip.size
        if n < 1:
            raise InvalidArgumentError("schedule needs at least one timepoint")
        if not (tr.size == te.size == phase.size == n):
            raise InvalidArgumentError("schedule trains must share one length",
                                       details={"flip": n, "tr": tr.size, "te": te.size, "rf_phase": phase.size})
        if np.any(flip < 0) or np.any(flip > 90):
            raise InvalidArgumentError("flip angles must lie in [0, 90] degrees",
                                       details={"min": float(flip.min()), "max": float(flip.max())})
        if np.any(te < 0) or np.any(tr <= te):
            raise InvalidArgumentError("timing must satisfy tr_ms > te_ms >= 0",
                                       details={"min_tr": float(tr.min()), "max_te": float(te.max())})
        if self.inversion.ti_ms < 0 or not math.isfinite(self.inversion.ti_ms):
            raise InvalidArgumentError("ti_ms must be finite and nonnegative", details={"ti_ms": self.inversion.ti_ms})

    @property
    def n_timepoints(self) -> int:
        return int(self.flip_deg.size)

    @property
    def scan_time_ms(self) -> float:
        ti = self.inversion.ti_ms if self.inversion.enabled else 0.0
        return float(ti + self.tr_ms.sum())

    def content_hash(self) -> str:
        return content_hash(self.flip_deg, self.tr_ms, self.te_ms, self.rf_phase_deg, self.inversion.to_dict())

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": "sequence_schedule",
            "label": self.label,
            "n_timepoints": self.n_timepoints,
            "flip_deg": self.flip_deg.tolist(),
            "tr_ms": self.tr_ms.tolist(),
            "te_ms": self.te_ms.tolist(),
            "rf_phase_deg": self.rf_phase_deg.tolist(),  # type: ignore[union-attr]
            "inversion": self.inversion.to_dict(),
            "scan_time_ms": self.scan_time_ms,
            "schedule_hash": self.content_hash(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SequenceSchedule":
        try:
            inversion = InversionSpec(**data.get("inversion", {}))
            schedule = cls(
                flip_deg=data["flip_deg"],
                tr_ms=data["tr_ms"],
                te_ms=data["te_ms"],
                inversion=inversion,
                rf_phase_deg=data.get("rf_phase_deg"),
                label=str(data.get("label", "")),
            )
        except InvalidArgumentError as e:
            raise TensorFormatError(f"Schedule document is invalid: {e.message}", details=e.details)
        except (KeyError, TypeError, ValueError) as e:
            raise TensorFormatError(f"Schedule document is incomplete: {e}")

        recorded = data.get("schedule_hash")
        if recorded is not None and recorded != schedule.content_hash():
            raise TensorFormatError("Schedule hash does not match its trains",
                                    details={"recorded": recorded, "computed": schedule.content_hash()})
        return schedule

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")
        logger.debug("Schedule written", path=str(path), n_timepoints=self.n_timepoints)
        return path

    @classmethod
    def constant(cls, n_timepoints: int, flip_deg: float, tr_ms: float, te_ms: Optional[float] = None,
                 inversion: Optional[InversionSpec] = None, label: str = "constant") -> "SequenceSchedule":
        """Flat train, handy for checks against closed-form steady states."""
        if n_timepoints < 1:
            raise InvalidArgumentError("n_timepoints must be positive", details={"n_timepoints": n_timepoints})
        te = tr_ms / 2 if te_ms is None else te_ms
        return cls(
            flip_deg=np.full(n_timepoints, flip_deg),
            tr_ms=np.full(n_timepoints, tr_ms),
            te_ms=np.full(n_timepoints, te),
            inversion=inversion or InversionSpec(enabled=False),
            label=label,
        )


def load_schedule(path: Union[str, Path]) -> SequenceSchedule:
    path = Path(path)
    if not path.exists():
        raise TensorFormatError(f"Schedule file not found: {path}", details={"path": str(path)})
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise TensorFormatError(f"Schedule file is not valid JSON: {e}", details={"path": str(path)})
    if not isinstance(data, dict):
        raise TensorFormatError("Schedule document must be a mapping", details={"path": str(path)})
    return SequenceSchedule.from_dict(data)


def rf_phase_train(n_timepoints: int, mode: Literal["constant", "alternating"] = "constant") -> np.ndarray:
    if mode == "constant":
        return np.zeros(n_timepoints)
    if mode == "alternating":
        return 180.0 * (np.arange(n_timepoints) % 2)
    raise InvalidArgumentError("Unknown RF phase mode", details={"rf_phase_mode": mode})


def default_fisp_schedule(
    n_timepoints: int = 480,
    flip_scale: float = 1.0,
    inversion: bool = True,
    ti_ms: float = DEFAULT_TI_MS,
    rf_phase_mode: Literal["constant", "alternating"] = "constant",
) -> SequenceSchedule:
    """Default FISP-MRF train.

    Four half-sine flip lobes rising from 5 degrees, a slow sinusoidal TR in [11, 15] ms and
    a constant TE of half the shortest TR.
    """
    if n_timepoints < 1:
        raise InvalidArgumentError("n_timepoints must be positive", details={"n_timepoints": n_timepoints})
    if flip_scale <= 0:
        raise InvalidArgumentError("flip_scale must be positive", details={"flip_scale": flip_scale})

    position = len(_LOBE_PEAKS) * (np.arange(n_timepoints) + 0.5) / n_timepoints
    lobe = np.minimum(position.astype(np.int64), len(_LOBE_PEAKS) - 1)
    tau = position - lobe
    peaks = np.minimum(FLIP_PEAK_DEG * flip_scale * np.asarray(_LOBE_PEAKS)[lobe], 90.0)
    peaks = np.maximum(peaks, FLIP_FLOOR_DEG)
    flip = FLIP_FLOOR_DEG + (peaks - FLIP_FLOOR_DEG) * np.sin(np.pi * tau)

    lo, hi = TR_RANGE_MS
    tr = (lo + hi) / 2 + (hi - lo) / 2 * np.sin(2 * np.pi * 2 * (np.arange(n_timepoints) + 0.5) / n_timepoints)
    te = np.full(n_timepoints, tr.min() / 2)

    schedule = SequenceSchedule(
        flip_deg=flip,
        tr_ms=tr,
        te_ms=te,
        inversion=InversionSpec(enabled=inversion, ti_ms=ti_ms),
        rf_phase_deg=rf_phase_train(n_timepoints, rf_phase_mode),
        label="default_fisp (non-canonical)",
    )
    logger.debug("Default FISP schedule built", n_timepoints=n_timepoints, flip_scale=flip_scale,
                 scan_time_ms=round(schedule.scan_time_ms, 3))
    return schedule
