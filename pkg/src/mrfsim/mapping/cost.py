"""
Segment errors of quantitative maps and the scalar sequence cost.
"""

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Dict, Iterable, Literal, Mapping, Optional, Sequence, Union

import numpy as np
import structlog

from ..core.errors import InvalidArgumentError, SegmentError
from ..imaging.phantom import TissuePhantom
from ..sequence.dictionary import Dictionary
from ..sequence.epg import TissueSignal
from ..sequence.schedule import SequenceSchedule
from .matching import QuantMaps

logger = structlog.get_logger(__name__)

Formulation = Literal["scaled", "literal"]
QualityFactorHook = Callable[[Sequence[TissueSignal], Optional[Dictionary]], Dict[str, float]]

DEFAULT_WEIGHTS = {"wm": 1.0, "gm": 1.0, "csf": 1.0}
DEFAULT_TIME_REF_MS = 5760.0
SEGMENT_THRESHOLD = 0.5


@dataclass(frozen=True)
class TissueError:
    rmse_t1_rel: float
    rmse_t2_rel: float

    @property
    def total(self) -> float:
        return self.rmse_t1_rel + self.rmse_t2_rel


@dataclass
class CostReport:
    errors: Dict[str, TissueError]
    weights: Dict[str, float]
    scan_time_ms: float
    time_ref_ms: float
    penalty_factor: float
    error_term: float
    total_cost: float
    formulation: str = "scaled"
    qf_term: float = 0.0
    quality_factors: Optional[Dict[str, float]] = None
    extra: Dict[str, object] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, object]:
        data = asdict(self)
        data["errors"] = {label: asdict(err) for label, err in self.errors.items()}
        return data

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")
        return path


def _relative_rmse(values: np.ndarray, truth: float) -> float:
    return float(np.sqrt(np.mean((values - truth) ** 2)) / truth)


def compute_segment_rmse(
    maps: QuantMaps,
    phantom: TissuePhantom,
    labels: Optional[Iterable[str]] = None,
    threshold: float = SEGMENT_THRESHOLD,
) -> Dict[str, TissueError]:
    """Relative T1/T2 RMSE over pixels where the tissue fraction reaches ``threshold``.

    Unmatched pixels enter with their map value of 0.
    """
    if maps.grid_size != phantom.grid_size:
        raise InvalidArgumentError("maps and phantom grids differ",
                                   details={"maps": list(maps.grid_size), "phantom": list(phantom.grid_size)})
    labels = list(labels) if labels is not None else [t.label for t in phantom.tissues if not t.is_void]
    t1_map = np.where(maps.match_mask, maps.t1_map, 0.0)
    t2_map = np.where(maps.match_mask, maps.t2_map, 0.0)

    errors: Dict[str, TissueError] = {}
    for label in labels:
        tissue = phantom.tissue(label)
        if tissue.is_void:
            raise InvalidArgumentError("void tissues have no relaxation times to compare", details={"label": label})
        segment = phantom.segment(label, threshold)
        if not segment.any():
            raise SegmentError(f"Tissue segment '{label}' is empty", details={"label": label, "threshold": threshold})
        errors[label] = TissueError(
            rmse_t1_rel=_relative_rmse(t1_map[segment], tissue.t1_ms),
            rmse_t2_rel=_relative_rmse(t2_map[segment], tissue.t2_ms),
        )
    return errors


def correlation_quality_factors(tissue_signals: Sequence[TissueSignal],
                                dictionary: Optional[Dictionary] = None) -> Dict[str, float]:
    """Separability proxy: ||d_i|| * (1 - max_j |<d_i/||d_i||, d_j/||d_j||>|), j != i.

    ``dictionary`` is part of the hook signature and is not used by this proxy.
    """
    labels = [s.label for s in tissue_signals]
    matrix = np.stack([s.signal for s in tissue_signals]) if tissue_signals else np.zeros((0, 0))
    norms = np.linalg.norm(matrix, axis=1)
    unit = np.divide(matrix, norms[:, None], out=np.zeros_like(matrix), where=norms[:, None] > 0)
    correlation = np.abs(unit @ unit.conj().T)
    np.fill_diagonal(correlation, 0.0)
    worst = correlation.max(axis=1) if len(labels) > 1 else np.zeros(len(labels))
    return {label: float(norms[i] * (1.0 - min(worst[i], 1.0))) for i, label in enumerate(labels)}


quality_factor_hook: QualityFactorHook = correlation_quality_factors


def _check_weights(weights: Mapping[str, float]) -> Dict[str, float]:
    weights = {str(k): float(v) for k, v in weights.items()}
    if not weights or any(w < 0 or not math.isfinite(w) for w in weights.values()):
        raise InvalidArgumentError("weights must be finite and nonnegative", details={"weights": weights})
    if all(w == 0 for w in weights.values()):
        raise InvalidArgumentError("weights must not all be zero", details={"weights": weights})
    return weights


def compute_cost(
    errors: Mapping[str, TissueError],
    schedule: Union[SequenceSchedule, float],
    weights: Optional[Mapping[str, float]] = None,
    time_ref_ms: float = DEFAULT_TIME_REF_MS,
    formulation: Formulation = "scaled",
    noise_qf: Optional[Mapping[str, float]] = None,
    qf_weight: float = 0.0,
) -> CostReport:
    """Weighted error term combined with scan time.

    ``scaled`` multiplies by scan_time / time_ref (longer scans cost more); ``literal``
    divides by it. A quality-factor term w_i / (1 + qf_i), scaled by ``qf_weight``, is
    added to the error term when factors are supplied. A zero total therefore means zero
    errors only while ``qf_weight`` is 0; the quality-factor term does not depend on the maps.
    """
    weights = _check_weights(weights if weights is not None else DEFAULT_WEIGHTS)
    scan_time_ms = schedule.scan_time_ms if isinstance(schedule, SequenceSchedule) else float(schedule)
    if not scan_time_ms > 0 or not math.isfinite(scan_time_ms):
        raise InvalidArgumentError("scan time must be finite and positive", details={"scan_time_ms": scan_time_ms})
    if not time_ref_ms > 0:
        raise InvalidArgumentError("time_ref_ms must be positive", details={"time_ref_ms": time_ref_ms})
    if formulation not in ("scaled", "literal"):
        raise InvalidArgumentError("Unknown cost formulation", details={"formulation": formulation})
    missing = [label for label, w in weights.items() if w > 0 and label not in errors]
    if missing:
        raise InvalidArgumentError("errors are missing weighted tissues", details={"missing": missing})

    error_term = sum(w * errors[label].total for label, w in weights.items() if label in errors)
    qf_term = 0.0
    if noise_qf is not None and qf_weight > 0:
        qf_term = qf_weight * sum(w / (1.0 + max(noise_qf.get(label, 0.0), 0.0)) for label, w in weights.items())

    time_ratio = scan_time_ms / time_ref_ms
    combined = error_term + qf_term
    total = combined * time_ratio if formulation == "scaled" else combined / time_ratio

    return CostReport(
        errors=dict(errors),
        weights=weights,
        scan_time_ms=scan_time_ms,
        time_ref_ms=time_ref_ms,
        penalty_factor=time_ref_ms / scan_time_ms,
        error_term=error_term,
        total_cost=total,
        formulation=formulation,
        qf_term=qf_term,
        quality_factors=dict(noise_qf) if noise_qf is not None else None,
    )
