"""
Extended phase graph simulation of FISP signal evolutions.

States are kept per tissue in three arrays (F+, F-, Z) of ``n_states`` dephasing orders,
so a whole batch of (T1, T2) pairs advances through the schedule together. One unit of
gradient dephasing is applied at the end of every TR (unbalanced FISP readout gradient).
"""

from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
import structlog

from ..core.errors import InvalidArgumentError, MRFSimError
from ..core.observability import get_global_metrics
from ..imaging.phantom import TissueSpec
from .schedule import SequenceSchedule

logger = structlog.get_logger(__name__)

MAGNITUDE_TOLERANCE = 1e-9


@dataclass(frozen=True, eq=False)
class TissueSignal:
    """Un-normalized transverse signal d(t) of one tissue (M0 = 1)."""
    label: str
    signal: np.ndarray

    def __post_init__(self) -> None:
        signal = np.asarray(self.signal, dtype=np.complex128).reshape(-1)
        signal.setflags(write=False)
        object.__setattr__(self, "signal", signal)

    @property
    def n_timepoints(self) -> int:
        return int(self.signal.size)

    @property
    def power(self) -> float:
        return float(np.mean(np.abs(self.signal) ** 2)) if self.signal.size else 0.0


def rf_rotation(flip_rad: float, phase_rad: float = 0.0) -> np.ndarray:
    """3x3 mixing matrix acting on (F+, F-, Z) for a pulse about the axis at ``phase_rad``."""
    c2 = np.cos(flip_rad / 2) ** 2
    s2 = np.sin(flip_rad / 2) ** 2
    sa, ca = np.sin(flip_rad), np.cos(flip_rad)
    e = np.exp(1j * phase_rad)
    return np.array([
        [c2, e ** 2 * s2, -1j * e * sa],
        [np.conj(e) ** 2 * s2, c2, 1j * np.conj(e) * sa],
        [-0.5j * np.conj(e) * sa, 0.5j * e * sa, ca],
    ], dtype=np.complex128)


class _StateBatch:
    """Configuration states for a batch of tissues."""

    def __init__(self, batch: int, n_states: int):
        self.fp = np.zeros((batch, n_states), dtype=np.complex128)
        self.fm = np.zeros((batch, n_states), dtype=np.complex128)
        self.z = np.zeros((batch, n_states), dtype=np.complex128)
        self.z[:, 0] = 1.0
        self.n_states = n_states

    def excite(self, rotation: np.ndarray, active: int) -> None:
        fp, fm, z = self.fp[:, :active], self.fm[:, :active], self.z[:, :active]
        new_fp = rotation[0, 0] * fp + rotation[0, 1] * fm + rotation[0, 2] * z
        new_fm = rotation[1, 0] * fp + rotation[1, 1] * fm + rotation[1, 2] * z
        new_z = rotation[2, 0] * fp + rotation[2, 1] * fm + rotation[2, 2] * z
        self.fp[:, :active], self.fm[:, :active], self.z[:, :active] = new_fp, new_fm, new_z

    def relax(self, e1: np.ndarray, e2: np.ndarray, active: int) -> None:
        self.fp[:, :active] *= e2[:, None]
        self.fm[:, :active] *= e2[:, None]
        self.z[:, :active] *= e1[:, None]
        self.z[:, 0] += 1.0 - e1

    def dephase(self, active: int) -> None:
        """Advance every transverse state by one dephasing order."""
        top = np.conj(self.fm[:, 1]) if self.n_states > 1 else 0.0
        self.fp[:, 1:active] = self.fp[:, :active - 1].copy()
        self.fp[:, 0] = top
        self.fm[:, :active - 1] = self.fm[:, 1:active].copy()
        self.fm[:, active - 1] = 0.0

    def max_magnitude(self) -> float:
        return float(max(np.abs(self.fp).max(), np.abs(self.fm).max(), np.abs(self.z).max()))


def _relaxation(duration_ms: float, t1_ms: np.ndarray, t2_ms: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    return np.exp(-duration_ms / t1_ms), np.exp(-duration_ms / t2_ms)


def simulate_epg(
    t1_ms: Sequence[float],
    t2_ms: Sequence[float],
    schedule: SequenceSchedule,
    max_states: Optional[int] = None,
    debug_checks: bool = False,
) -> np.ndarray:
    """Signals for a batch of (T1, T2) pairs, shape (batch, n_timepoints)."""
    t1 = np.asarray(t1_ms, dtype=np.float64).reshape(-1)
    t2 = np.asarray(t2_ms, dtype=np.float64).reshape(-1)
    if t1.shape != t2.shape:
        raise InvalidArgumentError("t1 and t2 batches differ in length", details={"t1": t1.size, "t2": t2.size})
    if t1.size and (np.any(t1 <= 0) or np.any(t2 <= 0) or not np.all(np.isfinite(t1 + t2))):
        raise InvalidArgumentError("relaxation times must be finite and positive",
                                   details={"min_t1": float(t1.min()), "min_t2": float(t2.min())})

    n = schedule.n_timepoints
    n_states = n + 1 if max_states is None else int(max_states)
    if n_states < 1:
        raise InvalidArgumentError("max_states must be positive", details={"max_states": max_states})

    signals = np.zeros((t1.size, n), dtype=np.complex128)
    if t1.size == 0:
        return signals

    states = _StateBatch(t1.size, n_states)
    if schedule.inversion.enabled:
        states.z[:, 0] = -1.0
        states.relax(*_relaxation(schedule.inversion.ti_ms, t1, t2), active=1)

    flips = np.deg2rad(schedule.flip_deg)
    phases = np.deg2rad(schedule.rf_phase_deg)
    for t in range(n):
        # After t dephasing steps no state above order t is populated.
        active = min(t + 2, n_states)
        states.excite(rf_rotation(flips[t], phases[t]), active)
        states.relax(*_relaxation(schedule.te_ms[t], t1, t2), active)
        signals[:, t] = states.fp[:, 0]
        states.relax(*_relaxation(schedule.tr_ms[t] - schedule.te_ms[t], t1, t2), active)
        states.dephase(active)

        if debug_checks and states.max_magnitude() > 1.0 + MAGNITUDE_TOLERANCE:
            raise MRFSimError("EPG state magnitude exceeds equilibrium",
                              details={"timepoint": t, "max_magnitude": states.max_magnitude()})

    get_global_metrics().record_epg_simulation(t1.size)
    return signals


def simulate_signal(
    t1_ms: float,
    t2_ms: float,
    schedule: SequenceSchedule,
    label: str = "",
    max_states: Optional[int] = None,
    debug_checks: bool = False,
) -> TissueSignal:
    """Signal of one tissue; the (0, 0) void tissue yields zeros without simulating."""
    if t1_ms == 0 and t2_ms == 0:
        return TissueSignal(label=label, signal=np.zeros(schedule.n_timepoints, dtype=np.complex128))
    signal = simulate_epg([t1_ms], [t2_ms], schedule, max_states=max_states, debug_checks=debug_checks)[0]
    return TissueSignal(label=label or f"t1={t1_ms:g},t2={t2_ms:g}", signal=signal)


def simulate_tissue_signals(
    tissues: Iterable[TissueSpec],
    schedule: SequenceSchedule,
    max_states: Optional[int] = None,
    debug_checks: bool = False,
) -> List[TissueSignal]:
    """One batched EPG run for every non-void tissue, returned in input order."""
    tissues = list(tissues)
    live = [i for i, tissue in enumerate(tissues) if not tissue.is_void]
    batch = simulate_epg([tissues[i].t1_ms for i in live], [tissues[i].t2_ms for i in live], schedule,
                         max_states=max_states, debug_checks=debug_checks)

    signals = [TissueSignal(label=t.label, signal=np.zeros(schedule.n_timepoints, dtype=np.complex128))
               for t in tissues]
    for row, i in enumerate(live):
        signals[i] = TissueSignal(label=tissues[i].label, signal=batch[row])
    logger.debug("Tissue signals simulated", tissues=len(tissues), simulated=len(live),
                 n_timepoints=schedule.n_timepoints)
    return signals
