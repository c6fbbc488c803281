"""
Variable-density spiral interleaves and their density compensation.

The base interleaf is an Archimedean spiral whose pitch grows from ``pitch_inner`` at the
k-space center to ``pitch_outer`` at the edge; pitches are expressed relative to the pitch
at which the union of all interleaves exactly meets Nyquist for the matrix.
"""

from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

import numpy as np
import structlog
from scipy.integrate import cumulative_trapezoid

from ..core.cache import content_hash
from ..core.errors import InfeasibleTrajectoryError, InvalidArgumentError, TensorFormatError, require
from ..core.tensorfile import TensorFile

logger = structlog.get_logger(__name__)

K_MAX = 0.5
NYQUIST_TOLERANCE = 1e-12


@dataclass(frozen=True)
class DensityProfile:
    """Radial pitch law p(r) = p_inner + (p_outer - p_inner) * (r / 0.5) ** gamma."""
    gamma: float = 1.0
    pitch_inner: float = 0.5
    pitch_outer: float = 1.0
    readout_oversampling: float = 2.0
    readout_sampling: Literal["arc", "angle"] = "arc"

    def relative_pitch(self, r: np.ndarray) -> np.ndarray:
        """Union gap between neighbouring turns in units of 1/matrix_size."""
        return self.pitch_inner + (self.pitch_outer - self.pitch_inner) * (np.asarray(r) / K_MAX) ** self.gamma

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class SpiralSet:
    """Interleaf sample coordinates in cycles/pixel, shape (n_interleaves, readout_len, 2)."""
    matrix_size: int
    profile: DensityProfile
    samples: np.ndarray
    arc_length: np.ndarray
    dcf: Optional[np.ndarray] = None

    @property
    def n_interleaves(self) -> int:
        return int(self.samples.shape[0])

    @property
    def readout_len(self) -> int:
        return int(self.samples.shape[1])

    @property
    def n_samples(self) -> int:
        return self.n_interleaves * self.readout_len

    def coords(self) -> np.ndarray:
        """Union of all interleaves, interleaf-major, shape (n_samples, 2)."""
        return self.samples.reshape(-1, 2)

    def interleaf_indices(self, interleaf: int) -> np.ndarray:
        require(0 <= interleaf < self.n_interleaves, "interleaf index out of range",
                interleaf=interleaf, n_interleaves=self.n_interleaves)
        return np.arange(interleaf * self.readout_len, (interleaf + 1) * self.readout_len)

    def union_dcf(self) -> np.ndarray:
        require(self.dcf is not None, "density compensation has not been computed")
        return self.dcf.reshape(-1)  # type: ignore[union-attr]

    def content_hash(self) -> str:
        dcf = self.dcf if self.dcf is not None else np.zeros(0)
        return content_hash(self.samples, dcf, self.matrix_size)

    def save(self, path: Union[str, Path]) -> Path:
        dcf = self.dcf if self.dcf is not None else np.zeros(self.samples.shape[:2])
        data = np.concatenate([self.samples, dcf[..., None]], axis=-1)
        meta = {"kind": "spiral_set", "matrix_size": self.matrix_size, "profile": self.profile.to_dict(),
                "dcf_computed": self.dcf is not None, "spiral_hash": self.content_hash()}
        return TensorFile(data, meta=meta, blocks={"arc_length": self.arc_length}).save(path)


def _nyquist_check(profile: DensityProfile) -> None:
    worst = float(max(profile.pitch_inner, profile.pitch_outer))
    if worst > 1.0 + NYQUIST_TOLERANCE:
        raise InfeasibleTrajectoryError(
            "Spiral pitch exceeds the Nyquist gap for the interleaf union",
            details={"max_relative_pitch": worst, "pitch_inner": profile.pitch_inner,
                     "pitch_outer": profile.pitch_outer},
        )


def generate_spiral_set(
    matrix_size: int,
    n_interleaves: int = 48,
    density_profile: Optional[DensityProfile] = None,
    fine_steps: int = 20000,
) -> SpiralSet:
    """Build the rotated interleaf set; density compensation is left empty."""
    require(matrix_size >= 16, "matrix_size must be at least 16", matrix_size=matrix_size)
    require(n_interleaves >= 1, "n_interleaves must be positive", n_interleaves=n_interleaves)
    profile = density_profile or DensityProfile()
    require(profile.pitch_inner > 0 and profile.pitch_outer > 0 and profile.gamma > 0,
            "pitch parameters must be positive", profile=profile.to_dict())
    require(profile.readout_oversampling > 0, "readout_oversampling must be positive")
    _nyquist_check(profile)

    # Per-interleaf pitch is n times the union gap.
    r_fine = np.linspace(0.0, K_MAX, fine_steps + 1)
    pitch = profile.relative_pitch(r_fine) * n_interleaves / matrix_size
    theta_fine = cumulative_trapezoid(2 * np.pi / pitch, r_fine, initial=0.0)
    arc_fine = cumulative_trapezoid(np.sqrt(1.0 + (2 * np.pi * r_fine / pitch) ** 2), r_fine, initial=0.0)

    step = 1.0 / (matrix_size * profile.readout_oversampling)
    if profile.readout_sampling == "arc":
        arc = np.arange(0.0, arc_fine[-1] + step * 1e-9, step)
        radius = np.interp(arc, arc_fine, r_fine)
        theta = np.interp(radius, r_fine, theta_fine)
    elif profile.readout_sampling == "angle":
        theta = np.arange(0.0, theta_fine[-1] + 1e-12, step / K_MAX)
        radius = np.interp(theta, theta_fine, r_fine)
        arc = np.interp(radius, r_fine, arc_fine)
    else:
        raise InvalidArgumentError("Unknown readout sampling", details={"readout_sampling": profile.readout_sampling})

    base_x = radius * np.cos(theta)
    base_y = radius * np.sin(theta)
    angles = 2 * np.pi * np.arange(n_interleaves) / n_interleaves
    cos_a, sin_a = np.cos(angles)[:, None], np.sin(angles)[:, None]
    samples = np.stack([cos_a * base_x - sin_a * base_y, sin_a * base_x + cos_a * base_y], axis=-1)
    samples.setflags(write=False)
    arc.setflags(write=False)

    spiral_set = SpiralSet(matrix_size=matrix_size, profile=profile, samples=samples, arc_length=arc)
    logger.debug("Spiral set generated", matrix_size=matrix_size, n_interleaves=n_interleaves,
                 readout_len=spiral_set.readout_len, max_radius=float(radius.max()))
    return spiral_set


def compute_density_compensation(spiral_set: SpiralSet) -> SpiralSet:
    """Analytic weights: union gap between turns times the azimuthal extent r * dθ per sample.

    Summed over the union this is the area of the sampled disc. The origin takes the disc
    inside half the first readout step; coincident samples split their weight evenly.
    """
    require(spiral_set.readout_len >= 3, "need at least three samples per interleaf to compensate density")
    base = spiral_set.samples[0]
    radius = np.hypot(base[:, 0], base[:, 1])
    theta = np.empty(spiral_set.readout_len)
    theta[1:] = np.unwrap(np.arctan2(base[1:, 1], base[1:, 0]))
    theta[0] = 2 * theta[1] - theta[2]
    gap = spiral_set.profile.relative_pitch(radius) / spiral_set.matrix_size
    weights = gap * radius * np.gradient(theta)
    if radius[0] == 0.0:
        weights[0] = np.pi * (radius[1] / 2) ** 2
    dcf = np.repeat(weights[None, :], spiral_set.n_interleaves, axis=0)

    coords = np.round(spiral_set.coords(), 12) + 0.0
    _, inverse, counts = np.unique(coords, axis=0, return_inverse=True, return_counts=True)
    multiplicity = counts[inverse.reshape(-1)].reshape(dcf.shape)
    dcf = dcf / multiplicity
    if not np.all(dcf > 0):
        raise InfeasibleTrajectoryError("Density compensation produced non-positive weights",
                                        details={"min_weight": float(dcf.min())})
    dcf.setflags(write=False)
    return replace(spiral_set, dcf=dcf)


def build_spiral_set(matrix_size: int, n_interleaves: int = 48,
                     density_profile: Optional[DensityProfile] = None) -> SpiralSet:
    """Generate spirals and fill in density compensation in one call."""
    spiral_set = compute_density_compensation(generate_spiral_set(matrix_size, n_interleaves, density_profile))
    logger.info("Spiral set ready", matrix_size=matrix_size, n_interleaves=n_interleaves,
                readout_len=spiral_set.readout_len, total_samples=spiral_set.n_samples)
    return spiral_set


def load_spiral_set(path: Union[str, Path]) -> SpiralSet:
    tensor = TensorFile.load(path)
    tensor.require_meta("matrix_size", "profile")
    data = tensor.data
    if data.ndim != 3 or data.shape[-1] != 3 or np.iscomplexobj(data):
        raise TensorFormatError("Spiral tensor must have shape (interleaves, readout, 3)",
                                details={"shape": list(data.shape)})
    if "arc_length" not in tensor.blocks or tensor.blocks["arc_length"].shape != (data.shape[1],):
        raise TensorFormatError("Spiral tensor is missing its arc_length block")
    try:
        profile = DensityProfile(**tensor.meta["profile"])
    except TypeError as e:
        raise TensorFormatError(f"Invalid density profile: {e}")
    samples = np.ascontiguousarray(data[..., :2])
    if np.any(np.hypot(samples[..., 0], samples[..., 1]) > K_MAX + 1e-9):
        raise TensorFormatError("Spiral samples exceed |k| = 0.5")
    dcf = np.ascontiguousarray(data[..., 2]) if tensor.meta.get("dcf_computed", True) else None
    samples.setflags(write=False)
    if dcf is not None:
        dcf.setflags(write=False)
    return SpiralSet(matrix_size=int(tensor.meta["matrix_size"]), profile=profile, samples=samples,
                     arc_length=tensor.blocks["arc_length"], dcf=dcf)


def nyquist_gap(spiral_set: SpiralSet, n_rays: int = 64) -> float:
    """Largest radial gap between successive turns of the union, cycles/pixel.

    Measured from the sample coordinates: along ``n_rays`` rays from the origin, every
    interleaf crossing is located by interpolating radius against unwrapped angle.
    Crossings inside the first readout step are left out.
    """
    require(n_rays >= 1, "n_rays must be positive", n_rays=n_rays)
    samples = spiral_set.samples[:, 1:]
    radius = np.hypot(samples[..., 0], samples[..., 1])
    theta = np.unwrap(np.arctan2(samples[..., 1], samples[..., 0]), axis=1)
    rays = 2 * np.pi * np.arange(n_rays) / n_rays

    r_start = float(radius[:, 0].max())
    crossings: List[List[float]] = [[] for _ in range(n_rays)]
    for th, rr in zip(theta, radius):
        for i, phi in enumerate(rays):
            turns = np.arange(np.ceil((th[0] - phi) / (2 * np.pi)), np.floor((th[-1] - phi) / (2 * np.pi)) + 1)
            r_cross = np.interp(phi + 2 * np.pi * turns, th, rr)
            crossings[i].extend(r_cross[r_cross >= r_start])
    return float(max(np.max(np.diff(np.sort(c))) if len(c) > 1 else float(radius.max()) for c in crossings))
