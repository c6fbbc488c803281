"""
Gaussian noise models and a spatial-structure measure for error images.
"""

import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
import structlog

from ..core.errors import InvalidArgumentError
from ..sequence.epg import TissueSignal

logger = structlog.get_logger(__name__)


def _is_noiseless(snr_db: Optional[float]) -> bool:
    return snr_db is None or snr_db == math.inf


def noise_sigma(power: float, snr_db: float) -> float:
    """Standard deviation of complex noise whose variance is power / 10^(snr/10)."""
    if math.isnan(snr_db) or snr_db == -math.inf:
        raise InvalidArgumentError("snr_db must be a number or +inf", details={"snr_db": snr_db})
    return math.sqrt(power / 10 ** (snr_db / 10))


def complex_gaussian(rng: np.random.Generator, shape: Tuple[int, ...], sigma: float) -> np.ndarray:
    """Circular complex noise with E|n|^2 = sigma^2."""
    scale = sigma / math.sqrt(2)
    return rng.normal(0.0, scale, shape) + 1j * rng.normal(0.0, scale, shape)


def simulate_gaussian_model(
    tissue_signals: Sequence[TissueSignal],
    snr_db: Optional[float] = 9.0,
    rng: Optional[np.random.Generator] = None,
    seed: int = 0,
) -> List[TissueSignal]:
    """Add white complex Gaussian noise to each clean signal at the requested SNR."""
    if not tissue_signals:
        raise InvalidArgumentError("at least one signal is required")
    if _is_noiseless(snr_db):
        return list(tissue_signals)
    rng = rng if rng is not None else np.random.default_rng(seed)

    noisy = []
    for signal in tissue_signals:
        if signal.power == 0:
            raise InvalidArgumentError("cannot set a noise level from a zero-power signal",
                                       details={"label": signal.label, "snr_db": snr_db})
        sigma = noise_sigma(signal.power, snr_db)  # type: ignore[arg-type]
        noisy.append(TissueSignal(label=signal.label,
                                  signal=signal.signal + complex_gaussian(rng, signal.signal.shape, sigma)))
    logger.debug("Gaussian model noise added", signals=len(noisy), snr_db=snr_db)
    return noisy


def add_image_noise(frames: np.ndarray, snr_db: Optional[float], rng: np.random.Generator) -> np.ndarray:
    """Per-frame image-domain noise scaled to each frame's mean power."""
    if _is_noiseless(snr_db):
        return frames
    noisy = np.array(frames, dtype=np.complex128, copy=True)
    for t in range(noisy.shape[0]):
        power = float(np.mean(np.abs(noisy[t]) ** 2))
        if power > 0:
            noisy[t] += complex_gaussian(rng, noisy[t].shape, noise_sigma(power, snr_db))  # type: ignore[arg-type]
    return noisy


def empirical_snr_db(clean: np.ndarray, noisy: np.ndarray) -> float:
    noise_power = float(np.mean(np.abs(noisy - clean) ** 2))
    return 10 * math.log10(float(np.mean(np.abs(clean) ** 2)) / noise_power)


def spatial_autocorrelation(image: np.ndarray, lag: Tuple[int, int] = (1, 0)) -> float:
    """Normalized autocorrelation Re sum e(x) conj(e(x + lag)) / sum |e|^2 (non-circular)."""
    image = np.asarray(image)
    dr, dc = lag
    rows, cols = image.shape
    if abs(dr) >= rows or abs(dc) >= cols:
        raise InvalidArgumentError("lag exceeds the image size", details={"lag": list(lag), "shape": [rows, cols]})
    energy = float(np.sum(np.abs(image) ** 2))
    if energy == 0:
        return 0.0
    a = image[max(0, -dr):rows - max(0, dr), max(0, -dc):cols - max(0, dc)]
    b = image[max(0, dr):rows - max(0, -dr), max(0, dc):cols - max(0, -dc)]
    return float(np.real(np.sum(a * np.conj(b)))) / energy
