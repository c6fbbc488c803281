"""
Kaiser-Bessel gridding NUFFT.

Coordinates are in cycles/pixel (|k| <= 0.5), images are indexed with the origin at
``grid_size // 2``. The interpolation step is a sparse matrix built once per plan, so the
adjoint is its exact transpose and both directions are deterministic.

The default kernel is 8 grid cells wide at 2x oversampling. A 4-cell kernel does not reach
the 1e-5 relative accuracy against the exact nonuniform DFT that the simulators are compared
at; narrower kernels remain valid settings.
"""

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp
import structlog
from scipy.special import i0

from ..core.cache import MemoryCache, content_hash
from ..core.errors import InvalidArgumentError, require
from ..core.observability import get_global_metrics

logger = structlog.get_logger(__name__)

COORD_TOLERANCE = 1e-9


def kaiser_bessel_beta(width: float, oversampling: float) -> float:
    """Shape parameter tuned to the oversampling ratio (Beatty et al.)."""
    return math.pi * math.sqrt((width / oversampling) ** 2 * (oversampling - 0.5) ** 2 - 0.8)


def kaiser_bessel(u: np.ndarray, width: float, beta: float) -> np.ndarray:
    """Kernel I0(beta * sqrt(1 - (2u/W)^2)) on |u| < W/2, zero outside."""
    u = np.asarray(u, dtype=np.float64)
    inside = np.abs(u) < width / 2
    arg = np.sqrt(np.clip(1.0 - (2.0 * u / width) ** 2, 0.0, None))
    return np.where(inside, i0(beta * arg), 0.0)


def kaiser_bessel_transform(x: np.ndarray, width: float, beta: float) -> np.ndarray:
    """Continuous Fourier transform of the kernel at ``x`` cycles per grid cell."""
    z2 = beta ** 2 - (math.pi * width * np.asarray(x, dtype=np.float64)) ** 2
    z = np.sqrt(np.abs(z2))
    safe = np.where(z > 1e-12, z, 1.0)
    ratio = np.where(z2 >= 0, np.sinh(safe) / safe, np.sin(safe) / safe)
    return width * np.where(z > 1e-12, ratio, 1.0)


@dataclass(frozen=True, eq=False)
class GriddingPlan:
    """Precomputed gridding state for one coordinate set."""
    grid_size: Tuple[int, int]
    oversampled: Tuple[int, int]
    oversampling: float
    kernel_width: int
    beta: float
    table: np.ndarray
    deapodization: np.ndarray
    interpolator: sp.csr_matrix
    interpolator_t: sp.csr_matrix
    coords_hash: str

    @property
    def n_samples(self) -> int:
        return int(self.interpolator.shape[0])

    def select(self, indices: Union[np.ndarray, Sequence[int]]) -> "GriddingPlan":
        """Plan restricted to a subset of its samples (the K selection operator)."""
        indices = np.asarray(indices, dtype=np.int64)
        require(indices.ndim == 1 and indices.size > 0, "selection must be a nonempty index vector")
        require(bool(np.all((indices >= 0) & (indices < self.n_samples))), "selection index out of range",
                n_samples=self.n_samples)
        sub = self.interpolator[indices]
        return GriddingPlan(
            grid_size=self.grid_size,
            oversampled=self.oversampled,
            oversampling=self.oversampling,
            kernel_width=self.kernel_width,
            beta=self.beta,
            table=self.table,
            deapodization=self.deapodization,
            interpolator=sub,
            interpolator_t=sub.T.tocsr(),
            coords_hash=content_hash(self.coords_hash, indices),
        )

    def _offsets(self) -> Tuple[int, int]:
        return (self.oversampled[0] // 2 - self.grid_size[0] // 2,
                self.oversampled[1] // 2 - self.grid_size[1] // 2)


def _oversampled_size(n: int, oversampling: float) -> int:
    size = int(math.ceil(oversampling * n))
    return size + size % 2


def _axis_weights(position: np.ndarray, size: int, width: int, table: np.ndarray,
                  table_step: float) -> Tuple[np.ndarray, np.ndarray]:
    """Grid indices and kernel weights of the W+1 cells around each position."""
    base = np.ceil(position - width / 2.0).astype(np.int64)
    cells = base[:, None] + np.arange(width + 1)[None, :]
    distance = np.abs(position[:, None] - cells)
    weights = np.interp(distance / table_step, np.arange(table.size), table, right=0.0)
    weights[distance >= width / 2.0] = 0.0
    return (cells + size // 2) % size, weights


def plan(coords: np.ndarray, grid_size: Union[int, Sequence[int]], oversampling: float = 2.0,
         kernel_width: int = 8, table_size: int = 10000) -> GriddingPlan:
    """Build a gridding plan for ``coords`` of shape (M, 2) holding (kx, ky)."""
    coords = np.asarray(coords, dtype=np.float64)
    if coords.ndim != 2 or coords.shape[1] != 2 or coords.shape[0] == 0:
        raise InvalidArgumentError("coords must be a nonempty (M, 2) array", details={"shape": list(coords.shape)})
    if not np.all(np.isfinite(coords)) or np.abs(coords).max() > 0.5 + COORD_TOLERANCE:
        raise InvalidArgumentError("coordinates must lie within |k| <= 0.5",
                                   details={"max_abs": float(np.nanmax(np.abs(coords)))})
    rows, cols = (grid_size, grid_size) if isinstance(grid_size, int) else (int(grid_size[0]), int(grid_size[1]))
    require(rows >= 1 and cols >= 1, "grid_size must be positive", grid_size=[rows, cols])
    require(oversampling > 1.0, "oversampling must exceed 1", oversampling=oversampling)
    require(kernel_width >= 2, "kernel_width must be at least 2", kernel_width=kernel_width)

    g_rows, g_cols = _oversampled_size(rows, oversampling), _oversampled_size(cols, oversampling)
    beta = kaiser_bessel_beta(kernel_width, oversampling)
    table_step = (kernel_width / 2.0) / (table_size - 1)
    table = kaiser_bessel(np.arange(table_size) * table_step, kernel_width, beta)

    deapod_rows = kaiser_bessel_transform((np.arange(rows) - rows // 2) / g_rows, kernel_width, beta)
    deapod_cols = kaiser_bessel_transform((np.arange(cols) - cols // 2) / g_cols, kernel_width, beta)
    deapodization = np.outer(deapod_rows, deapod_cols)
    if not np.all(deapodization > 0):
        raise InvalidArgumentError("deapodization is not positive on the field of view",
                                   details={"oversampling": oversampling, "kernel_width": kernel_width})
    deapodization.setflags(write=False)

    # Rows of the image pair with ky, columns with kx.
    idx_r, w_r = _axis_weights(coords[:, 1] * g_rows, g_rows, kernel_width, table, table_step)
    idx_c, w_c = _axis_weights(coords[:, 0] * g_cols, g_cols, kernel_width, table, table_step)
    n_samples, taps = coords.shape[0], kernel_width + 1
    columns = (idx_r[:, :, None] * g_cols + idx_c[:, None, :]).reshape(n_samples, -1)
    values = (w_r[:, :, None] * w_c[:, None, :]).reshape(n_samples, -1)
    sample_rows = np.repeat(np.arange(n_samples), taps * taps)
    interpolator = sp.csr_matrix((values.ravel(), (sample_rows, columns.ravel())),
                                 shape=(n_samples, g_rows * g_cols))
    interpolator.eliminate_zeros()
    interpolator.sort_indices()

    gridding_plan = GriddingPlan(
        grid_size=(rows, cols),
        oversampled=(g_rows, g_cols),
        oversampling=float(oversampling),
        kernel_width=int(kernel_width),
        beta=beta,
        table=table,
        deapodization=deapodization,
        interpolator=interpolator,
        interpolator_t=interpolator.T.tocsr(),
        coords_hash=content_hash(coords),
    )
    logger.debug("Gridding plan built", grid=[rows, cols], oversampled=[g_rows, g_cols],
                 samples=n_samples, nnz=int(interpolator.nnz), beta=round(beta, 4))
    return gridding_plan


def forward(gridding_plan: GriddingPlan, image: np.ndarray) -> np.ndarray:
    """Image -> nonuniform samples, s_m = sum image(y, x) exp(-2 pi i (kx x + ky y))."""
    image = np.asarray(image)
    if image.shape != gridding_plan.grid_size:
        raise InvalidArgumentError("image shape does not match plan",
                                   details={"image": list(image.shape), "plan": list(gridding_plan.grid_size)})
    r0, c0 = gridding_plan._offsets()
    rows, cols = gridding_plan.grid_size
    padded = np.zeros(gridding_plan.oversampled, dtype=np.complex128)
    padded[r0:r0 + rows, c0:c0 + cols] = image / gridding_plan.deapodization
    spectrum = np.fft.fftshift(np.fft.fft2(np.fft.ifftshift(padded)))
    samples = gridding_plan.interpolator @ spectrum.ravel()
    get_global_metrics().record_nufft("forward")
    return samples


def adjoint(gridding_plan: GriddingPlan, samples: np.ndarray, dcf: Optional[np.ndarray] = None) -> np.ndarray:
    """Samples -> image; with ``dcf`` this is the gridding reconstruction."""
    samples = np.asarray(samples)
    if samples.shape != (gridding_plan.n_samples,):
        raise InvalidArgumentError("sample vector length does not match plan",
                                   details={"samples": list(samples.shape), "plan": gridding_plan.n_samples})
    if dcf is not None:
        dcf = np.asarray(dcf)
        if dcf.shape != samples.shape:
            raise InvalidArgumentError("dcf length does not match samples",
                                       details={"dcf": list(dcf.shape), "samples": list(samples.shape)})
        samples = samples * dcf
    g_rows, g_cols = gridding_plan.oversampled
    grid = (gridding_plan.interpolator_t @ samples.astype(np.complex128)).reshape(g_rows, g_cols)
    image = np.fft.fftshift(np.fft.ifft2(np.fft.ifftshift(grid))) * (g_rows * g_cols)
    r0, c0 = gridding_plan._offsets()
    rows, cols = gridding_plan.grid_size
    get_global_metrics().record_nufft("adjoint")
    return image[r0:r0 + rows, c0:c0 + cols] / gridding_plan.deapodization


_plan_cache = MemoryCache(max_size=4)


def cached_plan(coords: np.ndarray, grid_size: Union[int, Sequence[int]], oversampling: float = 2.0,
                kernel_width: int = 8, table_size: int = 10000) -> GriddingPlan:
    """Reuse a plan for an identical coordinate set and settings within the process."""
    key = content_hash(np.asarray(coords, dtype=np.float64), list(np.atleast_1d(grid_size)),
                       oversampling, kernel_width, table_size)
    found = _plan_cache.get(key)
    if found is None:
        found = plan(coords, grid_size, oversampling, kernel_width, table_size)
        _plan_cache.set(key, found)
    return found
