"""
Shared fixtures and reference implementations for the mrfsim test suite.
"""

import numpy as np
import pytest
from scipy.spatial import ConvexHull, Voronoi

from mrfsim.core.observability import MetricsCollector, set_global_metrics
from mrfsim.imaging.phantom import make_three_tissue_phantom
from mrfsim.imaging.trajectory import build_spiral_set
from mrfsim.sequence.schedule import SequenceSchedule, default_fisp_schedule


@pytest.fixture(autouse=True)
def fresh_metrics():
    """Every test counts NUFFT/EPG/precompute calls from zero."""
    collector = MetricsCollector()
    set_global_metrics(collector)
    yield collector
    set_global_metrics(None)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def phantom32():
    return make_three_tissue_phantom(32)


@pytest.fixture(scope="session")
def spirals32():
    return build_spiral_set(32, 48)


@pytest.fixture(scope="session")
def schedule24():
    return default_fisp_schedule(24)


def direct_nudft(image: np.ndarray, coords: np.ndarray) -> np.ndarray:
    """s_m = sum_{y,x} f(y, x) exp(-2 pi i (kx x + ky y)) with the origin at size // 2."""
    rows, cols = image.shape
    y = np.arange(rows) - rows // 2
    x = np.arange(cols) - cols // 2
    phase_y = np.exp(-2j * np.pi * np.outer(coords[:, 1], y))
    phase_x = np.exp(-2j * np.pi * np.outer(coords[:, 0], x))
    return np.einsum("my,yx,mx->m", phase_y, image, phase_x)


def voronoi_areas(points: np.ndarray) -> np.ndarray:
    """Cell area of every point; unbounded cells are NaN."""
    diagram = Voronoi(points)
    areas = np.full(points.shape[0], np.nan)
    for i, region_index in enumerate(diagram.point_region):
        region = diagram.regions[region_index]
        if region and -1 not in region:
            areas[i] = ConvexHull(diagram.vertices[region]).volume
    return areas


def isochromat_signal(t1_ms: float, t2_ms: float, schedule: SequenceSchedule, n_isochromats: int = 400) -> np.ndarray:
    """Brute-force FISP signal from a ring of isochromats spread over one dephasing cycle."""
    phi = 2 * np.pi * np.arange(n_isochromats) / n_isochromats
    mx = np.zeros(n_isochromats)
    my = np.zeros(n_isochromats)
    mz = np.ones(n_isochromats)

    def relax(duration: float) -> None:
        nonlocal mx, my, mz
        e1, e2 = np.exp(-duration / t1_ms), np.exp(-duration / t2_ms)
        mx, my, mz = mx * e2, my * e2, mz * e1 + 1.0 - e1

    if schedule.inversion.enabled:
        mz = -mz
        relax(schedule.inversion.ti_ms)

    signal = np.zeros(schedule.n_timepoints, dtype=np.complex128)
    for t in range(schedule.n_timepoints):
        alpha = np.deg2rad(schedule.flip_deg[t])
        if round(schedule.rf_phase_deg[t]) % 360 == 180:
            alpha = -alpha
        my, mz = my * np.cos(alpha) - mz * np.sin(alpha), my * np.sin(alpha) + mz * np.cos(alpha)
        relax(schedule.te_ms[t])
        signal[t] = np.mean(mx + 1j * my)
        relax(schedule.tr_ms[t] - schedule.te_ms[t])
        rotated = (mx + 1j * my) * np.exp(1j * phi)
        mx, my = rotated.real, rotated.imag
    return signal
