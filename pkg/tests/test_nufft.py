"""
NUFFT Testing for mrfsim

Gridding accuracy is checked against a direct nonuniform DFT.
"""

import numpy as np
import pytest

from conftest import direct_nudft
from mrfsim.core.errors import InvalidArgumentError
from mrfsim.core.observability import get_global_metrics
from mrfsim.imaging import nufft
from mrfsim.imaging.trajectory import build_spiral_set


def _relative(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


class TestForwardAccuracy:
    """Test the forward transform against the exact sum."""

    @pytest.fixture
    def problem(self, rng):
        coords = rng.uniform(-0.5, 0.5, size=(400, 2))
        image = rng.standard_normal((32, 32)) + 1j * rng.standard_normal((32, 32))
        return coords, image

    def test_matches_direct_sum(self, problem):
        """Test relative L2 error below 1e-5 with the default kernel."""
        coords, image = problem
        samples = nufft.forward(nufft.plan(coords, 32), image)
        assert _relative(samples, direct_nudft(image, coords)) < 1e-5

    def test_rectangular_grid(self, rng):
        """Test a non-square image keeps rows paired with ky."""
        coords = rng.uniform(-0.5, 0.5, size=(200, 2))
        image = rng.standard_normal((24, 32)).astype(np.complex128)
        samples = nufft.forward(nufft.plan(coords, (24, 32)), image)
        assert _relative(samples, direct_nudft(image, coords)) < 1e-5

    def test_narrow_kernel_is_less_accurate(self, problem):
        """Test accuracy improves with kernel width."""
        coords, image = problem
        exact = direct_nudft(image, coords)
        narrow = _relative(nufft.forward(nufft.plan(coords, 32, kernel_width=4), image), exact)
        wide = _relative(nufft.forward(nufft.plan(coords, 32, kernel_width=8), image), exact)
        assert wide < narrow

    def test_zero_image(self, rng):
        """Test a zero image maps to exactly zero samples."""
        coords = rng.uniform(-0.5, 0.5, size=(64, 2))
        samples = nufft.forward(nufft.plan(coords, 16), np.zeros((16, 16)))
        assert not np.any(samples)

    def test_point_at_origin(self):
        """Test a unit impulse at the image centre has a flat spectrum."""
        image = np.zeros((32, 32), dtype=np.complex128)
        image[16, 16] = 1.0
        coords = np.array([[0.0, 0.0], [0.25, -0.1], [-0.5, 0.5]])
        np.testing.assert_allclose(nufft.forward(nufft.plan(coords, 32), image), 1.0, atol=1e-5)


class TestAdjoint:
    """Test the adjoint and the selection operator."""

    def test_inner_product_identity(self, rng):
        """Test <F x, y> == <x, F^H y>."""
        coords = rng.uniform(-0.5, 0.5, size=(300, 2))
        gridding_plan = nufft.plan(coords, 32)
        x = rng.standard_normal((32, 32)) + 1j * rng.standard_normal((32, 32))
        y = rng.standard_normal(300) + 1j * rng.standard_normal(300)
        lhs = np.vdot(y, nufft.forward(gridding_plan, x))
        rhs = np.vdot(nufft.adjoint(gridding_plan, y), x)
        assert abs(lhs - rhs) <= 1e-10 * abs(lhs)

    def test_adjoint_matches_direct_sum(self, rng):
        """Test the adjoint against sum_m s_m exp(+2πi k·x)."""
        coords = rng.uniform(-0.5, 0.5, size=(150, 2))
        samples = rng.standard_normal(150) + 1j * rng.standard_normal(150)
        image = nufft.adjoint(nufft.plan(coords, 32), samples)
        y = np.arange(32) - 16
        exact = np.einsum("m,my,mx->yx", samples,
                          np.exp(2j * np.pi * np.outer(coords[:, 1], y)),
                          np.exp(2j * np.pi * np.outer(coords[:, 0], y)))
        assert _relative(image, exact) < 1e-5

    def test_dcf_weights_samples(self, rng):
        """Test dcf multiplies samples before gridding."""
        coords = rng.uniform(-0.5, 0.5, size=(50, 2))
        gridding_plan = nufft.plan(coords, 16)
        samples = rng.standard_normal(50).astype(np.complex128)
        dcf = rng.uniform(0.5, 2.0, 50)
        np.testing.assert_allclose(nufft.adjoint(gridding_plan, samples, dcf),
                                   nufft.adjoint(gridding_plan, samples * dcf), atol=1e-12)

    def test_adjoint_is_linear(self, rng):
        """Test adjoint(a s1 + b s2) == a adjoint(s1) + b adjoint(s2)."""
        coords = rng.uniform(-0.5, 0.5, size=(120, 2))
        gridding_plan = nufft.plan(coords, 16)
        s1, s2 = rng.standard_normal((2, 120)) + 1j * rng.standard_normal((2, 120))
        a, b = 0.3 - 2j, 1.7
        combined = nufft.adjoint(gridding_plan, a * s1 + b * s2)
        separate = a * nufft.adjoint(gridding_plan, s1) + b * nufft.adjoint(gridding_plan, s2)
        assert np.linalg.norm(combined - separate) <= 1e-12 * np.linalg.norm(separate)

    def test_select_is_subset(self, rng):
        """Test a selected plan returns exactly the chosen samples."""
        coords = rng.uniform(-0.5, 0.5, size=(80, 2))
        gridding_plan = nufft.plan(coords, 16)
        image = rng.standard_normal((16, 16)).astype(np.complex128)
        subset = np.array([3, 10, 42, 79])
        np.testing.assert_allclose(nufft.forward(gridding_plan.select(subset), image),
                                   nufft.forward(gridding_plan, image)[subset], atol=1e-12)
        with pytest.raises(InvalidArgumentError):
            gridding_plan.select([80])


class TestPlanning:
    """Test plan validation, caching and call accounting."""

    def test_rejects_out_of_range_coords(self):
        """Test |k| > 0.5 and malformed arrays are refused."""
        with pytest.raises(InvalidArgumentError):
            nufft.plan(np.array([[0.6, 0.0]]), 16)
        with pytest.raises(InvalidArgumentError):
            nufft.plan(np.zeros((3, 3)), 16)
        with pytest.raises(InvalidArgumentError):
            nufft.plan(np.zeros((3, 2)), 16, oversampling=1.0)

    def test_shape_mismatch(self):
        """Test image and sample sizes are checked."""
        gridding_plan = nufft.plan(np.zeros((3, 2)), 16)
        with pytest.raises(InvalidArgumentError):
            nufft.forward(gridding_plan, np.zeros((8, 8)))
        with pytest.raises(InvalidArgumentError):
            nufft.adjoint(gridding_plan, np.zeros(4))

    def test_cached_plan_reused(self, rng):
        """Test identical coordinates share one plan object."""
        coords = rng.uniform(-0.5, 0.5, size=(20, 2))
        assert nufft.cached_plan(coords, 16) is nufft.cached_plan(coords.copy(), 16)
        assert nufft.cached_plan(coords, 16) is not nufft.cached_plan(coords, 16, kernel_width=6)

    def test_calls_are_counted(self):
        """Test forward and adjoint applications are counted by direction."""
        gridding_plan = nufft.plan(np.zeros((2, 2)), 16)
        samples = nufft.forward(gridding_plan, np.ones((16, 16)))
        nufft.adjoint(gridding_plan, samples)
        nufft.adjoint(gridding_plan, samples)
        metrics = get_global_metrics()
        assert metrics.count("mrfsim_nufft_operations_total", direction="forward") == 1
        assert metrics.count("mrfsim_nufft_operations_total", direction="adjoint") == 2
        assert metrics.nufft_count() == 3


@pytest.mark.integration
class TestReconstruction:
    """Test gridding reconstruction with the spiral density compensation."""

    def test_gaussian_blob_round_trip(self):
        """Test forward then compensated adjoint over all 48 interleaves reproduces a smooth blob."""
        spirals = build_spiral_set(64, 48)
        y, x = np.mgrid[:64, :64] - 32
        blob = np.exp(-(x ** 2 + y ** 2) / (2 * 5.0 ** 2)).astype(np.complex128)
        gridding_plan = nufft.plan(spirals.coords(), 64)
        image = nufft.adjoint(gridding_plan, nufft.forward(gridding_plan, blob), spirals.union_dcf())
        assert _relative(image, blob) < 0.02
