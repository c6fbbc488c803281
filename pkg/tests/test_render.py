"""
Map Export Testing for mrfsim
"""

import numpy as np
import pytest

from mrfsim.cli.render import read_pgm, to_gray8, window_suffix, write_csv, write_pgm
from mrfsim.core.errors import InvalidArgumentError


class TestGrayMapping:
    """Test the window to 8-bit conversion."""

    def test_linear_and_clipped(self):
        """Test window endpoints map to 0 and 255 and values outside clip."""
        values = np.array([[-10.0, 0.0, 50.0], [100.0, 200.0, 25.0]])
        np.testing.assert_array_equal(to_gray8(values, (0.0, 100.0)), [[0, 0, 128], [255, 255, 64]])

    @pytest.mark.parametrize("values,window", [
        (np.zeros((2, 2)), (1.0, 1.0)),
        (np.zeros((2, 2)), (2.0, 1.0)),
        (np.zeros(4), (0.0, 1.0)),
        (np.zeros((2, 2), dtype=complex), (0.0, 1.0)),
    ])
    def test_invalid(self, values, window):
        """Test empty windows and non-image inputs are rejected."""
        with pytest.raises(InvalidArgumentError):
            to_gray8(values, window)


class TestFiles:
    """Test PGM and CSV output."""

    def test_pgm_name_and_content(self, tmp_path):
        """Test the window is part of the file name and pixels survive a read."""
        values = np.arange(12, dtype=float).reshape(3, 4)
        path = write_pgm(values, tmp_path / "t1", (0.0, 11.0))
        assert path.name == f"t1_{window_suffix((0.0, 11.0))}.pgm" == "t1_w0_11.pgm"
        assert path.read_bytes().startswith(b"P5\n4 3\n255\n")
        np.testing.assert_array_equal(read_pgm(path), to_gray8(values, (0.0, 11.0)))

    def test_read_rejects_other_formats(self, tmp_path):
        """Test non-PGM bytes are refused."""
        path = tmp_path / "x.pgm"
        path.write_bytes(b"P2\n1 1\n255\n0")
        with pytest.raises(InvalidArgumentError):
            read_pgm(path)

    def test_csv(self, tmp_path):
        """Test CSV values are written at full precision."""
        values = np.array([[1.0 / 3.0, 2.0], [1e-7, 1500.25]])
        path = write_csv(values, tmp_path / "maps" / "t2.csv")
        np.testing.assert_allclose(np.loadtxt(path, delimiter=","), values, rtol=1e-9)
        with pytest.raises(InvalidArgumentError):
            write_csv(np.zeros(3), tmp_path / "bad.csv")
