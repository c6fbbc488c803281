"""
Dictionary Testing for mrfsim
"""

import numpy as np
import pytest

from mrfsim.core.errors import InvalidArgumentError, TensorFormatError
from mrfsim.core.tensorfile import TensorFile
from mrfsim.mapping.matching import best_entries
from mrfsim.sequence.dictionary import (
    build_dictionary,
    coarse_grid,
    feasible_entries,
    grid_from_ranges,
    load_dictionary,
    tissue_anchors,
)
from mrfsim.sequence.epg import simulate_epg


class TestGrids:
    """Test grid construction."""

    def test_ranges_inclusive_when_hit(self):
        """Test stop is included only when the step lands on it."""
        np.testing.assert_allclose(grid_from_ranges([(100.0, 20.0, 200.0)]), [100, 120, 140, 160, 180, 200])
        assert grid_from_ranges([(2.0, 10.0, 100.0)])[-1] == 92.0

    def test_ranges_merge(self):
        """Test overlapping ranges are merged without duplicates."""
        grid = grid_from_ranges([(10.0, 10.0, 50.0), (50.0, 25.0, 100.0)])
        np.testing.assert_allclose(grid, [10, 20, 30, 40, 50, 75, 100])

    def test_invalid_ranges(self):
        """Test empty and reversed ranges."""
        with pytest.raises(InvalidArgumentError):
            grid_from_ranges([])
        with pytest.raises(InvalidArgumentError):
            grid_from_ranges([(10.0, 0.0, 20.0)])
        with pytest.raises(InvalidArgumentError):
            coarse_grid((100.0, 10.0), 5)

    def test_coarse_grid(self):
        """Test log spacing rounded to milliseconds."""
        grid = coarse_grid((100.0, 3000.0), 10)
        assert grid[0] == 100.0
        assert grid[-1] == 3000.0
        assert np.all(np.diff(np.log(grid)) > 0)

    def test_feasible_entries(self):
        """Test t2 <= t1 filtering, anchors and ordering."""
        entries = feasible_entries([50.0, 100.0], [40.0, 80.0], extra_entries=[(800.0, 40.0), (50.0, 40.0)])
        np.testing.assert_array_equal(entries, [[50, 40], [100, 40], [100, 80], [800, 40]])
        with pytest.raises(InvalidArgumentError):
            feasible_entries([10.0], [20.0])
        with pytest.raises(InvalidArgumentError):
            feasible_entries([20.0, 10.0], [5.0])


class TestBuildDictionary:
    """Test dictionary simulation and persistence."""

    @pytest.fixture(scope="class")
    def dictionary(self, phantom32, schedule24):
        return build_dictionary(coarse_grid((100.0, 3000.0), 8), coarse_grid((10.0, 600.0), 6), schedule24,
                                extra_entries=tissue_anchors(phantom32.tissues), chunk_size=7)

    def test_rows_are_unit_norm(self, dictionary, schedule24):
        """Test every row is normalized and the norm is kept."""
        np.testing.assert_allclose(np.linalg.norm(dictionary.signals, axis=1), 1.0)
        raw = simulate_epg(dictionary.t1, dictionary.t2, schedule24)
        np.testing.assert_allclose(dictionary.signals * dictionary.norm_scale[:, None], raw, atol=1e-12)

    def test_entries_match_themselves(self, dictionary):
        """Test matching every dictionary signal returns its own entry."""
        index, score = best_entries(dictionary.signals, dictionary)
        np.testing.assert_array_equal(index, np.arange(dictionary.n_entries))
        np.testing.assert_allclose(score, 1.0)

    def test_anchors_present(self, dictionary):
        """Test tissue relaxation pairs are exact entries."""
        for t1, t2 in [(800.0, 40.0), (1400.0, 60.0), (3000.0, 500.0)]:
            index = dictionary.index_of(t1, t2)
            assert dictionary.entries[index].tolist() == [t1, t2]
        with pytest.raises(InvalidArgumentError):
            dictionary.index_of(1.0, 1.0)

    def test_thread_count_does_not_matter(self, dictionary, schedule24, phantom32):
        """Test concurrent chunk simulation is deterministic."""
        threaded = build_dictionary(coarse_grid((100.0, 3000.0), 8), coarse_grid((10.0, 600.0), 6), schedule24,
                                    extra_entries=tissue_anchors(phantom32.tissues), chunk_size=5, threads=4)
        np.testing.assert_array_equal(threaded.signals, dictionary.signals)
        np.testing.assert_array_equal(threaded.entries, dictionary.entries)

    def test_save_load(self, tmp_path, dictionary, schedule24):
        """Test persistence keeps entries, norms and the schedule hash."""
        loaded = load_dictionary(dictionary.save(tmp_path / "dict.mrft"))
        np.testing.assert_array_equal(loaded.entries, dictionary.entries)
        np.testing.assert_array_equal(loaded.norm_scale, dictionary.norm_scale)
        assert loaded.schedule_hash == schedule24.content_hash()

    def test_load_rejects_real_payload(self, tmp_path):
        """Test a real-valued payload is not a dictionary."""
        TensorFile(np.zeros((1, 3)), meta={"t1_list": [1.0], "t2_list": [1.0], "schedule_hash": "x",
                                          "n_timepoints": 3}).save(tmp_path / "bad.mrft")
        with pytest.raises(TensorFormatError):
            load_dictionary(tmp_path / "bad.mrft")

