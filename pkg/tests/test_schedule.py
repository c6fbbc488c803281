"""
Sequence Schedule Testing for mrfsim
"""

import json

import numpy as np
import pytest

from mrfsim.core.errors import InvalidArgumentError, TensorFormatError
from mrfsim.sequence.schedule import (
    InversionSpec,
    SequenceSchedule,
    default_fisp_schedule,
    load_schedule,
    rf_phase_train,
)


class TestDefaultSchedule:
    """Test the built-in FISP train."""

    def test_bounds(self):
        """Test flips, TR and TE stay within the documented ranges."""
        schedule = default_fisp_schedule(480)
        assert schedule.n_timepoints == 480
        assert schedule.flip_deg.min() >= 5.0
        assert schedule.flip_deg.max() <= 70.0 + 1e-9
        assert schedule.tr_ms.min() >= 11.0 - 1e-9
        assert schedule.tr_ms.max() <= 15.0 + 1e-9
        np.testing.assert_allclose(schedule.te_ms, schedule.tr_ms.min() / 2)
        assert schedule.inversion.enabled

    def test_scan_time(self):
        """Test scan time is TI plus the TR sum, TI only when inversion is on."""
        schedule = default_fisp_schedule(96)
        assert schedule.scan_time_ms == pytest.approx(schedule.inversion.ti_ms + schedule.tr_ms.sum())
        plain = default_fisp_schedule(96, inversion=False)
        assert plain.scan_time_ms == pytest.approx(plain.tr_ms.sum())

    def test_flip_scale_caps_at_90(self):
        """Test scaled flips never exceed 90 degrees."""
        assert default_fisp_schedule(64, flip_scale=3.0).flip_deg.max() <= 90.0

    def test_alternating_phase(self):
        """Test the alternating RF phase train."""
        np.testing.assert_array_equal(rf_phase_train(4, "alternating"), [0.0, 180.0, 0.0, 180.0])
        with pytest.raises(InvalidArgumentError):
            rf_phase_train(4, "random")

    def test_invalid_arguments(self):
        """Test length and scale validation."""
        with pytest.raises(InvalidArgumentError):
            default_fisp_schedule(0)
        with pytest.raises(InvalidArgumentError):
            default_fisp_schedule(10, flip_scale=0.0)


class TestScheduleValidation:
    """Test train validation."""

    def test_constant(self):
        """Test the flat train defaults TE to TR/2 without inversion."""
        schedule = SequenceSchedule.constant(5, 30.0, 12.0)
        np.testing.assert_array_equal(schedule.te_ms, 6.0)
        assert not schedule.inversion.enabled
        assert schedule.scan_time_ms == pytest.approx(60.0)

    @pytest.mark.parametrize("kwargs", [
        {"flip_deg": [10, 20], "tr_ms": [12], "te_ms": [6, 6]},
        {"flip_deg": [95], "tr_ms": [12], "te_ms": [6]},
        {"flip_deg": [10], "tr_ms": [6], "te_ms": [6]},
        {"flip_deg": [10], "tr_ms": [12], "te_ms": [-1]},
        {"flip_deg": [np.nan], "tr_ms": [12], "te_ms": [6]},
        {"flip_deg": [], "tr_ms": [], "te_ms": []},
    ])
    def test_rejects_invalid_trains(self, kwargs):
        """Test malformed trains raise argument errors."""
        with pytest.raises(InvalidArgumentError):
            SequenceSchedule(**kwargs)

    def test_rejects_negative_ti(self):
        """Test inversion time validation."""
        with pytest.raises(InvalidArgumentError):
            SequenceSchedule([10], [12], [6], inversion=InversionSpec(True, -1.0))

    def test_hash_tracks_content(self):
        """Test the content hash changes with any train value."""
        a = SequenceSchedule.constant(4, 30.0, 12.0)
        b = SequenceSchedule.constant(4, 30.0, 12.5)
        assert a.content_hash() == SequenceSchedule.constant(4, 30.0, 12.0).content_hash()
        assert a.content_hash() != b.content_hash()


class TestSchedulePersistence:
    """Test JSON documents."""

    def test_save_load(self, tmp_path):
        """Test a saved schedule reloads with the same hash."""
        schedule = default_fisp_schedule(32, rf_phase_mode="alternating")
        loaded = load_schedule(schedule.save(tmp_path / "schedule.json"))
        np.testing.assert_array_equal(loaded.flip_deg, schedule.flip_deg)
        np.testing.assert_array_equal(loaded.rf_phase_deg, schedule.rf_phase_deg)
        assert loaded.content_hash() == schedule.content_hash()

    def test_hash_mismatch(self, tmp_path):
        """Test an edited train with a stale hash is refused."""
        data = SequenceSchedule.constant(4, 30.0, 12.0).to_dict()
        data["flip_deg"][0] = 31.0
        path = tmp_path / "edited.json"
        path.write_text(json.dumps(data))
        with pytest.raises(TensorFormatError):
            load_schedule(path)

    def test_invalid_documents(self, tmp_path):
        """Test missing, unparseable, incomplete and invalid documents."""
        with pytest.raises(TensorFormatError):
            load_schedule(tmp_path / "absent.json")
        (tmp_path / "broken.json").write_text("{")
        with pytest.raises(TensorFormatError):
            load_schedule(tmp_path / "broken.json")
        (tmp_path / "partial.json").write_text(json.dumps({"flip_deg": [10]}))
        with pytest.raises(TensorFormatError):
            load_schedule(tmp_path / "partial.json")
        (tmp_path / "invalid.json").write_text(json.dumps({"flip_deg": [10], "tr_ms": [5], "te_ms": [6]}))
        with pytest.raises(TensorFormatError):
            load_schedule(tmp_path / "invalid.json")
