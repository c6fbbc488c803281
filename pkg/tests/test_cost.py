"""
Cost Function Testing for mrfsim
"""

import json

import numpy as np
import pytest

from mrfsim.core.errors import InvalidArgumentError, SegmentError
from mrfsim.imaging.phantom import TissuePhantom, TissueSpec, make_eleven_tissue_phantom
from mrfsim.mapping.cost import (
    CostReport,
    TissueError,
    compute_cost,
    compute_segment_rmse,
    correlation_quality_factors,
)
from mrfsim.mapping.matching import QuantMaps
from mrfsim.sequence.epg import TissueSignal, simulate_tissue_signals
from mrfsim.sequence.schedule import SequenceSchedule, default_fisp_schedule


def _truth_maps(phantom, t1_scale=None):
    """Maps that hold each tissue's true values on its segment."""
    t1 = np.zeros(phantom.grid_size)
    t2 = np.zeros(phantom.grid_size)
    for tissue in phantom.tissues:
        segment = phantom.segment(tissue.label)
        t1[segment] = tissue.t1_ms * (t1_scale or {}).get(tissue.label, 1.0)
        t2[segment] = tissue.t2_ms
    return QuantMaps(t1_map=t1, t2_map=t2, m0_map=np.ones(phantom.grid_size), match_mask=t1 > 0)


class TestSegmentRmse:
    """Test per-tissue relative errors."""

    def test_perfect_maps(self, phantom32):
        """Test truth maps have zero error in every tissue."""
        errors = compute_segment_rmse(_truth_maps(phantom32), phantom32)
        assert set(errors) == {"wm", "gm", "csf"}
        assert all(err.total == 0.0 for err in errors.values())

    def test_uniform_bias(self, phantom32):
        """Test a 10% T1 bias in WM gives a relative RMSE of 0.1."""
        errors = compute_segment_rmse(_truth_maps(phantom32, {"wm": 1.1}), phantom32)
        assert errors["wm"].rmse_t1_rel == pytest.approx(0.1)
        assert errors["wm"].rmse_t2_rel == 0.0
        assert errors["gm"].total == 0.0

    def test_unmatched_pixels_count_as_zero(self, phantom32):
        """Test a skipped pixel contributes a 100% error."""
        maps = _truth_maps(phantom32)
        mask = maps.match_mask.copy()
        segment = phantom32.segment("gm")
        mask[segment] = False
        errors = compute_segment_rmse(QuantMaps(maps.t1_map, maps.t2_map, maps.m0_map, mask), phantom32, ["gm"])
        assert errors["gm"].rmse_t1_rel == pytest.approx(1.0)
        assert errors["gm"].rmse_t2_rel == pytest.approx(1.0)

    def test_empty_segment(self):
        """Test an absent tissue is a segment error."""
        phantom = TissuePhantom((TissueSpec("wm", 800.0, 40.0), TissueSpec("gm", 1400.0, 60.0)),
                                np.stack([np.ones((16, 16)), np.zeros((16, 16))]))
        with pytest.raises(SegmentError):
            compute_segment_rmse(_truth_maps(phantom), phantom)

    def test_void_and_grid_checks(self, phantom32):
        """Test void tissues and mismatched grids are refused."""
        eleven = make_eleven_tissue_phantom(32, supersampling=2)
        with pytest.raises(InvalidArgumentError):
            compute_segment_rmse(_truth_maps(eleven), eleven, ["skull"])
        with pytest.raises(InvalidArgumentError):
            compute_segment_rmse(_truth_maps(make_eleven_tissue_phantom(48, 1)), phantom32)


class TestComputeCost:
    """Test the scalar cost and its time scaling."""

    @pytest.fixture
    def errors(self):
        return {"wm": TissueError(0.1, 0.2), "gm": TissueError(0.05, 0.05), "csf": TissueError(0.0, 0.3)}

    def test_scaled(self, errors):
        """Test error term times scan_time / time_ref."""
        report = compute_cost(errors, 2880.0, time_ref_ms=5760.0)
        assert report.error_term == pytest.approx(0.7)
        assert report.total_cost == pytest.approx(0.35)
        assert report.penalty_factor == pytest.approx(2.0)

    def test_literal(self, errors):
        """Test the literal formulation divides by the time ratio."""
        report = compute_cost(errors, 2880.0, time_ref_ms=5760.0, formulation="literal")
        assert report.total_cost == pytest.approx(1.4)

    def test_weights(self, errors):
        """Test weighting and zero-weight tissues."""
        report = compute_cost(errors, 5760.0, weights={"wm": 2.0, "gm": 0.0, "csf": 1.0})
        assert report.total_cost == pytest.approx(0.9)
        report = compute_cost({"wm": errors["wm"]}, 5760.0, weights={"wm": 1.0, "fat": 0.0})
        assert report.total_cost == pytest.approx(0.3)

    def test_schedule_scan_time(self, errors):
        """Test a schedule supplies its own scan time."""
        schedule = SequenceSchedule.constant(480, 30.0, 12.0)
        report = compute_cost(errors, schedule)
        assert report.scan_time_ms == pytest.approx(5760.0)
        assert report.total_cost == pytest.approx(0.7)

    def test_quality_factor_term(self, errors):
        """Test the noise quality term is added before time scaling."""
        report = compute_cost(errors, 5760.0, noise_qf={"wm": 1.0, "gm": 3.0, "csf": 0.0}, qf_weight=2.0)
        assert report.qf_term == pytest.approx(2.0 * (0.5 + 0.25 + 1.0))
        assert report.total_cost == pytest.approx(0.7 + 3.5)

    def test_zero_errors(self):
        """Test zero errors cost nothing unless the quality-factor term is switched on."""
        zero = {label: TissueError(0.0, 0.0) for label in ("wm", "gm", "csf")}
        assert compute_cost(zero, 2880.0).total_cost == 0.0
        assert compute_cost(zero, 2880.0, noise_qf={"wm": 1.0}, qf_weight=0.0).total_cost == 0.0
        report = compute_cost(zero, 2880.0, noise_qf={"wm": 1.0, "gm": 1.0, "csf": 1.0}, qf_weight=1.0)
        assert report.error_term == 0.0
        assert report.total_cost == pytest.approx(1.5 * 0.5)

    @pytest.mark.parametrize("formulation", ["scaled", "literal"])
    def test_monotone_in_every_error(self, errors, formulation):
        """Test raising any single RMSE component never lowers the cost."""
        qf = {"wm": 2.0, "gm": 1.0, "csf": 0.5}
        base = compute_cost(errors, 4000.0, formulation=formulation, noise_qf=qf, qf_weight=0.3).total_cost
        for label, err in errors.items():
            for bumped in (TissueError(err.rmse_t1_rel + 0.01, err.rmse_t2_rel),
                           TissueError(err.rmse_t1_rel, err.rmse_t2_rel + 0.01)):
                cost = compute_cost({**errors, label: bumped}, 4000.0, formulation=formulation,
                                    noise_qf=qf, qf_weight=0.3).total_cost
                assert cost > base

    @pytest.mark.parametrize("kwargs", [
        {"schedule": 0.0},
        {"schedule": float("nan")},
        {"schedule": 100.0, "time_ref_ms": 0.0},
        {"schedule": 100.0, "formulation": "ratio"},
        {"schedule": 100.0, "weights": {"wm": -1.0}},
        {"schedule": 100.0, "weights": {"wm": 0.0}},
        {"schedule": 100.0, "weights": {"fat": 1.0}},
    ])
    def test_invalid(self, errors, kwargs):
        """Test argument validation."""
        with pytest.raises(InvalidArgumentError):
            compute_cost(errors, **kwargs)

    def test_report_serializes(self, tmp_path, errors):
        """Test the report writes readable JSON."""
        report = compute_cost(errors, 2880.0)
        data = json.loads(report.save(tmp_path / "cost.json").read_text())
        assert data["errors"]["wm"] == {"rmse_t1_rel": 0.1, "rmse_t2_rel": 0.2}
        assert data["total_cost"] == pytest.approx(report.total_cost)
        assert isinstance(report, CostReport)


class TestQualityFactors:
    """Test the correlation separability proxy."""

    def test_orthogonal_and_identical(self):
        """Test orthogonal signals keep their norm and identical ones score zero."""
        factors = correlation_quality_factors([TissueSignal("a", [3, 0]), TissueSignal("b", [0, 2])])
        assert factors == {"a": pytest.approx(3.0), "b": pytest.approx(2.0)}
        same = correlation_quality_factors([TissueSignal("a", [1, 1]), TissueSignal("b", [2, 2])])
        assert same["a"] == pytest.approx(0.0, abs=1e-12)

    def test_void_signal(self):
        """Test a zero signal gets a zero factor."""
        factors = correlation_quality_factors([TissueSignal("a", [1, 0]), TissueSignal("skull", [0, 0])])
        assert factors["skull"] == 0.0
        assert factors["a"] == pytest.approx(1.0)

    def test_default_schedule_tissues(self, phantom32):
        """Test WM, GM and CSF get positive factors under the default train, CSF the most separable."""
        signals = simulate_tissue_signals(phantom32.tissues, default_fisp_schedule())
        factors = correlation_quality_factors(signals)
        assert set(factors) == {"wm", "gm", "csf"}
        assert all(value > 0 for value in factors.values())
        separability = {s.label: factors[s.label] / np.linalg.norm(s.signal) for s in signals}
        assert max(separability, key=separability.get) == "csf"
        assert separability["wm"] == pytest.approx(separability["gm"], rel=0.5)
