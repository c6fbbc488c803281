"""
Simulated Annealing Testing for mrfsim

Uses cheap analytic objectives over ScheduleParams so chains can run thousands of steps.
"""

import csv

import numpy as np
import pytest

from mrfsim.core.config import AnnealSettings
from mrfsim.core.errors import InvalidArgumentError, OptimizationAbortedError, SegmentError
from mrfsim.optimization.annealing import (
    AnnealConfig,
    anneal,
    anneal_restarts,
    calibrate_initial_temperature,
    write_trace,
)
from mrfsim.optimization.params import ScheduleParams


def quadratic(target):
    """Mean squared distance of the normalized controls from ``target``."""
    def objective(params):
        return float(np.mean((params.as_unit_vector() - target) ** 2))
    return objective


class TestAnnealConfig:
    """Test the cooling schedule and validation."""

    def test_temperature_steps(self):
        """Test geometric cooling every steps_per_temp iterations."""
        config = AnnealConfig(initial_temp=1.0, cooling_rate=0.5, steps_per_temp=10)
        assert config.temperature(0) == 1.0
        assert config.temperature(9) == 1.0
        assert config.temperature(10) == 0.5
        assert config.temperature(25) == 0.25

    def test_from_settings(self):
        """Test settings and seed carry over."""
        config = AnnealConfig.from_settings(AnnealSettings(max_iterations=7), seed=9)
        assert config.max_iterations == 7
        assert config.rng_seed == 9

    @pytest.mark.parametrize("kwargs", [
        {"initial_temp": 0.0},
        {"cooling_rate": 1.0},
        {"initial_temp": 1e-3, "min_temp": 1e-2},
        {"steps_per_temp": 0},
        {"step_scale": -1.0},
    ])
    def test_invalid(self, kwargs):
        """Test validation of every field."""
        with pytest.raises(InvalidArgumentError):
            AnnealConfig(**kwargs)


class TestAnneal:
    """Test chain behaviour."""

    @pytest.fixture
    def start(self):
        return ScheduleParams.midpoint(4, 16)

    def test_best_cost_is_monotone(self, start):
        """Test the best-so-far trace never increases."""
        result = anneal(start, quadratic(np.linspace(0.1, 0.9, 8)), AnnealConfig(
            initial_temp=0.01, steps_per_temp=20, max_iterations=300, rng_seed=2))
        best = [row.best_cost for row in result.trace]
        assert len(result.trace) == 300
        assert [row.iteration for row in result.trace[:3]] == [1, 2, 3]
        assert all(b <= a for a, b in zip(best, best[1:]))
        assert best[-1] == result.best_cost <= result.initial_cost
        assert quadratic(np.linspace(0.1, 0.9, 8))(result.best_params) == pytest.approx(result.best_cost)

    def test_greedy_below_min_temp(self, start):
        """Test no uphill move is accepted once the temperature is at min_temp."""
        result = anneal(start, quadratic(np.full(8, 0.2)), AnnealConfig(
            initial_temp=1e-3, min_temp=1e-3, max_iterations=200, step_scale=0.3, rng_seed=1))
        current = result.initial_cost
        for row in result.trace:
            if row.accepted:
                assert row.cost <= current
                current = row.cost
            else:
                assert row.cost > current

    def test_hot_chain_accepts_uphill(self, start):
        """Test Metropolis acceptance of worse moves at high temperature."""
        result = anneal(start, quadratic(np.full(8, 0.5)), AnnealConfig(
            initial_temp=10.0, cooling_rate=0.99, max_iterations=100, rng_seed=0))
        assert result.acceptance_rate > 0.9

    def test_seed_reproducible(self, start):
        """Test identical seeds give identical traces."""
        config = AnnealConfig(initial_temp=0.01, max_iterations=50, rng_seed=4)
        objective = quadratic(np.full(8, 0.3))
        assert anneal(start, objective, config).trace == anneal(start, objective, config).trace

    def test_objective_failure_aborts(self, start):
        """Test a failing objective stops the chain with its partial trace."""
        calls = {"n": 0}

        def failing(params):
            calls["n"] += 1
            if calls["n"] == 5:
                raise SegmentError("empty segment")
            return 1.0

        with pytest.raises(OptimizationAbortedError) as exc:
            anneal(start, failing, AnnealConfig(max_iterations=20))
        assert len(exc.value.trace) == 3
        assert exc.value.details["iteration"] == 4

    def test_non_finite_cost_aborts(self, start):
        """Test NaN costs abort."""
        with pytest.raises(OptimizationAbortedError):
            anneal(start, lambda params: float("nan"), AnnealConfig(max_iterations=3))

    def test_restarts_pick_lowest(self, start):
        """Test the best of several seeded chains is returned."""
        objective = quadratic(np.linspace(0.2, 0.8, 8))
        config = AnnealConfig(initial_temp=0.01, max_iterations=100, rng_seed=10)
        combined = anneal_restarts(start, objective, config, restarts=3, threads=2)
        singles = [anneal(start, objective, AnnealConfig(initial_temp=0.01, max_iterations=100, rng_seed=10 + k))
                   for k in range(3)]
        assert combined.best_cost == min(r.best_cost for r in singles)
        with pytest.raises(InvalidArgumentError):
            anneal_restarts(start, objective, config, restarts=0)


class TestConvergence:
    """Test the chain finds the minimum of a smooth objective."""

    @pytest.mark.slow
    def test_toy_quadratic_across_seeds(self):
        """Test best parameters land within 0.01 RMS of the optimum for 20 seeds."""
        start = ScheduleParams.midpoint(4, 16)
        for seed in range(20):
            target = np.random.default_rng(100 + seed).uniform(0.1, 0.9, 8)
            config = AnnealConfig(initial_temp=1e-4, cooling_rate=0.9, steps_per_temp=100, min_temp=1e-7,
                                  max_iterations=5000, step_scale=0.2, rng_seed=seed)
            result = anneal(start, quadratic(target), config)
            rms = float(np.sqrt(np.mean((result.best_params.as_unit_vector() - target) ** 2)))
            assert rms <= 0.01, f"seed {seed}: rms {rms}"


class TestTraceAndCalibration:
    """Test trace files and initial temperature calibration."""

    def test_write_trace(self, tmp_path):
        """Test header comments precede the CSV rows."""
        result = anneal(ScheduleParams.midpoint(2, 8), quadratic(np.full(4, 0.1)), AnnealConfig(max_iterations=5))
        path = write_trace(result.trace, tmp_path / "trace.csv", header={"seed": 0})
        lines = path.read_text().splitlines()
        assert lines[0] == "# seed=0"
        rows = list(csv.DictReader(line for line in lines if not line.startswith("#")))
        assert len(rows) == 5
        assert float(rows[-1]["best_cost"]) == pytest.approx(result.best_cost)

    def test_calibrate(self):
        """Test the calibrated T0 accepts an average uphill move with the target probability."""
        params = ScheduleParams.midpoint(4, 16)
        temperature = calibrate_initial_temperature(params, quadratic(np.full(8, 0.5)), np.random.default_rng(0))
        assert temperature > 0
        with pytest.raises(InvalidArgumentError):
            calibrate_initial_temperature(params, lambda p: 1.0, np.random.default_rng(0))
