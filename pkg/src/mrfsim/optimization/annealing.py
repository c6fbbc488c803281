"""
Simulated annealing over schedule parameters.

Metropolis acceptance with geometric cooling every ``steps_per_temp`` iterations. Once the
temperature reaches ``min_temp`` the chain is greedy and accepts only non-increasing costs.
Every random draw comes from one generator seeded by ``rng_seed``.
"""

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Union

import numpy as np
import structlog

from ..core.config import AnnealSettings
from ..core.errors import InvalidArgumentError, MRFSimError, OptimizationAbortedError
from .params import ScheduleParams, propose

logger = structlog.get_logger(__name__)

Objective = Callable[[ScheduleParams], float]
TRACE_FIELDS = ("iteration", "temperature", "cost", "accepted", "best_cost")


@dataclass(frozen=True)
class AnnealConfig:
    initial_temp: float = 1.0
    cooling_rate: float = 0.95
    steps_per_temp: int = 100
    min_temp: float = 1e-4
    max_iterations: int = 5000
    step_scale: float = 0.1
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if not (self.initial_temp > 0 and self.min_temp > 0):
            raise InvalidArgumentError("temperatures must be positive",
                                       details={"initial_temp": self.initial_temp, "min_temp": self.min_temp})
        if not 0 < self.cooling_rate < 1:
            raise InvalidArgumentError("cooling_rate must lie in (0, 1)", details={"cooling_rate": self.cooling_rate})
        if self.min_temp > self.initial_temp:
            raise InvalidArgumentError("min_temp must not exceed initial_temp")
        if self.steps_per_temp < 1 or self.max_iterations < 1 or self.step_scale < 0:
            raise InvalidArgumentError("steps_per_temp and max_iterations must be positive, step_scale nonnegative")

    @classmethod
    def from_settings(cls, settings: AnnealSettings, seed: int = 0) -> "AnnealConfig":
        return cls(rng_seed=seed, **settings.model_dump())

    def temperature(self, iteration: int) -> float:
        """Temperature in force at 0-based ``iteration``."""
        return self.initial_temp * self.cooling_rate ** (iteration // self.steps_per_temp)

    def is_greedy(self, temperature: float) -> bool:
        return temperature <= self.min_temp


@dataclass(frozen=True)
class TraceRow:
    iteration: int
    temperature: float
    cost: float
    accepted: bool
    best_cost: float


@dataclass
class AnnealResult:
    best_params: ScheduleParams
    best_cost: float
    initial_cost: float
    trace: List[TraceRow] = field(default_factory=list)
    config: Optional[AnnealConfig] = None

    @property
    def acceptance_rate(self) -> float:
        return sum(row.accepted for row in self.trace) / len(self.trace) if self.trace else 0.0

    def summary(self) -> Dict[str, Any]:
        return {
            "best_cost": self.best_cost,
            "initial_cost": self.initial_cost,
            "iterations": len(self.trace),
            "acceptance_rate": self.acceptance_rate,
            "config": asdict(self.config) if self.config else None,
        }


def write_trace(trace: List[TraceRow], path: Union[str, Path], header: Optional[Dict[str, Any]] = None) -> Path:
    """CSV trace; ``header`` entries are written first as ``# key=value`` comment lines."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        for key, value in (header or {}).items():
            handle.write(f"# {key}={value}\n")
        writer = csv.writer(handle)
        writer.writerow(TRACE_FIELDS)
        for row in trace:
            writer.writerow([row.iteration, repr(row.temperature), repr(row.cost), int(row.accepted),
                             repr(row.best_cost)])
    return path


def _evaluate(objective: Objective, params: ScheduleParams, trace: List[TraceRow], iteration: int) -> float:
    try:
        cost = float(objective(params))
    except (MRFSimError, ArithmeticError, ValueError) as e:
        raise OptimizationAbortedError(f"Objective failed at iteration {iteration}: {e}", trace=list(trace),
                                       details={"iteration": iteration, "error": str(e)}) from e
    if not math.isfinite(cost):
        raise OptimizationAbortedError(f"Objective returned a non-finite cost at iteration {iteration}",
                                       trace=list(trace), details={"iteration": iteration, "cost": cost})
    return cost


def anneal(initial: ScheduleParams, objective: Objective, config: Optional[AnnealConfig] = None) -> AnnealResult:
    """Run one annealing chain and return the best-ever parameters with the full trace."""
    config = config or AnnealConfig()
    rng = np.random.default_rng(config.rng_seed)
    trace: List[TraceRow] = []

    current, current_cost = initial, _evaluate(objective, initial, trace, 0)
    best, best_cost = current, current_cost
    initial_cost = current_cost

    for iteration in range(1, config.max_iterations + 1):
        temperature = config.temperature(iteration - 1)
        candidate = propose(current, rng, config.step_scale, temperature / config.initial_temp)
        cost = _evaluate(objective, candidate, trace, iteration)
        delta = cost - current_cost

        if delta <= 0:
            accepted = True
        elif config.is_greedy(temperature):
            accepted = False
        else:
            accepted = bool(rng.random() < math.exp(-delta / temperature))

        if accepted:
            current, current_cost = candidate, cost
            if cost < best_cost:
                best, best_cost = candidate, cost
        trace.append(TraceRow(iteration, temperature, cost, accepted, best_cost))

    result = AnnealResult(best_params=best, best_cost=best_cost, initial_cost=initial_cost, trace=trace,
                          config=config)
    logger.info("Annealing finished", iterations=config.max_iterations, best_cost=best_cost,
                initial_cost=initial_cost, acceptance_rate=round(result.acceptance_rate, 3))
    return result


def anneal_restarts(initial: ScheduleParams, objective: Objective, config: Optional[AnnealConfig] = None,
                    restarts: int = 1, threads: int = 1) -> AnnealResult:
    """Independent chains seeded ``rng_seed + k``; the lowest best cost wins (ties: lowest k)."""
    config = config or AnnealConfig()
    if restarts < 1:
        raise InvalidArgumentError("restarts must be positive", details={"restarts": restarts})
    configs = [replace(config, rng_seed=config.rng_seed + k) for k in range(restarts)]
    with ThreadPoolExecutor(max_workers=max(1, min(threads, restarts))) as pool:
        results = list(pool.map(lambda c: anneal(initial, objective, c), configs))
    return min(results, key=lambda r: r.best_cost)


def calibrate_initial_temperature(params: ScheduleParams, objective: Objective, rng: np.random.Generator,
                                  target_acceptance: float = 0.8, samples: int = 20,
                                  step_scale: float = 0.1) -> float:
    """T0 such that an average uphill move is accepted with probability ``target_acceptance``."""
    if not 0 < target_acceptance < 1 or samples < 1:
        raise InvalidArgumentError("target_acceptance must lie in (0, 1) and samples be positive",
                                   details={"target_acceptance": target_acceptance, "samples": samples})
    base = float(objective(params))
    deltas = np.array([float(objective(propose(params, rng, step_scale))) - base for _ in range(samples)])
    uphill = deltas[deltas > 0]
    if uphill.size == 0:
        raise InvalidArgumentError("no uphill move found while calibrating the initial temperature",
                                   details={"samples": samples})
    temperature = float(-uphill.mean() / math.log(target_acceptance))
    logger.info("Initial temperature calibrated", temperature=temperature, uphill=int(uphill.size), samples=samples)
    return temperature
