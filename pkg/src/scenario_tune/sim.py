"""Closed-loop simulation engine.

A *plant* is any object with

* ``T`` (number of control steps), ``n_x``, ``state_names``, ``input_names``
* ``step(x, u, w) -> x_next``
* ``constraints``: sequence of callables ``g(x, u, w) -> float`` (``<= 0`` is safe)
* ``sample_scenario(rng) -> Scenario`` and ``nominal_scenario() -> Scenario``

and a *controller* is a callable ``controller(x, theta) -> u``. Plants and
controllers are treated as immutable, which is what makes matrix population
safe to run in worker processes.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import rng as rngmod

# Sentinel for G when there is nothing to violate, and penalty values used for
# diverged rollouts inside the tuning loop.
NO_CONSTRAINT_G = -1e9
DIVERGED_F = 1e9
DIVERGED_G = 1e9


class SimulationDiverged(RuntimeError):
    def __init__(self, step: int, msg: str = ""):
        self.step = step
        super().__init__(msg or f"simulation diverged at step {step}")

    def __reduce__(self):
        return (SimulationDiverged, (self.step, str(self)))


class CellDiverged(SimulationDiverged):
    def __init__(self, scenario: int, candidate: int, step: int):
        self.scenario = scenario
        self.candidate = candidate
        super().__init__(step, f"rollout diverged for candidate {candidate}, scenario {scenario} (step {step})")

    def __reduce__(self):
        return (CellDiverged, (self.scenario, self.candidate, self.step))


@dataclass(frozen=True, eq=False)
class Scenario:
    x0: np.ndarray
    w_seq: np.ndarray  # shape (T, n_w)

    @property
    def T(self) -> int:
        return self.w_seq.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Scenario):
            return NotImplemented
        return np.array_equal(self.x0, other.x0) and np.array_equal(self.w_seq, other.w_seq)


@dataclass(frozen=True, eq=False)
class Trajectory:
    states: np.ndarray  # (T+1, n_x)
    inputs: np.ndarray  # (T, n_u)

    @property
    def T(self) -> int:
        return self.inputs.shape[0]


@dataclass(frozen=True)
class Terminal:
    """F = phi(x(T))."""
    phi: Callable


@dataclass(frozen=True)
class Average:
    """F = (1/T) sum_k stage_cost(x(k), u(k), w(k))."""
    stage_cost: Callable


PerfSpec = Terminal | Average


@dataclass(frozen=True)
class Problem:
    """Everything needed to score a tuning parameter on a scenario."""
    name: str
    plant: object
    controller: Callable
    space: object
    perf: object
    seed_theta: Optional[tuple] = None
    report_state: int = 0


@dataclass
class EvalMatrices:
    F: np.ndarray  # (N scenarios, N_theta candidates)
    G: np.ndarray
    candidates: list
    meta: dict = field(default_factory=dict)
    states: Optional[np.ndarray] = None  # (N_theta, N, T+1, n_x) when kept

    @property
    def shape(self) -> tuple:
        return self.F.shape


def rollout(plant, controller, theta, scenario: Scenario) -> Trajectory:
    T = scenario.T
    x = np.asarray(scenario.x0, dtype=float)
    states = np.empty((T + 1, x.shape[0]))
    states[0] = x
    inputs = []
    for k in range(T):
        u = np.asarray(controller(x, theta), dtype=float)
        x = plant.step(x, u, scenario.w_seq[k])
        if not np.all(np.isfinite(x)):
            raise SimulationDiverged(k)
        states[k + 1] = x
        inputs.append(u)
    if inputs:
        inputs = np.vstack(inputs)
    else:
        inputs = np.empty((0, 0))
    return Trajectory(states, inputs)


def perf_F(traj: Trajectory, spec, scenario: Scenario) -> float:
    if isinstance(spec, Terminal):
        return float(spec.phi(traj.states[-1]))
    if isinstance(spec, Average):
        T = traj.T
        if T == 0:
            raise ValueError("average performance is undefined for an empty horizon")
        return math.fsum(
            float(spec.stage_cost(traj.states[k], traj.inputs[k], scenario.w_seq[k])) for k in range(T)
        ) / T
    raise TypeError(f"unknown performance spec {spec!r}")


def violation_G(traj: Trajectory, constraints: Sequence[Callable], scenario: Scenario) -> float:
    """Worst constraint value over k = 0..T-1; ``NO_CONSTRAINT_G`` if there is nothing to take a max over."""
    worst = NO_CONSTRAINT_G
    for k in range(traj.T):
        x, u, w = traj.states[k], traj.inputs[k], scenario.w_seq[k]
        for g in constraints:
            worst = max(worst, float(g(x, u, w)))
    return worst


def evaluate(problem: Problem, theta, scenario: Scenario, penalize: bool = False) -> tuple[float, float]:
    """(F, G) for one rollout. Diverged rollouts raise unless ``penalize``."""
    try:
        traj = rollout(problem.plant, problem.controller, theta, scenario)
    except SimulationDiverged:
        if penalize:
            return DIVERGED_F, DIVERGED_G
        raise
    return perf_F(traj, problem.perf, scenario), violation_G(traj, problem.plant.constraints, scenario)


def sample_scenarios(plant, N: int, master_seed: int, tag: str = rngmod.SCENARIO, key: tuple = ()) -> list[Scenario]:
    """N i.i.d. scenarios; scenario i comes from substream (master_seed, tag, *key, i)."""
    if N < 1:
        raise ValueError("N must be >= 1")
    return [plant.sample_scenario(rngmod.substream(master_seed, tag, *key, i)) for i in range(N)]


def _column(args):
    plant, controller, perf, j, theta, scenarios, keep_states = args
    F = np.empty(len(scenarios))
    G = np.empty(len(scenarios))
    states = [] if keep_states else None
    for i, sc in enumerate(scenarios):
        try:
            traj = rollout(plant, controller, theta, sc)
        except SimulationDiverged as exc:
            raise CellDiverged(i, j, exc.step) from None
        F[i] = perf_F(traj, perf, sc)
        G[i] = violation_G(traj, plant.constraints, sc)
        if keep_states:
            states.append(traj.states)
    return F, G, (np.stack(states) if keep_states else None)


def populate_matrices(plant, controller, perf, candidates: Sequence, scenarios: Sequence[Scenario],
                      threads: int = 1, keep_states: bool = False) -> EvalMatrices:
    """Fill [F]_ij = F(theta_j, delta_i) and [G]_ij = G(theta_j, delta_i).

    Columns are computed independently (in worker processes when
    ``threads > 1``) and assembled by index, so the result does not depend on
    the schedule.
    """
    if not candidates or not scenarios:
        raise ValueError("need at least one candidate and one scenario")
    jobs = [(plant, controller, perf, j, th, list(scenarios), keep_states) for j, th in enumerate(candidates)]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(threads, len(jobs))) as ex:
            cols = list(ex.map(_column, jobs))
    else:
        cols = [_column(job) for job in jobs]
    F = np.column_stack([c[0] for c in cols])
    G = np.column_stack([c[1] for c in cols])
    states = np.stack([c[2] for c in cols]) if keep_states else None
    return EvalMatrices(F, G, list(candidates), {"n_scenarios": len(scenarios), "n_candidates": len(candidates)}, states)
