import math
import pickle
from dataclasses import dataclass

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scenario_tune.plants import reactor_problem
from scenario_tune.plants.toy import AbsBound, LinearFeedback, QuadraticCost, ToyPlant
from scenario_tune.sim import (NO_CONSTRAINT_G, Average, CellDiverged, Scenario, SimulationDiverged, Terminal,
                               Trajectory, perf_F, populate_matrices, rollout, sample_scenarios, violation_G)


@dataclass(frozen=True)
class Integrator:
    """x+ = x + u + w."""
    T: int = 2
    n_x = 1

    def step(self, x, u, w):
        return x + u + w

    constraints = ()


def half_gain(x, theta):
    return np.array([-0.5 * x[0]])


def test_rollout_hand_recursion():
    sc = Scenario(np.array([1.0]), np.zeros((2, 1)))
    traj = rollout(Integrator(), half_gain, (), sc)
    assert traj.states[:, 0].tolist() == [1.0, 0.5, 0.25]
    assert traj.inputs.shape == (2, 1)


def test_rollout_empty_horizon():
    sc = Scenario(np.array([1.0]), np.zeros((0, 1)))
    traj = rollout(Integrator(), half_gain, (), sc)
    assert traj.states.tolist() == [[1.0]]
    assert traj.T == 0
    with pytest.raises(ValueError):
        perf_F(traj, Average(lambda x, u, w: 1.0), sc)


def test_rollout_divergence_carries_step():
    def explode(x, theta):
        return np.array([np.inf if x[0] < 0.4 else 0.0])
    sc = Scenario(np.array([1.0]), np.array([[-0.3], [-0.3], [0.0]]))
    with pytest.raises(SimulationDiverged) as exc:
        rollout(Integrator(), explode, (), sc)
    assert exc.value.step == 2
    e = pickle.loads(pickle.dumps(CellDiverged(3, 1, 7)))
    assert (e.scenario, e.candidate, e.step) == (3, 1, 7)


def test_perf_examples():
    sc = Scenario(np.array([1.0]), np.zeros((2, 1)))
    traj = rollout(Integrator(), half_gain, (), sc)
    assert perf_F(traj, Terminal(lambda x: x[0] ** 2), sc) == 0.0625
    assert perf_F(traj, Average(lambda x, u, w: 3.5), sc) == 3.5


def test_violation_examples():
    sc = Scenario(np.array([1.0]), np.zeros((2, 1)))
    traj = rollout(Integrator(), half_gain, (), sc)
    assert violation_G(traj, [lambda x, u, w: x[0] - 1.0], sc) == 0.0
    assert violation_G(traj, [], sc) == NO_CONSTRAINT_G
    flat = Trajectory(np.full((4, 1), 324.0), np.zeros((3, 1)))
    sc3 = Scenario(np.array([324.0]), np.zeros((3, 1)))
    assert violation_G(flat, [lambda x, u, w: x[0] - 326, lambda x, u, w: 322 - x[0]], sc3) == -2.0


@given(st.floats(0.0, 2.0), st.integers(0, 1000))
@settings(max_examples=30, deadline=None)
def test_violation_monotone_and_average_linear(theta, seed):
    plant = ToyPlant()
    sc = plant.sample_scenario(np.random.default_rng(seed))
    traj = rollout(plant, LinearFeedback(), (theta,), sc)
    g1 = violation_G(traj, [AbsBound(1.5)], sc)
    g2 = violation_G(traj, [AbsBound(1.5), AbsBound(1.0)], sc)
    assert g2 >= g1
    a, b = QuadraticCost(0.1), QuadraticCost(0.3)
    both = perf_F(traj, Average(lambda x, u, w: a(x, u, w) + b(x, u, w)), sc)
    assert both == pytest.approx(perf_F(traj, Average(a), sc) + perf_F(traj, Average(b), sc), rel=1e-12)


def test_sample_scenarios_deterministic_and_in_box():
    p = reactor_problem()
    a = sample_scenarios(p.plant, 3, 11)
    b = sample_scenarios(p.plant, 3, 11)
    assert a == b
    assert a[0] != a[1]
    w = np.concatenate([s.w_seq for s in sample_scenarios(p.plant, 50, 0)])
    assert np.all(np.abs(w[:, 0]) <= 0.5) and np.all(np.abs(w[:, 1:]) <= 0.05)


def test_disturbance_mean_clt():
    plant = ToyPlant(T=1000)
    w = np.concatenate([s.w_seq[:, 0] for s in sample_scenarios(plant, 100, 3)])  # 1e5 draws
    sigma = 0.1 / math.sqrt(3.0)
    assert abs(w.mean()) <= 3 * sigma / math.sqrt(w.size)


def test_populate_matrices_small():
    plant = ToyPlant()
    scs = sample_scenarios(plant, 4, 5)
    m = populate_matrices(plant, LinearFeedback(), Average(QuadraticCost()), [(1.0,)], scs[:1])
    traj = rollout(plant, LinearFeedback(), (1.0,), scs[0])
    assert m.F.shape == (1, 1)
    assert m.F[0, 0] == perf_F(traj, Average(QuadraticCost()), scs[0])
    assert m.G[0, 0] == violation_G(traj, plant.constraints, scs[0])
    m = populate_matrices(plant, LinearFeedback(), Average(QuadraticCost()), [(0.3,), (1.2,), (0.3,)], scs)
    assert np.array_equal(m.F[:, 0], m.F[:, 2]) and np.array_equal(m.G[:, 0], m.G[:, 2])


def test_populate_schedule_independent():
    plant = ToyPlant()
    scs = sample_scenarios(plant, 20, 9)
    cands = [(0.2,), (0.9,), (1.6,)]
    a = populate_matrices(plant, LinearFeedback(), Average(QuadraticCost()), cands, scs, threads=1)
    b = populate_matrices(plant, LinearFeedback(), Average(QuadraticCost()), cands, scs, threads=2)
    assert a.F.tobytes() == b.F.tobytes() and a.G.tobytes() == b.G.tobytes()


def test_populate_names_diverged_cell():
    plant = ToyPlant(a=1e300, T=5)
    scs = sample_scenarios(plant, 2, 0)
    with pytest.raises(CellDiverged) as exc:
        populate_matrices(plant, LinearFeedback(), Average(QuadraticCost()), [(0.0,)], scs)
    assert exc.value.candidate == 0 and exc.value.scenario == 0
