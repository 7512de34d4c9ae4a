import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import norm

from scenario_tune.cbo import (CboConfig, FunctionProblem, Observation, acquisition, best_observation,
                               expected_improvement, generate_candidates, mcs_estimates, prob_feasible,
                               propose_next, run_cbo)
from scenario_tune.gp import GPModel, KernelParams
from scenario_tune.plants import scalar_toy_plant
from scenario_tune.rng import substream
from scenario_tune.sim import sample_scenarios, evaluate
from scenario_tune.spaces import Continuous, ParameterSpace, encode

LINE = ParameterSpace((Continuous(0.0, 1.0, "theta"),))


def boundary_problem():
    return FunctionProblem(LINE, lambda th, r: (th[0] - 0.75) ** 2, lambda th, r: th[0] - 0.5)


def test_ei_examples():
    assert expected_improvement(0.7, 0.0, 1.0) == pytest.approx(0.3)
    assert expected_improvement(1.0, 1.0, 1.0) == pytest.approx(1 / math.sqrt(2 * math.pi), abs=1e-5)
    assert expected_improvement(0.0, 1.0, 1.0) == pytest.approx(1.08332, abs=1e-5)
    assert expected_improvement(2.0, 0.0, 1.0) == 0.0


def test_pof_examples():
    assert prob_feasible(0.0, 1.0) == 0.5
    assert prob_feasible(-1.6449, 1.0) == pytest.approx(0.05, abs=1e-5)
    assert prob_feasible(0.0, 0.0) == 1.0
    assert prob_feasible(-1e-9, 0.0) == 0.0


@given(st.floats(-5, 5), st.floats(0, 5), st.floats(-5, 5))
def test_ei_matches_scipy_and_nonnegative(mu, sigma, fb):
    ei = expected_improvement(mu, sigma, fb)
    assert ei >= 0
    if sigma > 1e-6:
        z = (fb - mu) / sigma
        assert ei == pytest.approx(max((fb - mu) * norm.cdf(z) + sigma * norm.pdf(z), 0.0), abs=1e-10)


def test_mcs_estimates_examples():
    const = FunctionProblem(LINE, lambda th, r: 2.5, lambda th, r: -1.0)
    assert mcs_estimates((0.1,), const, 4, 0, (0, 0)) == (2.5, 0.0)
    bad = FunctionProblem(LINE, lambda th, r: 0.0, lambda th, r: 1.0)
    assert mcs_estimates((0.1,), bad, 3, 0, (0, 0))[1] == -1.0
    alt = FunctionProblem(LINE, lambda th, r: 0.0, lambda th, r: r.uniform(-1, 1))
    # find a stream where exactly one of two draws violates
    for s in range(50):
        gs = [substream(s, "bo", 0, 0, i).uniform(-1, 1) for i in range(2)]
        if sum(g > 0 for g in gs) == 1:
            assert mcs_estimates((0.1,), alt, 2, s, (0, 0))[1] == -0.5
            break
    else:
        pytest.fail("no stream with a single violation")


def test_mcs_unbiased_on_toy():
    prob = scalar_toy_plant()
    theta = (0.8,)
    est = np.array([mcs_estimates(theta, prob, 3, 0, (0, e))[0] for e in range(1000)])
    ref = np.array([evaluate(prob, theta, sc)[0] for sc in sample_scenarios(prob.plant, 100_000, 99)])
    se = math.sqrt(est.var(ddof=1) / est.size + ref.var(ddof=1) / ref.size)
    assert abs(est.mean() - ref.mean()) <= 3 * se


def two_point_models():
    X = np.array([[0.2], [0.8]])
    J = GPModel.build(X, [1.0, 0.0], KernelParams([0.3], 1.0, 1e-4))
    C = GPModel.build(X, [0.0, -1.0], KernelParams([0.3], 1.0, 1e-4))
    return J, C


def test_acquisition_factorwise_oracle():
    J, C = two_point_models()
    x = np.array([0.45])
    mj, vj = J.predict(x[None])
    mc, vc = C.predict(x[None])
    z = (0.5 - mj[0]) / math.sqrt(vj[0])
    ei = (0.5 - mj[0]) * norm.cdf(z) + math.sqrt(vj[0]) * norm.pdf(z)
    pf = norm.cdf(mc[0] / math.sqrt(vc[0]))
    assert acquisition(x, J, C, 0.5) == pytest.approx(ei * pf, rel=1e-8)
    assert acquisition(x, J, C, None) == pytest.approx(pf, rel=1e-12)


def test_acquisition_zero_when_infeasible_certain():
    X = np.array([[0.0], [1.0]])
    J = GPModel.build(X, [0.0, 1.0], KernelParams([0.3], 1.0, 0.0))
    C = GPModel.build(X, [-1.0, -1.0], KernelParams([0.3], 1.0, 0.0), standardize=False)
    # noise-free interpolation at a data point: sigma ~ 0 and mean -1 -> PoF 0
    assert acquisition(np.array([0.0]), J, C, 5.0) == pytest.approx(0.0, abs=1e-12)


def test_propose_next_argmax_and_determinism():
    J, C = two_point_models()
    r1 = propose_next(LINE, J, C, 0.5, 64, substream(1, "propose"), observed=[(0.2,), (0.8,)])
    r2 = propose_next(LINE, J, C, 0.5, 64, substream(1, "propose"), observed=[(0.2,), (0.8,)])
    assert r1 == r2
    rng = substream(1, "propose")
    from scenario_tune.spaces import resample_dim, sample_uniform
    pool = [sample_uniform(LINE, rng) for _ in range(64)]
    pool += [resample_dim(LINE, th, rng) for th in [(0.2,), (0.8,)]]
    best = acquisition(np.array(r1, dtype=float), J, C, 0.5)
    assert all(best >= acquisition(encode(LINE, th), J, C, 0.5) for th in pool)
    single = propose_next(LINE, J, C, 0.5, 1, substream(2, "propose"))
    assert single == sample_uniform(LINE, substream(2, "propose"))


def test_best_observation_rules():
    a = Observation((0.1,), 3.0, -0.5, 2, (0, 0))
    b = Observation((0.2,), 1.0, -0.5, 2, (0, 1))
    c = Observation((0.3,), 5.0, 0.0, 2, (0, 2))
    assert best_observation([a, b]) is b
    assert best_observation([a, b, c]) is c
    with pytest.raises(ValueError):
        Observation((0.1,), 1.0, 0.5, 1, (0, 0))


def test_run_cbo_history_and_incumbent():
    cfg = CboConfig(n_seed=3, n_max=4, M=1, pool_size=32, master_seed=4)
    best, hist = run_cbo(boundary_problem(), cfg, 0)
    assert len(hist) == 7
    feas = [h.incumbent.J_hat for h in hist if h.incumbent.feasible]
    assert all(b <= a for a, b in zip(feas, feas[1:]))
    cfg0 = CboConfig(n_seed=3, n_max=0, M=1, master_seed=4)
    best0, hist0 = run_cbo(boundary_problem(), cfg0, 0)
    assert best0 == best_observation([h.obs for h in hist0]).theta


def test_seed_theta_evaluated_first():
    prob = FunctionProblem(LINE, lambda th, r: 0.0, lambda th, r: -1.0, seed_theta=(0.123,))
    _, hist = run_cbo(prob, CboConfig(n_seed=2, n_max=0, M=1), 0)
    assert hist[0].obs.theta == (0.123,)


def test_generate_candidates_dedup_and_determinism():
    cfg = CboConfig(n_seed=2, n_max=2, M=1, pool_size=16, master_seed=3)
    a = generate_candidates(boundary_problem(), cfg, 2)
    assert 1 <= len(a.thetas) <= 2 and sum(a.multiplicity) == 2
    b = generate_candidates(boundary_problem(), cfg, 2)
    assert a.thetas == b.thetas and a.multiplicity == b.multiplicity
    const = FunctionProblem(LINE, lambda th, r: 0.0, lambda th, r: -1.0, seed_theta=(0.5,))
    c = generate_candidates(const, CboConfig(n_seed=1, n_max=0, M=1), 3)
    assert c.thetas == [(0.5,)] and c.multiplicity == [3]


def test_generate_candidates_thread_independent():
    prob = scalar_toy_plant()
    cfg = CboConfig(n_seed=2, n_max=2, M=2, pool_size=16, master_seed=1)
    a = generate_candidates(prob, cfg, 3, threads=1)
    b = generate_candidates(prob, cfg, 3, threads=2)
    assert a.thetas == b.thetas and a.run_best == b.run_best
