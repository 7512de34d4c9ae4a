import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scenario_tune.plants import scalar_toy_plant
from scenario_tune.scenario import (BruteForceTooLarge, certify, empirical_violation, epsilon,
                                    essential_set_bruteforce, greedy_support, log_binom, solve_discrete,
                                    verify_epsilon_sum)
from scenario_tune.sim import Problem, Scenario, Terminal


def oracle_solve(F, G, rho, rows):
    """Independent argmin: plain loops, no shared helpers."""
    best = None
    for j in range(F.shape[1]):
        if rows:
            xi = max(max(G[i, j], 0.0) for i in rows)
            obj = rho * xi + math.fsum(F[i, j] for i in rows) / len(rows)
        else:
            xi, obj = 0.0, 0.0
        if best is None or obj < best[2]:
            best = (j, xi, obj)
    return best


def random_instance(rng, N=None, n=None):
    N = N or int(rng.integers(1, 11))
    n = n or int(rng.integers(1, 6))
    F = np.round(rng.normal(size=(N, n)), 1)
    G = np.round(rng.normal(scale=0.5, size=(N, n)), 1)
    return F, G


# --- epsilon -------------------------------------------------------------------

def test_epsilon_examples():
    assert abs(epsilon(1, 750, 1e-6) - 0.0355) <= 5e-5
    assert epsilon(10, 10, 0.1) == 1.0
    assert epsilon(0, 2, 0.02) == pytest.approx(0.9, rel=1e-14)
    assert epsilon(1, 2, 0.01) == pytest.approx(0.9975, rel=1e-14)


def test_epsilon_domain():
    for args in [(-1, 5, 0.1), (6, 5, 0.1), (1, 0, 0.1), (1, 5, 0.0), (1, 5, 1.0)]:
        with pytest.raises(ValueError):
            epsilon(*args)


@pytest.mark.parametrize("N", [10, 100, 750])
def test_epsilon_strictly_increasing(N):
    vals = [epsilon(k, N, 1e-6) for k in range(N + 1)]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    assert all(0 <= v <= 1 for v in vals)


@pytest.mark.parametrize("N,beta", [(3, 0.03), (10, 0.05), (100, 1e-3), (750, 1e-6)])
def test_per_term_identity_and_sum(N, beta):
    for k in range(N):
        lc = math.log1p(-epsilon(k, N, beta)) if epsilon(k, N, beta) < 0.5 else None
        if lc is not None:
            term = math.exp(math.log(math.comb(N, k)) + (N - k) * lc)
            assert term == pytest.approx(beta / N, rel=1e-9)
    assert abs(verify_epsilon_sum(N, beta)) <= 1e-9 * beta


def test_verify_sum_constant_one():
    assert verify_epsilon_sum(20, 0.1, lambda k: 1.0) == -0.1
    r = verify_epsilon_sum(3, 0.03, lambda k: epsilon(k, 3, 0.03))
    assert abs(r) <= 1e-9 * 0.03


def test_log_binom_matches_comb():
    for N in (1, 7, 50, 750):
        for k in range(0, N + 1, max(1, N // 7)):
            assert log_binom(N, k) == pytest.approx(math.log(math.comb(N, k)), rel=1e-12, abs=1e-12)


# --- discrete program ----------------------------------------------------------

def test_solve_discrete_examples():
    F = np.array([[1.0, 2.0], [3.0, 4.0]])
    G = np.array([[-1.0, 0.5], [-2.0, -0.1]])
    assert solve_discrete(F, G, 10.0) == (0, 0.0, 2.0)
    G2 = np.tile([[0.3, 0.3, 0.3]], (3, 1))
    F2 = np.array([[1.0, 0.5, 2.0]] * 3)
    assert solve_discrete(F2, G2, 5.0)[0] == 1
    assert solve_discrete(F, G, 10.0, []) == (0, 0.0, 0.0)
    with pytest.raises(ValueError):
        solve_discrete(F, G, 0.0)


def test_solve_discrete_matches_oracle():
    rng = np.random.default_rng(0)
    for _ in range(100):
        F, G = random_instance(rng)
        rows = [i for i in range(F.shape[0]) if rng.random() < 0.7]
        j, xi, _ = solve_discrete(F, G, 10.0, rows)
        oj, oxi, _ = oracle_solve(F, G, 10.0, rows)
        assert (j, xi) == (oj, oxi)


# --- support subsamples --------------------------------------------------------

HAND_F = np.array([[1.0, 0.0], [1.0, 0.0]])
HAND_G = np.array([[-1.0, 1.0], [-1.0, -1.0]])


def test_greedy_hand_example():
    # indices are 0-based: the single ascending pass keeps the first scenario (removing it
    # flips the solution to candidate 1); repeating the pass removes it too, because the
    # empty program returns candidate 0 with xi = 0 as well
    assert greedy_support(HAND_F, HAND_G, 10.0, single_pass=True) == [0]
    assert greedy_support(HAND_F, HAND_G, 10.0) == []
    assert essential_set_bruteforce(HAND_F, HAND_G, 10.0) == []


def test_greedy_boundaries():
    F = np.array([[0.0, 1.0]])
    G = np.array([[-1.0, -1.0]])
    assert greedy_support(F, G, 1.0) == []
    F = np.array([[2.0, 1.0]])
    assert greedy_support(F, G, 1.0) == [0]
    Fd = np.tile([[0.0, 1.0]], (4, 1))
    Gd = np.tile([[-0.5, -0.5]], (4, 1))
    assert greedy_support(Fd, Gd, 1.0) == []
    assert essential_set_bruteforce(Fd, Gd, 1.0) == []


def test_bruteforce_guard():
    with pytest.raises(BruteForceTooLarge):
        essential_set_bruteforce(np.zeros((16, 2)), np.zeros((16, 2)), 1.0)


def test_greedy_properties_random():
    rng = np.random.default_rng(42)
    for _ in range(50):
        F, G = random_instance(rng, N=8, n=4)
        target = solve_discrete(F, G, 10.0)[:2]
        sup = greedy_support(F, G, 10.0)
        assert solve_discrete(F, G, 10.0, sup)[:2] == target
        for i in sup:
            assert solve_discrete(F, G, 10.0, [r for r in sup if r != i])[:2] != target
        assert len(essential_set_bruteforce(F, G, 10.0)) <= len(sup)
        assert sup == sorted(set(sup))


def test_theta_only_mode_never_larger():
    rng = np.random.default_rng(7)
    for _ in range(30):
        F, G = random_instance(rng, N=8, n=3)
        j = solve_discrete(F, G, 10.0)[0]
        sup = greedy_support(F, G, 10.0, compare_xi=False)
        assert solve_discrete(F, G, 10.0, sup)[0] == j
        assert len(essential_set_bruteforce(F, G, 10.0, compare_xi=False)) <= \
            len(essential_set_bruteforce(F, G, 10.0))


# --- certify -------------------------------------------------------------------

def test_certify_hand_example():
    single = certify(HAND_F, HAND_G, 10.0, 0.01, single_pass=True)
    assert single.support_indices == [0] and single.s_star == 1
    assert single.epsilon == pytest.approx(0.9975, rel=1e-14)
    default = certify(HAND_F, HAND_G, 10.0, 0.01, candidates=[("a",), ("b",)])
    assert default.s_star == 0 and default.theta == ("a",)
    assert default.epsilon == pytest.approx(1 - math.sqrt(0.01 / 2), rel=1e-14)
    assert "0.929289" in default.claim()


def test_certify_invariants_and_purity():
    rng = np.random.default_rng(1)
    F, G = random_instance(rng, N=9, n=4)
    a = certify(F, G, 100.0, 0.05)
    b = certify(F, G, 100.0, 0.05)
    assert a == b
    assert a.xi == max(max(G[i, a.candidate_index], 0.0) for i in range(9))
    assert a.epsilon == epsilon(a.s_star, 9, 0.05)
    with pytest.raises(ValueError):
        certify(F, G, 100.0, 1.5)


# --- empirical violation -------------------------------------------------------

class Quiet:
    T = 3
    n_x = 1
    constraints = (lambda x, u, w: -1.0,)

    def step(self, x, u, w):
        return x

    def sample_scenario(self, rng):
        return Scenario(np.array([rng.random()]), np.zeros((3, 1)))


def test_empirical_violation_examples():
    quiet = Problem("quiet", Quiet(), lambda x, th: np.zeros(1), None, Terminal(lambda x: 0.0))
    assert empirical_violation(quiet, (), 0.0, 50, 0) == 0.0
    with pytest.raises(ValueError):
        empirical_violation(scalar_toy_plant(), (1.0,), 0.0, 0, 0)


def open_loop_violation_reference(n=1_000_000, seed=12345):
    """Vectorized Monte Carlo of the uncontrolled toy plant: P[max_k<T |x(k)| > 1.5]."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.8, 1.2, n)
    worst = np.abs(x)
    for _ in range(19):
        x = 1.05 * x + rng.uniform(-0.1, 0.1, n)
        worst = np.maximum(worst, np.abs(x))
    return float((worst > 1.5).mean())


def test_toy_open_loop_violation_frequency():
    ref = open_loop_violation_reference()
    f = empirical_violation(scalar_toy_plant(), (0.0,), 0.0, 1000, 0)
    sd = math.sqrt(ref * (1 - ref) / 1000)
    assert abs(f - ref) <= 4 * sd
    # without disturbances every x0 in [0.8, 1.2] violates
    quiet = scalar_toy_plant(w_max=0.0)
    assert empirical_violation(quiet, (0.0,), 0.0, 200, 0) == 1.0


@pytest.mark.xfail(strict=True, reason="true rate is about 0.9795: disturbances can keep x below 1.5")
def test_toy_open_loop_violation_at_least_099():
    assert empirical_violation(scalar_toy_plant(), (0.0,), 0.0, 1000, 0) >= 0.99


@given(st.floats(0.0, 2.0), st.floats(0.0, 0.5))
@settings(max_examples=10, deadline=None)
def test_empirical_violation_range(theta, xi):
    f = empirical_violation(scalar_toy_plant(), (theta,), xi, 50, 3)
    assert 0.0 <= f <= 1.0
