"""Wait-and-judge certification over a finite candidate set.

Given cached cost/violation matrices (rows = scenarios, columns = candidate
tunings), the scenario program is solved by enumeration, a support subsample
is extracted greedily, and its size is turned into an a posteriori bound on
the violation probability of the chosen (theta, xi).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np

from . import rng as rngmod
from .sim import SimulationDiverged, evaluate, sample_scenarios


class BruteForceTooLarge(ValueError):
    pass


BRUTE_FORCE_MAX_N = 15


def _check_eps_args(k: int, N: int, beta: float):
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    if not 0 <= k <= N:
        raise ValueError(f"k must lie in [0, N], got k={k}, N={N}")
    if not 0.0 < beta < 1.0:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")


@lru_cache(maxsize=64)
def _log_factorials(N: int) -> tuple:
    """Prefix sums S[m] = sum_{i<=m} ln i for m = 0..N."""
    return tuple(itertools.accumulate((math.log(i) for i in range(1, N + 1)), initial=0.0))


def log_binom(N: int, k: int) -> float:
    """ln C(N, k) from prefix sums of logarithms."""
    if not 0 <= k <= N:
        raise ValueError(f"need 0 <= k <= N, got k={k}, N={N}")
    S = _log_factorials(N)
    return S[N] - S[k] - S[N - k]


def log_epsilon_complement(k: int, N: int, beta: float) -> float:
    """ln(1 - epsilon(k)); -inf when k == N."""
    _check_eps_args(k, N, beta)
    if k == N:
        return -math.inf
    return (math.log(beta) - math.log(N) - log_binom(N, k)) / (N - k)


def epsilon(k: int, N: int, beta: float) -> float:
    """Violation level certified for a support subsample of size k out of N, confidence 1 - beta.

    beta is split evenly over the N possible outcomes k = 0..N-1, i.e.
    epsilon(k) = 1 - (beta / (N * C(N, k)))^(1 / (N - k)) and epsilon(N) = 1.
    """
    lc = log_epsilon_complement(k, N, beta)
    if lc == -math.inf:
        return 1.0
    return min(max(-math.expm1(lc), 0.0), 1.0)


def verify_epsilon_sum(N: int, beta: float, eps_fn: Optional[Callable[[int], float]] = None) -> float:
    """sum_{k=0}^{N-1} C(N, k) (1 - eps(k))^(N - k) - beta.

    With ``eps_fn=None`` the built-in epsilon is used through its exact
    log-complement, which avoids the cancellation in 1 - eps when eps is close
    to 1. Binomials here come from ``math.lgamma``, independently of
    :func:`log_binom`.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    terms = []
    lgN = math.lgamma(N + 1)
    for k in range(N):
        lnC = lgN - math.lgamma(k + 1) - math.lgamma(N - k + 1)
        if eps_fn is None:
            lc = log_epsilon_complement(k, N, beta)
        else:
            e = float(eps_fn(k))
            lc = math.log1p(-e) if e < 1.0 else -math.inf
        terms.append(0.0 if lc == -math.inf else math.exp(lnC + (N - k) * lc))
    return math.fsum(terms) - beta


def _column_objectives(F: np.ndarray, G: np.ndarray, rho: float, rows: Sequence[int]) -> tuple[list, list]:
    rows = list(rows)
    n_cand = F.shape[1]
    if not rows:
        return [0.0] * n_cand, [0.0] * n_cand
    Fs = F[rows]
    Gs = G[rows]
    xi = [max(float(Gs[:, j].max()), 0.0) for j in range(n_cand)]
    obj = [rho * xi[j] + math.fsum(Fs[:, j].tolist()) / len(rows) for j in range(n_cand)]
    return obj, xi


def solve_discrete(F, G, rho: float, scenario_subset: Optional[Sequence[int]] = None) -> tuple[int, float, float]:
    """Best candidate (0-based j*, xi*, objective) on the given scenario rows.

    objective_j = rho * max_i max(G_ij, 0) + mean_i F_ij; ties go to the
    smallest j. An empty subset scores every candidate 0.
    """
    F = np.asarray(F, dtype=float)
    G = np.asarray(G, dtype=float)
    if not rho > 0:
        raise ValueError("rho must be positive")
    if F.shape != G.shape or F.ndim != 2 or F.shape[1] < 1:
        raise ValueError("F and G must be matching 2-D matrices with at least one column")
    rows = range(F.shape[0]) if scenario_subset is None else scenario_subset
    obj, xi = _column_objectives(F, G, rho, rows)
    j = min(range(len(obj)), key=lambda c: (obj[c], c))
    return j, xi[j], obj[j]


def greedy_support(F, G, rho: float, compare_xi: bool = True, single_pass: bool = False) -> list[int]:
    """Support subsample by single removals in ascending scenario order.

    A removal is kept iff the reduced problem returns exactly the same
    (j*, xi*) as the full sample (only j* when ``compare_xi`` is False).
    The ascending pass is repeated until it removes nothing, so the result is
    irreducible; ``single_pass=True`` stops after the first pass. Returned
    indices are 0-based and increasing.
    """
    F = np.asarray(F, dtype=float)
    N = F.shape[0]
    j_star, xi_star, _ = solve_discrete(F, G, rho)
    target = (j_star, xi_star) if compare_xi else j_star
    keep = list(range(N))
    while True:
        removed = False
        for i in list(keep):
            trial = [r for r in keep if r != i]
            j, xi, _ = solve_discrete(F, G, rho, trial)
            if ((j, xi) if compare_xi else j) == target:
                keep = trial
                removed = True
        if single_pass or not removed:
            return keep


def essential_set_bruteforce(F, G, rho: float, compare_xi: bool = True) -> list[int]:
    """Smallest subset reproducing the full-sample solution (lexicographically first on ties)."""
    F = np.asarray(F, dtype=float)
    N = F.shape[0]
    if N > BRUTE_FORCE_MAX_N:
        raise BruteForceTooLarge(f"exhaustive search limited to N <= {BRUTE_FORCE_MAX_N}, got {N}")
    j_star, xi_star, _ = solve_discrete(F, G, rho)
    target = (j_star, xi_star) if compare_xi else j_star
    for size in range(N + 1):
        for subset in itertools.combinations(range(N), size):
            j, xi, _ = solve_discrete(F, G, rho, subset)
            if ((j, xi) if compare_xi else j) == target:
                return list(subset)
    return list(range(N))


@dataclass
class CertResult:
    candidate_index: int
    theta: tuple
    xi: float
    objective: float
    support_indices: list
    s_star: int
    epsilon: float
    beta: float
    N: int
    rho: float
    meta: dict = field(default_factory=dict)

    def claim(self) -> str:
        return (f"violation probability <= {self.epsilon:.6g} with confidence >= 1 - {self.beta:.6g} "
                f"(s* = {self.s_star}, N = {self.N}, xi* = {self.xi:.6g})")


def certify(F, G, rho: float, beta: float, candidates: Optional[Sequence] = None,
            compare_xi: bool = True, single_pass: bool = False) -> CertResult:
    F = np.asarray(F, dtype=float)
    G = np.asarray(G, dtype=float)
    if not 0.0 < beta < 1.0:
        raise ValueError("beta must lie in (0, 1)")
    N = F.shape[0]
    j, xi, obj = solve_discrete(F, G, rho)
    support = greedy_support(F, G, rho, compare_xi=compare_xi, single_pass=single_pass)
    s = len(support)
    theta = tuple(candidates[j]) if candidates is not None else (j,)
    return CertResult(j, theta, xi, obj, support, s, epsilon(s, N, beta), beta, N, rho)


def empirical_violation(problem, theta, xi: float, N_val: int, master_seed: int) -> float:
    """Fraction of N_val fresh scenarios (tag "validate") with G(theta, delta) > xi.

    A diverged rollout counts as a violation.
    """
    if N_val < 1:
        raise ValueError("N_val must be >= 1")
    scenarios = sample_scenarios(problem.plant, N_val, master_seed, tag=rngmod.VALIDATE)
    bad = 0
    for sc in scenarios:
        try:
            _, g = evaluate(problem, theta, sc)
        except SimulationDiverged:
            bad += 1
            continue
        if g > xi:
            bad += 1
    return bad / N_val
