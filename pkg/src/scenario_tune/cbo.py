"""Constrained Bayesian optimization for generating candidate tunings.

The objective J(theta) = E[F] and the feasibility C(theta) = P[G <= 0] - 1 are
estimated by Monte Carlo over M fresh scenarios, each modelled by its own GP,
and the next point maximizes EI(J) * P[C >= 0] over a random pool. Before any
feasible point has been seen the EI factor is dropped.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import ndtr

from . import rng as rngmod
from .gp import GPModel, gp_fit
from .sim import Problem, evaluate
from .spaces import ParameterSpace, encode, resample_dim, sample_uniform


@dataclass(frozen=True)
class Observation:
    theta: tuple
    J_hat: float
    C_hat: float
    M: int
    stream: tuple  # (run index, evaluation index)

    def __post_init__(self):
        if not (-1.0 <= self.C_hat <= 0.0):
            raise ValueError(f"C_hat must lie in [-1, 0], got {self.C_hat}")
        if not math.isfinite(self.J_hat):
            raise ValueError("J_hat must be finite")

    @property
    def feasible(self) -> bool:
        return self.C_hat == 0.0


@dataclass(frozen=True)
class CboConfig:
    n_seed: int = 5
    n_max: int = 20
    M: int = 3
    pool_size: int = 256
    master_seed: int = 0
    gp_restarts: int = 2
    use_seed_theta: bool = True

    def __post_init__(self):
        if self.n_seed < 1 or self.n_max < 0 or self.M < 1 or self.pool_size < 1:
            raise ValueError("need n_seed >= 1, n_max >= 0, M >= 1, pool_size >= 1")
        if self.gp_restarts < 0:
            raise ValueError("gp_restarts must be >= 0")


@dataclass(frozen=True)
class FunctionProblem:
    """Black-box problem given directly by F(theta, rng) and G(theta, rng).

    Used for tests and toy studies where no closed-loop simulation is needed.
    """
    space: ParameterSpace
    F: Callable
    G: Callable
    seed_theta: Optional[tuple] = None

    def draw(self, theta, rng):
        return float(self.F(theta, rng)), float(self.G(theta, rng))


@dataclass
class HistoryRow:
    iteration: int
    obs: Observation
    incumbent: Observation


@dataclass
class CandidateSet:
    thetas: list
    multiplicity: list
    run_best: list            # best theta of each run, before de-duplication
    histories: list           # list of list[HistoryRow]


def _draw(problem, theta, rng):
    if isinstance(problem, Problem):
        sc = problem.plant.sample_scenario(rng)
        return evaluate(problem, theta, sc, penalize=True)
    return problem.draw(theta, rng)


def mcs_estimates(theta, problem, M: int, master_seed: int, stream: tuple) -> tuple[float, float]:
    """(J_hat, C_hat) from M fresh draws on the BO substream ``stream``."""
    if M < 1:
        raise ValueError("M must be >= 1")
    F = np.empty(M)
    ok = np.empty(M)
    for i in range(M):
        f, g = _draw(problem, theta, rngmod.substream(master_seed, rngmod.BO, *stream, i))
        F[i] = f
        ok[i] = 1.0 if g <= 0.0 else 0.0
    return math.fsum(F) / M, math.fsum(ok) / M - 1.0


def expected_improvement(mu, sigma, f_best):
    """EI for minimization; sigma = 0 gives max(f_best - mu, 0)."""
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    imp = f_best - mu
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        z = np.where(sigma > 0, imp / np.where(sigma > 0, sigma, 1.0), 0.0)
        pdf = np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
        ei = np.where(sigma > 0, imp * ndtr(z) + sigma * pdf, np.maximum(imp, 0.0))
    ei = np.maximum(ei, 0.0)
    return float(ei) if ei.ndim == 0 else ei


def prob_feasible(mu_c, sigma_c):
    """P[C >= 0] under N(mu_c, sigma_c^2); a point mass counts as feasible at mu_c >= 0."""
    mu_c = np.asarray(mu_c, dtype=float)
    sigma_c = np.asarray(sigma_c, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(sigma_c > 0, ndtr(mu_c / np.where(sigma_c > 0, sigma_c, 1.0)),
                     (mu_c >= 0).astype(float))
    return float(p) if p.ndim == 0 else p


def acquisition_values(X, J_model: GPModel, C_model: GPModel, f_best: Optional[float]) -> np.ndarray:
    X = np.atleast_2d(X)
    mc, vc = C_model.predict(X)
    pf = prob_feasible(mc, np.sqrt(vc))
    if f_best is None:
        return np.atleast_1d(pf)
    mj, vj = J_model.predict(X)
    return np.atleast_1d(expected_improvement(mj, np.sqrt(vj), f_best) * pf)


def acquisition(x, J_model: GPModel, C_model: GPModel, f_best: Optional[float]) -> float:
    return float(acquisition_values(np.asarray(x, dtype=float)[None, :], J_model, C_model, f_best)[0])


def propose_next(space: ParameterSpace, J_model: GPModel, C_model: GPModel, f_best: Optional[float],
                 pool_size: int, rng: np.random.Generator, observed=()) -> tuple:
    """Argmax of the acquisition over a random pool plus one-dim perturbations of observed points.

    Ties go to the smallest pool index; already observed points are skipped.
    """
    if pool_size < 1:
        raise ValueError("pool_size must be >= 1")
    observed = list(observed)
    pool = [sample_uniform(space, rng) for _ in range(pool_size)]
    pool += [resample_dim(space, th, rng) for th in observed]
    acq = acquisition_values(np.vstack([encode(space, th) for th in pool]), J_model, C_model, f_best)
    seen = set(observed)
    # stable sort on -acq keeps the smallest index first among equal values
    for idx in np.argsort(-acq, kind="stable"):
        if pool[idx] not in seen:
            return pool[idx]
    return sample_uniform(space, rng)


def best_observation(obs: list[Observation]) -> Observation:
    """Minimal J_hat among feasible observations; otherwise maximal C_hat (then minimal J_hat, then earliest)."""
    if not obs:
        raise ValueError("no observations")
    feasible = [o for o in obs if o.feasible]
    if feasible:
        return min(feasible, key=lambda o: o.J_hat)
    return min(obs, key=lambda o: (-o.C_hat, o.J_hat))


def run_cbo(problem, config: CboConfig, run_index: int) -> tuple[tuple, list[HistoryRow]]:
    space = problem.space
    seed = config.master_seed
    seed_rng = rngmod.substream(seed, rngmod.SEEDS, run_index)
    points = []
    if config.use_seed_theta and getattr(problem, "seed_theta", None) is not None:
        points.append(space.validate(problem.seed_theta))
    while len(points) < config.n_seed:
        points.append(sample_uniform(space, seed_rng))

    obs: list[Observation] = []
    history: list[HistoryRow] = []

    def observe(theta):
        e = len(obs)
        J, C = mcs_estimates(theta, problem, config.M, seed, (run_index, e))
        o = Observation(theta, J, C, config.M, (run_index, e))
        obs.append(o)
        history.append(HistoryRow(e, o, best_observation(obs)))

    for th in points:
        observe(th)
    for it in range(config.n_max):
        X = np.vstack([encode(space, o.theta) for o in obs])
        fit_rng = rngmod.substream(seed, rngmod.GPFIT, run_index, it)
        J_model = gp_fit(X, [o.J_hat for o in obs], restarts=config.gp_restarts, rng=fit_rng)
        C_model = gp_fit(X, [o.C_hat for o in obs], restarts=config.gp_restarts, rng=fit_rng)
        feasible = [o.J_hat for o in obs if o.feasible]
        f_best = min(feasible) if feasible else None
        prop_rng = rngmod.substream(seed, rngmod.PROPOSE, run_index, it)
        theta = propose_next(space, J_model, C_model, f_best, config.pool_size, prop_rng,
                             observed=[o.theta for o in obs])
        observe(theta)
    return best_observation(obs).theta, history


def _run(args):
    problem, config, r = args
    return run_cbo(problem, config, r)


def generate_candidates(problem, config: CboConfig, n_theta: int, threads: int = 1) -> CandidateSet:
    """Best points of ``n_theta`` independent BO runs, exact duplicates merged."""
    if n_theta < 1:
        raise ValueError("n_theta must be >= 1")
    jobs = [(problem, config, r) for r in range(n_theta)]
    if threads > 1 and n_theta > 1:
        with ProcessPoolExecutor(max_workers=min(threads, n_theta)) as ex:
            results = list(ex.map(_run, jobs))
    else:
        results = [_run(j) for j in jobs]
    thetas, mult = [], []
    for best, _ in results:
        if best in thetas:
            mult[thetas.index(best)] += 1
        else:
            thetas.append(best)
            mult.append(1)
    return CandidateSet(thetas, mult, [b for b, _ in results], [h for _, h in results])
