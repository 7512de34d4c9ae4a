"""Jacketed semibatch reactor A + B -> C with a lookahead feed governor.

State ordering: (V, c_A, c_B, c_C, T_r, T_J, T_J_in); inputs (feed rate,
jacket inlet set-point); disturbances enter additively in the c_B, T_J and
T_J_in balances. Units: m^3, mol/m^3, K, s.

The default constants are chosen for this package (see
``configs/reactor_params.json``); they are not published values.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from ..sim import Problem, Scenario, Terminal
from ..spaces import Categorical, Continuous, DomainError, Integer, ParameterSpace
from .integrators import IntegrationError, Scheme, integrate_step

STATE_NAMES = ("V", "c_A", "c_B", "c_C", "T_r", "T_J", "T_J_in")
INPUT_NAMES = ("V_in", "T_J_in_set")
IDX_V, IDX_CA, IDX_CB, IDX_CC, IDX_TR, IDX_TJ, IDX_TJIN = range(7)

PARAMS_VERSION = "1"


@dataclass(frozen=True)
class ReactorParams:
    k: float = 2.5e-5             # m^3/(mol s)
    rho_cp: float = 4.0e6         # J/(m^3 K)
    H: float = -5.0e4             # J/mol, negative = exothermic
    alpha: float = 5000.0         # W/(m^2 K)
    r: float = 0.6                # m
    V_J: float = 0.3              # m^3
    F_J_in: float = 0.06          # 1/s
    tau_c: float = 40.0           # s
    c_B_in: float = 1.0e4         # mol/m^3
    T_in: float = 300.0           # K
    feed_max: float = 2.0e-4      # m^3/s
    T_set_min: float = 290.0      # K
    T_set_max: float = 350.0      # K
    x0: tuple = (1.0, 2000.0, 0.0, 0.0, 324.0, 324.0, 324.0)
    x0_halfwidth: tuple = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    t_f: float = 1200.0
    dt: float = 30.0
    T: int = 40
    T_lo: float = 322.0
    T_hi: float = 326.0
    w_lo: tuple = (-0.5, -0.05, -0.05)
    w_hi: tuple = (0.5, 0.05, 0.05)
    plant_substep: float = 1.0    # s, RK4 substep of the simulated "true" plant
    K_T: float = 2.0
    T_center: float = 324.0
    bisection_iters: int = 12

    def __post_init__(self):
        object.__setattr__(self, "x0", tuple(float(v) for v in self.x0))
        object.__setattr__(self, "x0_halfwidth", tuple(float(v) for v in self.x0_halfwidth))
        object.__setattr__(self, "w_lo", tuple(float(v) for v in self.w_lo))
        object.__setattr__(self, "w_hi", tuple(float(v) for v in self.w_hi))
        positive = ("k", "rho_cp", "alpha", "r", "V_J", "F_J_in", "tau_c", "c_B_in", "T_in",
                    "feed_max", "t_f", "dt", "plant_substep")
        for name in positive:
            if not getattr(self, name) > 0:
                raise DomainError(f"reactor parameter {name} must be positive")
        if len(self.x0) != 7 or len(self.x0_halfwidth) != 7:
            raise DomainError("x0 and x0_halfwidth need 7 entries")
        if len(self.w_lo) != 3 or len(self.w_hi) != 3:
            raise DomainError("disturbance box needs 3 entries")
        if self.x0[IDX_V] <= 0:
            raise DomainError("initial volume must be positive")
        if not math.isclose(self.T * self.dt, self.t_f):
            raise DomainError("t_f must equal T * dt")
        if not self.T_lo < self.T_hi:
            raise DomainError("temperature band must be non-empty")
        steps = self.dt / self.plant_substep
        if abs(steps - round(steps)) > 1e-9:
            raise DomainError("dt must be a multiple of plant_substep")

    @property
    def plant_substeps(self) -> int:
        return int(round(self.dt / self.plant_substep))

    def to_json(self) -> dict:
        d = asdict(self)
        for key in ("x0", "x0_halfwidth", "w_lo", "w_hi"):
            d[key] = list(d[key])
        return d

    @classmethod
    def from_json(cls, d: dict) -> "ReactorParams":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known - {"version", "note"}
        if unknown:
            raise DomainError(f"unknown reactor parameters: {sorted(unknown)}")
        return cls(**{k: v for k, v in d.items() if k in known})

    @classmethod
    def load(cls, path) -> "ReactorParams":
        return cls.from_json(json.loads(Path(path).read_text()))


def reactor_rhs(x, u, w, p: ReactorParams) -> np.ndarray:
    V, cA, cB, cC, Tr, TJ, TJin = np.asarray(x, dtype=float).tolist()
    if not V > 0:
        raise DomainError(f"reactor volume must be positive, got {V}")
    feed, T_set = float(u[0]), float(u[1])
    Fin = feed / V
    area = 2.0 * V / p.r + math.pi * p.r * p.r
    q = p.alpha * area * (Tr - TJ)
    rate = p.k * cA * cB
    return np.array([
        feed,
        -Fin * cA - rate,
        Fin * (p.c_B_in - cB) - rate + w[0],
        -Fin * cC + rate,
        Fin * (p.T_in - Tr) - q / (p.rho_cp * V) - rate * p.H / p.rho_cp,
        p.F_J_in * (TJin - TJ) + q / (p.rho_cp * p.V_J) + w[1],
        (T_set - TJin) / p.tau_c + w[2],
    ])


@dataclass(frozen=True)
class _Rhs:
    """Picklable rhs(x, u, w) bound to a parameter set."""
    params: ReactorParams

    def __call__(self, x, u, w):
        return reactor_rhs(x, u, w, self.params)


@dataclass(frozen=True)
class ReactorPlant:
    params: ReactorParams = field(default_factory=ReactorParams)

    n_x = 7
    state_names = STATE_NAMES
    input_names = INPUT_NAMES

    @property
    def T(self) -> int:
        return self.params.T

    def step(self, x, u, w):
        return integrate_step(_Rhs(self.params), x, u, w, self.params.dt, Scheme.RK4, self.params.plant_substeps)

    @property
    def constraints(self):
        return (UpperTemp(self.params.T_hi), LowerTemp(self.params.T_lo))

    def sample_scenario(self, rng: np.random.Generator) -> Scenario:
        p = self.params
        hw = np.asarray(p.x0_halfwidth)
        x0 = np.asarray(p.x0) + rng.uniform(-1.0, 1.0, size=7) * hw
        w = rng.uniform(np.asarray(p.w_lo), np.asarray(p.w_hi), size=(p.T, 3))
        return Scenario(x0, w)

    def nominal_scenario(self) -> Scenario:
        return Scenario(np.asarray(self.params.x0, dtype=float), np.zeros((self.params.T, 3)))


@dataclass(frozen=True)
class UpperTemp:
    """g1 = T_r - T_hi."""
    bound: float

    def __call__(self, x, u, w):
        return x[IDX_TR] - self.bound


@dataclass(frozen=True)
class LowerTemp:
    """g2 = T_lo - T_r."""
    bound: float

    def __call__(self, x, u, w):
        return self.bound - x[IDX_TR]


@dataclass(frozen=True)
class MolesC:
    """phi(x) = -V * c_C (maximize product moles)."""

    def __call__(self, x):
        return -x[IDX_V] * x[IDX_CC]


@dataclass(frozen=True)
class GovernorTheta:
    backoff_hi: float
    backoff_lo: float
    horizon: int
    scheme: Scheme

    @classmethod
    def from_tuple(cls, theta) -> "GovernorTheta":
        hi, lo, p, scheme = theta
        return cls(float(hi), float(lo), int(p), Scheme(scheme))


def _jacket_setpoint(Tr: float, p: ReactorParams) -> float:
    return min(max(Tr - p.K_T * (Tr - p.T_center), p.T_set_min), p.T_set_max)


def _prediction_ok(x, feed: float, theta: GovernorTheta, p: ReactorParams) -> bool:
    """Whether the nominal p-step prediction at constant feed stays in the tightened band.

    The jacket set-point follows the proportional law along the prediction.
    A failed or non-finite prediction counts as a violation.
    """
    lo = p.T_lo + theta.backoff_lo
    hi = p.T_hi - theta.backoff_hi
    substeps = 4 if theta.scheme is Scheme.FORWARD_EULER else 1
    rhs = _Rhs(p)
    w0 = (0.0, 0.0, 0.0)
    xp = np.asarray(x, dtype=float)
    for _ in range(theta.horizon):
        u = (feed, _jacket_setpoint(xp[IDX_TR], p))
        try:
            xp = integrate_step(rhs, xp, u, w0, p.dt, theta.scheme, substeps)
        except (IntegrationError, DomainError, FloatingPointError):
            return False
        Tr = xp[IDX_TR]
        if not (np.all(np.isfinite(xp)) and lo <= Tr <= hi):
            return False
    return True


def governor_control(x, theta: GovernorTheta, p: ReactorParams) -> np.ndarray:
    """Largest feed whose nominal lookahead respects the backed-off temperature band."""
    T_set = _jacket_setpoint(float(x[IDX_TR]), p)
    if theta.backoff_lo + theta.backoff_hi >= p.T_hi - p.T_lo:
        return np.array([0.0, T_set])
    if _prediction_ok(x, p.feed_max, theta, p):
        return np.array([p.feed_max, T_set])
    if not _prediction_ok(x, 0.0, theta, p):
        return np.array([0.0, T_set])
    lo, hi = 0.0, p.feed_max
    for _ in range(p.bisection_iters):
        mid = 0.5 * (lo + hi)
        if _prediction_ok(x, mid, theta, p):
            lo = mid
        else:
            hi = mid
    return np.array([lo, T_set])


@dataclass(frozen=True)
class Governor:
    """Controller callable: theta = (backoff_hi, backoff_lo, horizon, scheme)."""
    params: ReactorParams = field(default_factory=ReactorParams)

    def __call__(self, x, theta):
        return governor_control(x, GovernorTheta.from_tuple(theta), self.params)


def governor_space(max_backoff: float = 0.5, horizon=(1, 10)) -> ParameterSpace:
    return ParameterSpace((
        Continuous(0.0, max_backoff, "backoff_hi"),
        Continuous(0.0, max_backoff, "backoff_lo"),
        Integer(horizon[0], horizon[1], "horizon"),
        Categorical(tuple(s.value for s in Scheme), "scheme"),
    ))


def reactor_problem(params: ReactorParams | None = None, seed_theta=(0.5, 0.5, 1, "ForwardEuler")) -> Problem:
    params = params or ReactorParams()
    return Problem(
        name="reactor",
        plant=ReactorPlant(params),
        controller=Governor(params),
        space=governor_space(),
        perf=Terminal(MolesC()),
        seed_theta=tuple(seed_theta) if seed_theta is not None else None,
        report_state=IDX_TR,
    )


def with_params(params: ReactorParams, **changes) -> ReactorParams:
    return replace(params, **changes)
