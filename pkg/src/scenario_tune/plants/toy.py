"""Scalar linear plant with a proportional controller; small enough to check by hand."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..sim import Average, Problem, Scenario
from ..spaces import Continuous, ParameterSpace


@dataclass(frozen=True)
class ToyPlant:
    a: float = 1.05
    T: int = 20
    w_max: float = 0.1
    x0_lo: float = 0.8
    x0_hi: float = 1.2
    x_max: float = 1.5

    n_x = 1
    state_names = ("x",)
    input_names = ("u",)

    def step(self, x, u, w):
        return self.a * x + u + w

    @property
    def constraints(self):
        return (AbsBound(self.x_max),)

    def sample_scenario(self, rng: np.random.Generator) -> Scenario:
        x0 = rng.uniform(self.x0_lo, self.x0_hi, size=1)
        w = rng.uniform(-self.w_max, self.w_max, size=(self.T, 1))
        return Scenario(x0, w)

    def nominal_scenario(self) -> Scenario:
        return Scenario(np.array([0.5 * (self.x0_lo + self.x0_hi)]), np.zeros((self.T, 1)))


@dataclass(frozen=True)
class AbsBound:
    """g = |x| - bound."""
    bound: float

    def __call__(self, x, u, w):
        return abs(x[0]) - self.bound


@dataclass(frozen=True)
class LinearFeedback:
    """u = -gain * x with gain = theta[0]."""

    def __call__(self, x, theta):
        return np.array([-theta[0] * x[0]])


@dataclass(frozen=True)
class QuadraticCost:
    """x^2 + r*u^2."""
    r: float = 0.1

    def __call__(self, x, u, w):
        return x[0] * x[0] + self.r * u[0] * u[0]


def scalar_toy_plant(**overrides) -> Problem:
    plant = ToyPlant(**overrides)
    space = ParameterSpace((Continuous(0.0, 2.0, "gain"),))
    return Problem(
        name="toy",
        plant=plant,
        controller=LinearFeedback(),
        space=space,
        perf=Average(QuadraticCost()),
        seed_theta=None,
        report_state=0,
    )
