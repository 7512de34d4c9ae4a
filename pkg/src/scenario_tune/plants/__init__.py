from .integrators import IntegrationError, Scheme, integrate_step
from .reactor import (
    Governor,
    GovernorTheta,
    ReactorParams,
    ReactorPlant,
    governor_control,
    governor_space,
    reactor_problem,
    reactor_rhs,
)
from .toy import scalar_toy_plant

__all__ = [
    "IntegrationError", "Scheme", "integrate_step", "Governor", "GovernorTheta", "ReactorParams",
    "ReactorPlant", "governor_control", "governor_space", "reactor_problem", "reactor_rhs",
    "scalar_toy_plant",
]
