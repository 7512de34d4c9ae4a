"""Fixed-step one-step integrators with a zero-order hold on input and disturbance."""

from __future__ import annotations

from enum import Enum

import numpy as np


class Scheme(str, Enum):
    FORWARD_EULER = "ForwardEuler"
    RK4 = "RK4"
    IMPLICIT_EULER = "ImplicitEuler"


class IntegrationError(RuntimeError):
    pass


NEWTON_TOL = 1e-10
NEWTON_MAXITER = 50


def _euler(rhs, x, u, w, h):
    return x + h * rhs(x, u, w)


def _rk4(rhs, x, u, w, h):
    k1 = rhs(x, u, w)
    k2 = rhs(x + 0.5 * h * k1, u, w)
    k3 = rhs(x + 0.5 * h * k2, u, w)
    k4 = rhs(x + h * k3, u, w)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _implicit_euler(rhs, x, u, w, h):
    """Damped Newton on y - x - h*rhs(y) = 0 with a forward-difference Jacobian."""
    n = x.shape[0]

    def residual(y):
        return y - x - h * rhs(y, u, w)

    y = x + h * rhs(x, u, w)
    r = residual(y)
    rn = np.linalg.norm(r)
    for _ in range(NEWTON_MAXITER):
        if not np.isfinite(rn):
            break
        if rn <= NEWTON_TOL:
            return y
        jac = np.empty((n, n))
        for i in range(n):
            step = 1.4901161193847656e-08 * max(1.0, abs(y[i]))
            yp = y.copy()
            yp[i] += step
            jac[:, i] = (residual(yp) - r) / step
        try:
            dy = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError as exc:
            raise IntegrationError(f"singular Newton matrix: {exc}") from None
        lam = 1.0
        for _ in range(30):
            y_new = y + lam * dy
            r_new = residual(y_new)
            rn_new = np.linalg.norm(r_new)
            if np.isfinite(rn_new) and rn_new < rn:
                break
            lam *= 0.5
        else:
            # no decrease along the Newton direction; accept the full step and let
            # the iteration cap decide
            y_new = y + dy
            r_new = residual(y_new)
            rn_new = np.linalg.norm(r_new)
        y, r, rn = y_new, r_new, rn_new
    if np.isfinite(rn) and rn <= NEWTON_TOL:
        return y
    raise IntegrationError(f"implicit Euler Newton did not converge (residual {rn:.3e})")


_STEPPERS = {
    Scheme.FORWARD_EULER: _euler,
    Scheme.RK4: _rk4,
    Scheme.IMPLICIT_EULER: _implicit_euler,
}


def integrate_step(rhs, x, u, w, dt: float, scheme, substeps: int = 1) -> np.ndarray:
    """Advance ``x`` by ``dt`` using ``substeps`` equal steps of ``scheme``.

    ``rhs(x, u, w)`` returns dx/dt; ``u`` and ``w`` are held constant over
    the whole interval.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if substeps < 1:
        raise ValueError(f"substeps must be >= 1, got {substeps}")
    stepper = _STEPPERS[Scheme(scheme)]
    h = dt / substeps
    x = np.asarray(x, dtype=float)
    for _ in range(substeps):
        x = stepper(rhs, x, u, w, h)
    return x
