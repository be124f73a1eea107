"""Basic nonlinear disturbance observer (BNDO).

Internal state p with gain row l = [l1, l2] gives the estimate
d_hat = p + l.x, whose error obeys e_d' + l1*e_d = d' — exponential decay at
rate l1 for constant disturbances. The observer reads only measured states
and the applied control, never the true disturbance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .plant import PlantModel, PlantState, SimulationError


@dataclass(frozen=True, slots=True)
class BndoState:
    p: float
    d_hat: float
    l1: float
    l2: float = 0.0

    def __post_init__(self):
        if self.l1 <= 0:
            raise ValueError(f"observer gain l1 must be positive, got {self.l1}")


def initial_bndo(x0: PlantState, l1: float, l2: float = 0.0) -> BndoState:
    """Start with a zero disturbance estimate: p(0) = -l.x(0)."""
    p0 = -(l1 * x0.x1 + l2 * x0.x2)
    return BndoState(p=p0, d_hat=0.0, l1=l1, l2=l2)


def _p_dot(
    p: float, x1: float, x2: float, u: float, obs: BndoState, model: PlantModel
) -> float:
    # p' = -l.z.p - l.(z.l.x + g1(x) + g2(x)u) with z = [1, 0],
    # g1 = [x2, a(x)], g2 = [0, b(x)]; l.z = l1.
    state = PlantState(x1, x2)
    lx = obs.l1 * x1 + obs.l2 * x2
    lg1 = obs.l1 * x2 + obs.l2 * model.a(state)
    lg2u = obs.l2 * model.b(state) * u
    return -obs.l1 * p - (obs.l1 * lx + lg1 + lg2u)


def bndo_update(
    obs: BndoState,
    x: PlantState,
    u: float,
    model: PlantModel,
    dt: float,
    x_begin: PlantState | None = None,
    scheme: str = "rk4",
) -> BndoState:
    """Advance p one fixed step and refresh d_hat = p + l.x.

    `x` is the measured state at the end of the integration interval; if
    `x_begin` (the previous sample) is supplied, the state path is linearly
    interpolated across the RK4 stages, otherwise x is held constant. u is
    zero-order held. Only measured signals enter: the true d never does.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")

    if x_begin is None:
        x_begin = x

    def x_at(frac: float) -> tuple[float, float]:
        return (
            x_begin.x1 + frac * (x.x1 - x_begin.x1),
            x_begin.x2 + frac * (x.x2 - x_begin.x2),
        )

    p = obs.p
    if scheme == "euler":
        x1, x2 = x_at(0.0)
        p_new = p + dt * _p_dot(p, x1, x2, u, obs, model)
    elif scheme == "rk4":
        xa = x_at(0.0)
        xm = x_at(0.5)
        xe = x_at(1.0)
        k1 = _p_dot(p, xa[0], xa[1], u, obs, model)
        k2 = _p_dot(p + 0.5 * dt * k1, xm[0], xm[1], u, obs, model)
        k3 = _p_dot(p + 0.5 * dt * k2, xm[0], xm[1], u, obs, model)
        k4 = _p_dot(p + dt * k3, xe[0], xe[1], u, obs, model)
        p_new = p + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    else:
        raise ValueError(f"unknown integration scheme {scheme!r}")

    if not math.isfinite(p_new):
        raise SimulationError(f"BNDO internal state became non-finite: p = {p_new}")
    d_hat = p_new + obs.l1 * x.x1 + obs.l2 * x.x2
    return BndoState(p=p_new, d_hat=d_hat, l1=obs.l1, l2=obs.l2)


def coupled_step(
    x: PlantState,
    obs: BndoState,
    u: float,
    d: float,
    model: PlantModel,
    dt: float,
    scheme: str = "rk4",
) -> tuple[PlantState, BndoState]:
    """Advance plant and observer internal state as one joint ODE (u, d held).

    Integrating (x1, x2, p) together keeps the exponential error dynamics of
    the observer discretization-consistent with the plant; used by the harness
    when the observer sees noiseless measurements.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")

    def f(v):
        x1, x2, p = v
        state = PlantState(x1, x2)
        dx1 = x2 + d
        dx2 = model.a(state) + model.b(state) * u
        return (dx1, dx2, _p_dot(p, x1, x2, u, obs, model))

    v = (x.x1, x.x2, obs.p)
    if scheme == "euler":
        k1 = f(v)
        new = tuple(v[i] + dt * k1[i] for i in range(3))
    elif scheme == "rk4":
        k1 = f(v)
        k2 = f(tuple(v[i] + 0.5 * dt * k1[i] for i in range(3)))
        k3 = f(tuple(v[i] + 0.5 * dt * k2[i] for i in range(3)))
        k4 = f(tuple(v[i] + dt * k3[i] for i in range(3)))
        new = tuple(
            v[i] + dt / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i])
            for i in range(3)
        )
    else:
        raise ValueError(f"unknown integration scheme {scheme!r}")

    x_new = PlantState(new[0], new[1])
    p_new = new[2]
    if not (x_new.is_finite() and math.isfinite(p_new)):
        raise SimulationError(
            f"coupled plant/observer step produced non-finite values {new}"
        )
    d_hat = p_new + obs.l1 * x_new.x1 + obs.l2 * x_new.x2
    return x_new, BndoState(p=p_new, d_hat=d_hat, l1=obs.l1, l2=obs.l2)


def bndo_rate(obs_prev: BndoState, obs_now: BndoState, dt: float) -> float:
    """Backward-difference estimate of d_hat' from two consecutive updates."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    return (obs_now.d_hat - obs_prev.d_hat) / dt
