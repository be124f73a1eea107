"""Plant dynamics, disturbance signal generators, and fixed-step integration.

The plant is a second-order nonlinear system where the disturbance enters
the x1 channel while the control input enters the x2 channel (mismatched):

    x1' = x2 + d
    x2' = a(x) + b(x) * u
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Tuple


class SimulationError(RuntimeError):
    """A step of the closed loop produced non-finite or singular values."""


class SingularGainError(SimulationError):
    """b(x) vanished; the feedback-linearizing inverse does not exist."""


# Disturbance coefficient vector z: d enters x1', never x2' (mismatched channel).
DISTURBANCE_CHANNEL: Tuple[float, float] = (1.0, 0.0)


@dataclass(frozen=True, slots=True)
class PlantState:
    """State pair (x1, x2) of the second-order plant."""

    x1: float
    x2: float

    def is_finite(self) -> bool:
        return math.isfinite(self.x1) and math.isfinite(self.x2)


@dataclass(frozen=True)
class PlantModel:
    """Drift a(x) and input gain b(x) of the plant.

    b(x) must be nonzero at every visited state; all control laws divide by it.
    """

    a: Callable[[PlantState], float]
    b: Callable[[PlantState], float]
    name: str = "custom"

    def gain_at(self, state: PlantState) -> float:
        b = self.b(state)
        if b == 0.0 or not math.isfinite(b):
            raise SingularGainError(
                f"b(x) = {b!r} at x = ({state.x1}, {state.x2}); control laws need b(x) != 0"
            )
        return b


def benchmark_model() -> PlantModel:
    """The simulation-study plant: a(x) = -x1 - x2 + 0.3*cos(x1) + exp(x1), b(x) = 1."""

    def a(s: PlantState) -> float:
        return -s.x1 - s.x2 + 0.3 * math.cos(s.x1) + math.exp(s.x1)

    return PlantModel(a=a, b=lambda s: 1.0, name="benchmark")


def double_integrator_model() -> PlantModel:
    """a(x) = 0, b(x) = 1. Used by the closed-form linear test oracles."""
    return PlantModel(a=lambda s: 0.0, b=lambda s: 1.0, name="double-integrator")


# ---------------------------------------------------------------------------
# Disturbance profiles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ZeroDisturbance:
    pass


@dataclass(frozen=True)
class StepDisturbance:
    magnitude: float
    t_on: float
    t_off: float


@dataclass(frozen=True)
class MultiSineDisturbance:
    """offset + sum_k amplitudes[k] * sin(frequencies[k] * t), active on [t_on, t_off)."""

    offset: float
    amplitudes: Tuple[float, ...]
    frequencies: Tuple[float, ...]
    t_on: float
    t_off: float

    def __post_init__(self):
        if len(self.amplitudes) != len(self.frequencies):
            raise ValueError("amplitudes and frequencies must have equal length")


@dataclass(frozen=True)
class PiecewiseDisturbance:
    """Ordered, non-overlapping (interval, profile) segments; 0 outside all of them."""

    segments: Tuple[Tuple[Tuple[float, float], "DisturbanceProfile"], ...]

    def __post_init__(self):
        prev_end = -math.inf
        for (t0, t1), _ in self.segments:
            if t0 >= t1:
                raise ValueError(f"empty or inverted segment interval ({t0}, {t1})")
            if t0 < prev_end:
                raise ValueError("piecewise segments overlap or are out of order")
            prev_end = t1


DisturbanceProfile = (
    ZeroDisturbance | StepDisturbance | MultiSineDisturbance | PiecewiseDisturbance
)


def eval_disturbance(profile: DisturbanceProfile, t: float) -> float:
    """Evaluate d(t). Pure and total: outside the active window the value is 0."""
    if isinstance(profile, ZeroDisturbance):
        return 0.0
    if isinstance(profile, StepDisturbance):
        return profile.magnitude if profile.t_on <= t < profile.t_off else 0.0
    if isinstance(profile, MultiSineDisturbance):
        if not (profile.t_on <= t < profile.t_off):
            return 0.0
        d = profile.offset
        for amp, freq in zip(profile.amplitudes, profile.frequencies):
            d += amp * math.sin(freq * t)
        return d
    if isinstance(profile, PiecewiseDisturbance):
        for (t0, t1), sub in profile.segments:
            if t0 <= t < t1:
                return eval_disturbance(sub, t)
        return 0.0
    raise TypeError(f"unknown disturbance profile {type(profile).__name__}")


def benchmark_disturbance() -> PiecewiseDisturbance:
    """The three-phase scenario: none, step d = 0.5 on [20, 40), multi-sine on [40, 60)."""
    step = StepDisturbance(magnitude=0.5, t_on=20.0, t_off=40.0)
    sine = MultiSineDisturbance(
        offset=0.25,
        amplitudes=(0.15, 0.15),
        frequencies=(0.5, 1.5),
        t_on=40.0,
        t_off=60.0,
    )
    return PiecewiseDisturbance(seg(step, sine))


def seg(*profiles) -> Tuple[Tuple[Tuple[float, float], DisturbanceProfile], ...]:
    """Build piecewise segments from profiles that carry their own windows."""
    return tuple(((p.t_on, p.t_off), p) for p in profiles)


# ---------------------------------------------------------------------------
# Dynamics and integration
# ---------------------------------------------------------------------------

def plant_derivatives(
    state: PlantState, u: float, d: float, model: PlantModel
) -> Tuple[float, float]:
    """(x1', x2') = (x2 + d, a(x) + b(x)*u)."""
    dx1 = state.x2 + d
    dx2 = model.a(state) + model.b(state) * u
    if not math.isfinite(dx1):
        raise SimulationError(f"non-finite x1 derivative: x2={state.x2}, d={d}")
    if not math.isfinite(dx2):
        raise SimulationError(
            f"non-finite x2 derivative at x=({state.x1}, {state.x2}), u={u}"
        )
    return dx1, dx2


def integrate_step(
    state: PlantState, derivs: Tuple[float, float], dt: float
) -> PlantState:
    """One explicit Euler step with the supplied derivatives held constant."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    new = PlantState(state.x1 + dt * derivs[0], state.x2 + dt * derivs[1])
    if not new.is_finite():
        raise SimulationError(f"Euler step produced non-finite state {new}")
    return new


def rk4_step(
    state: PlantState,
    deriv_fn: Callable[[PlantState], Tuple[float, float]],
    dt: float,
) -> PlantState:
    """One classical 4th-order Runge-Kutta step of x' = deriv_fn(x).

    Controller and observer signals inside deriv_fn are expected to be held
    constant over the step (zero-order hold at 1 kHz sampling).
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    k1 = deriv_fn(state)
    k2 = deriv_fn(PlantState(state.x1 + 0.5 * dt * k1[0], state.x2 + 0.5 * dt * k1[1]))
    k3 = deriv_fn(PlantState(state.x1 + 0.5 * dt * k2[0], state.x2 + 0.5 * dt * k2[1]))
    k4 = deriv_fn(PlantState(state.x1 + dt * k3[0], state.x2 + dt * k3[1]))
    new = PlantState(
        state.x1 + dt / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
        state.x2 + dt / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]),
    )
    if not new.is_finite():
        raise SimulationError(f"RK4 step produced non-finite state {new}")
    return new


def advance(
    state: PlantState,
    u: float,
    d: float,
    model: PlantModel,
    dt: float,
    scheme: str = "rk4",
) -> PlantState:
    """Advance the plant one fixed step with u and d held constant."""
    if scheme == "euler":
        return integrate_step(state, plant_derivatives(state, u, d, model), dt)
    if scheme == "rk4":
        return rk4_step(state, lambda s: plant_derivatives(s, u, d, model), dt)
    raise ValueError(f"unknown integration scheme {scheme!r}")
