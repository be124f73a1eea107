"""The four feedback-linearization control laws.

All laws cancel the known drift via -b^{-1}(x) * a(x) and add linear state
feedback; they differ only in how the mismatched disturbance is compensated:
not at all (FLC), by integral action (FLC-I), or by an observer estimate fed
through the k2 channel (FLC-BNDO, FLC-SLDO).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

from .plant import PlantModel, PlantState


class Variant(str, enum.Enum):
    FLC = "flc"
    FLC_I = "flci"
    FLC_BNDO = "flc-bndo"
    FLC_SLDO = "flc-sldo"

    @classmethod
    def parse(cls, name: str) -> "Variant":
        key = name.strip().lower().replace("_", "-")
        aliases = {
            "flc": cls.FLC,
            "flci": cls.FLC_I,
            "flc-i": cls.FLC_I,
            "bndo": cls.FLC_BNDO,
            "flc-bndo": cls.FLC_BNDO,
            "sldo": cls.FLC_SLDO,
            "flc-sldo": cls.FLC_SLDO,
        }
        if key not in aliases:
            raise ValueError(f"unknown controller variant {name!r}")
        return aliases[key]


@dataclass(frozen=True)
class ControllerGains:
    """Feedback gains; k1, k2 must be positive for closed-loop stability."""

    k1: float
    k2: float
    ki: float = 0.0

    def __post_init__(self):
        if self.k1 <= 0 or self.k2 <= 0:
            raise ValueError(f"k1 and k2 must be positive, got ({self.k1}, {self.k2})")
        if self.ki < 0:
            raise ValueError(f"ki must be non-negative, got {self.ki}")


@dataclass(frozen=True)
class ControllerState:
    """Mutable controller memory; only FLC-I accumulates anything."""

    variant: Variant
    integral_x1: float = 0.0


def flc_control(state: PlantState, gains: ControllerGains, model: PlantModel) -> float:
    """u = -b^{-1}(x) * (a(x) + k1*x1 + k2*x2)."""
    b = model.gain_at(state)
    return -(model.a(state) + gains.k1 * state.x1 + gains.k2 * state.x2) / b


def flci_control(
    state: PlantState,
    cstate: ControllerState,
    gains: ControllerGains,
    model: PlantModel,
    dt: float,
) -> tuple[float, ControllerState]:
    """FLC plus ki * integral(x1); the integral uses the rectangle rule."""
    if cstate.variant is not Variant.FLC_I:
        raise ValueError(f"flci_control called with variant {cstate.variant}")
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    b = model.gain_at(state)
    u = -(
        model.a(state)
        + gains.k1 * state.x1
        + gains.k2 * state.x2
        + gains.ki * cstate.integral_x1
    ) / b
    return u, replace(cstate, integral_x1=cstate.integral_x1 + state.x1 * dt)


def flc_bndo_control(
    state: PlantState, d_hat: float, gains: ControllerGains, model: PlantModel
) -> float:
    """u = -b^{-1}(x) * (a(x) + k1*x1 + k2*(x2 + d_hat))."""
    b = model.gain_at(state)
    return -(
        model.a(state) + gains.k1 * state.x1 + gains.k2 * (state.x2 + d_hat)
    ) / b


def flc_sldo_control(
    state: PlantState,
    d_hat_sl: float,
    d_hat_sl_rate: float,
    gains: ControllerGains,
    model: PlantModel,
) -> float:
    """u = -b^{-1}(x) * (a(x) + k1*x1 + k2*(x2 + d_hat_sl) + d_hat_sl_rate)."""
    b = model.gain_at(state)
    return -(
        model.a(state)
        + gains.k1 * state.x1
        + gains.k2 * (state.x2 + d_hat_sl)
        + d_hat_sl_rate
    ) / b


def predict_steady_state_x1(
    variant: Variant, gains: ControllerGains, d_const: float
) -> float:
    """Closed-form x1 plateau under a constant disturbance; a test oracle.

    Plain FLC settles at k2*d/k1; the compensated laws drive x1 to zero.
    """
    if variant is Variant.FLC:
        return gains.k2 * d_const / gains.k1
    return 0.0
