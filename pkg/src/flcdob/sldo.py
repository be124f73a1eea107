"""Self-learning disturbance observer (SLDO).

Feedback-error-learning composition: a conventional PD-style law tau_c trains
the type-2 neuro-fuzzy network whose output tau_n gradually takes over, and
the estimate integrates d_hat_sl' = tau = tau_c - tau_n. The learning error
is the sliding surface s = tau_c + xi2/l1.

Two closure modes are provided for the law's inputs (xi1, xi2):

* "closed" (default): the conventional law acts on the observer's own
  estimation error. xi1 = d/dt d_hat_bn + l1*(d_hat_bn - d_hat_sl), which
  causally equals l1*(d - d_hat_sl) up to discretization, and xi2 is the rate
  of xi1, obtained by solving the one-step algebraic loop through tau (xi2
  depends on tau, which depends on xi2). With eta*l1 >> 1 the conventional
  part alone then tracks the true disturbance with near-unit gain at all
  frequencies, and a frozen network output cannot make the estimate drift:
  the error feedback absorbs it.

* "open": xi1 and xi2 are plain first/second backward differences of the
  BNDO estimate. The estimate is then a pure integral of derivative signals,
  so any residual network output at quiescent inputs integrates into an
  unbounded offset; useful as the reference behavior of the uncorrected
  composition, not for long runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .plant import SimulationError
from .t2nfs import GuardCounts, T2nfsParams, adapt, forward

CLOSURES = ("closed", "open")


@dataclass(frozen=True, slots=True)
class SldoState:
    d_hat_sl: float
    xi1: float          # conventional-law proportional input (estimate rate)
    xi2: float          # conventional-law derivative input
    xi1_rate: float     # backward differences of the (clipped) network inputs
    xi2_rate: float
    tau_c: float
    tau_n: float
    tau: float
    s: float
    eta: float
    l1: float
    input_clip: tuple[float, float]  # network input saturation (MF universe)
    bn_prev: float      # d_hat_bn one step back
    bn_prev2: float     # d_hat_bn two steps back
    xi1_net_prev: float  # previous clipped network inputs, for the rate terms
    xi2_net_prev: float
    n_seen: int         # BNDO samples consumed so far
    guards: int         # adaptation guard count of the latest update
    closure: str = "closed"

    def __post_init__(self):
        if self.eta <= 0:
            raise ValueError(f"eta must be positive, got {self.eta}")
        if self.l1 <= 0:
            raise ValueError(f"l1 must be positive, got {self.l1}")
        if self.closure not in CLOSURES:
            raise ValueError(f"closure must be one of {CLOSURES}, got {self.closure!r}")


def initial_sldo(
    eta: float,
    l1: float,
    input_clip: tuple[float, float] = (-3.0, 3.0),
    closure: str = "closed",
) -> SldoState:
    return SldoState(
        d_hat_sl=0.0, xi1=0.0, xi2=0.0, xi1_rate=0.0, xi2_rate=0.0,
        tau_c=0.0, tau_n=0.0, tau=0.0, s=0.0,
        eta=eta, l1=l1, input_clip=input_clip,
        bn_prev=0.0, bn_prev2=0.0, xi1_net_prev=0.0, xi2_net_prev=0.0,
        n_seen=0, guards=0, closure=closure,
    )


def sldo_inputs(
    d_hat_bn_now: float, d_hat_bn_prev: float, d_hat_bn_prev2: float, dt: float
) -> tuple[float, float]:
    """Backward differences: xi1 = first, xi2 = second derivative estimate."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    xi1 = (d_hat_bn_now - d_hat_bn_prev) / dt
    xi2 = (d_hat_bn_now - 2.0 * d_hat_bn_prev + d_hat_bn_prev2) / (dt * dt)
    return xi1, xi2


def sldo_tau_c(xi1: float, xi2: float, eta: float) -> float:
    """Conventional estimation law tau_c = xi1 + eta * xi2."""
    return xi1 + eta * xi2


def sliding_surface(tau_c: float, xi2: float, l1: float) -> float:
    """Learning error s = tau_c + xi2 / l1."""
    if l1 <= 0:
        raise ValueError(f"l1 must be positive, got {l1}")
    return tau_c + xi2 / l1


def sldo_update(
    obs: SldoState,
    bndo_d_hat: float,
    t2nfs: T2nfsParams,
    dt: float,
    sgn_delta: float = 0.05,
    adapt_enabled: bool = True,
    dead_zone: float = 0.05,
) -> tuple[SldoState, T2nfsParams]:
    """One step: differencing, conventional law, inference, adaptation, estimate.

    The BNDO must already be updated for this step. The first two calls are
    differencing warm-up and use zeroed difference inputs. Returns the new
    observer state and the (possibly adapted) network parameters.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")

    if obs.n_seen >= 2:
        diff1, diff2 = sldo_inputs(bndo_d_hat, obs.bn_prev, obs.bn_prev2, dt)
    else:
        diff1, diff2 = 0.0, 0.0

    lo, hi = obs.input_clip
    eta, l1 = obs.eta, obs.l1

    if obs.closure == "closed":
        # xi1 carries the observer's own estimation error; xi2 = rate of xi1
        # = diff2 + l1*(diff1 - tau) couples back through tau, so the linear
        # loop is solved with the network output relaxed by fixed-point
        # iteration (tau_n varies slowly; two passes suffice).
        xi1 = diff1 + l1 * (bndo_d_hat - obs.d_hat_sl)
        ff = diff2 + l1 * diff1
        tau_n = obs.tau_n
        for _ in range(2):
            tau = (xi1 + eta * ff - tau_n) / (1.0 + eta * l1)
            xi2 = ff - l1 * tau
            xi1_net = min(max(xi1, lo), hi)
            xi2_net = min(max(xi2, lo), hi)
            firing = forward(t2nfs, xi1_net, xi2_net)
            tau_n = firing.tau_n
        tau = (xi1 + eta * ff - tau_n) / (1.0 + eta * l1)
        xi2 = ff - l1 * tau
    else:
        xi1, xi2 = diff1, diff2
        xi1_net = min(max(xi1, lo), hi)
        xi2_net = min(max(xi2, lo), hi)
        firing = forward(t2nfs, xi1_net, xi2_net)
        tau_n = firing.tau_n

    tau_c = sldo_tau_c(xi1, xi2, eta)
    tau = tau_c - tau_n  # recomputed so the composition identity is bit-exact
    s = sliding_surface(tau_c, xi2, l1)

    if obs.n_seen >= 3:
        xi1_rate = (xi1_net - obs.xi1_net_prev) / dt
        xi2_rate = (xi2_net - obs.xi2_net_prev) / dt
    else:
        xi1_rate, xi2_rate = 0.0, 0.0

    guards = GuardCounts()
    if adapt_enabled:
        if xi1_net in (lo, hi) or xi2_net in (lo, hi):
            # Input saturation: the network sees the clip value, not the
            # signal, so any gradient step would chase a fabricated error.
            guards = GuardCounts(rail=1)
        else:
            t2nfs, guards = adapt(
                t2nfs, firing, xi1_net, xi2_net, xi1_rate, xi2_rate, s, dt,
                sgn_delta=sgn_delta, dead_zone=dead_zone,
            )

    d_hat_sl = obs.d_hat_sl + tau * dt
    if not math.isfinite(d_hat_sl):
        raise SimulationError(f"SLDO estimate became non-finite: {d_hat_sl}")

    new = SldoState(
        d_hat_sl=d_hat_sl,
        xi1=xi1, xi2=xi2, xi1_rate=xi1_rate, xi2_rate=xi2_rate,
        tau_c=tau_c, tau_n=tau_n, tau=tau, s=s,
        eta=eta, l1=l1, input_clip=obs.input_clip,
        bn_prev=bndo_d_hat, bn_prev2=obs.bn_prev,
        xi1_net_prev=xi1_net, xi2_net_prev=xi2_net,
        n_seen=obs.n_seen + 1,
        guards=guards.total,
        closure=obs.closure,
    )
    return new, t2nfs
