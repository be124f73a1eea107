"""Interval type-2 Takagi-Sugeno-Kang neuro-fuzzy engine.

Two inputs (xi1, xi2) with lower/upper Gaussian membership families, product
firing strengths, per-family normalization, and a q-weighted blend of the
lower and upper consequent aggregates. The parameters train online under
sliding-mode rules driven by sgn(s) of a learning surface supplied by the
caller; the smoothed sign s/(|s| + delta) replaces the hard sign everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

SIGMA_FLOOR = 1e-3      # spreads are clamped from below so memberships stay defined
GUARD_EPS = 1e-6        # denominator magnitude below which a rule freezes for a step
DEGENERATE_FIRING = 1e-300

# The adaptation rules divide by (xi - c) and by inner products that can pass
# arbitrarily close to zero; a rule whose Euler step would exceed these bounds
# freezes for the step (and is counted), exactly like a small-denominator hit.
MAX_CENTER_STEP = 0.3
MAX_SIGMA_REL_STEP = 0.1
MAX_F_STEP = 0.1
MAX_Q_STEP = 0.01


class DegenerateFiringError(RuntimeError):
    """All rule firing strengths underflowed; cannot normalize."""


def smoothed_sign(s: float, delta: float = 0.05) -> float:
    """Chattering-free sign approximation s/(|s| + delta)."""
    if delta <= 0:
        raise ValueError(f"delta must be positive, got {delta}")
    return s / (abs(s) + delta)


@dataclass(frozen=True)
class T2nfsParams:
    """All adaptable parameters. Arrays are treated as immutable snapshots."""

    c1_lo: np.ndarray   # (I,) lower centers, input 1
    c1_up: np.ndarray
    s1_lo: np.ndarray   # (I,) lower spreads, input 1 (> 0)
    s1_up: np.ndarray
    c2_lo: np.ndarray   # (J,)
    c2_up: np.ndarray
    s2_lo: np.ndarray
    s2_up: np.ndarray
    f: np.ndarray       # (I, J) rule consequents
    q: float            # lower/upper mixing weight, kept in [0, 1] by adapt()
    alpha: float        # learning rate (> 0)

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        i, j = self.f.shape
        for name, arr, n in (
            ("c1_lo", self.c1_lo, i), ("c1_up", self.c1_up, i),
            ("s1_lo", self.s1_lo, i), ("s1_up", self.s1_up, i),
            ("c2_lo", self.c2_lo, j), ("c2_up", self.c2_up, j),
            ("s2_lo", self.s2_lo, j), ("s2_up", self.s2_up, j),
        ):
            if arr.shape != (n,):
                raise ValueError(f"{name} must have shape ({n},), got {arr.shape}")
        for name, arr in (("s1_lo", self.s1_lo), ("s1_up", self.s1_up),
                          ("s2_lo", self.s2_lo), ("s2_up", self.s2_up)):
            if np.any(arr <= 0):
                raise ValueError(f"{name} must be strictly positive")

    @property
    def n_rules(self) -> int:
        return self.f.size


@dataclass(frozen=True)
class FiringState:
    """Rule firing strengths and the network output for one input pair."""

    w_lo: np.ndarray       # (I, J)
    w_up: np.ndarray
    wn_lo: np.ndarray      # normalized: each family sums to 1
    wn_up: np.ndarray
    tau_n: float


@dataclass(frozen=True)
class GuardCounts:
    """How many adaptation guards triggered this step.

    sigma/center/q count the individual triggering conditions inside the
    membership-parameter group (which freezes as a whole -- see adapt); f
    counts the consequent rule's own guard; dead_zone marks a step skipped
    entirely because |s| was inside the adaptation dead zone; rail marks a
    step skipped because a network input sat at its saturation limit (the
    gradients would reflect the clip, not the signal).
    """

    sigma: int = 0
    f: int = 0
    q: int = 0
    center: int = 0
    dead_zone: int = 0
    rail: int = 0

    @property
    def total(self) -> int:
        return (self.sigma + self.f + self.q + self.center
                + self.dead_zone + self.rail)


def initial_params(
    n_mf1: int = 3,
    n_mf2: int = 3,
    input_range: tuple[float, float] = (-3.0, 3.0),
    alpha: float = 0.03,
    q0: float = 0.5,
    upper_spread_ratio: float = 1.3,
) -> T2nfsParams:
    """Evenly spaced centers over the expected input range, f = 0, q = q0.

    Lower spreads are range/(I-1); upper spreads 1.3x the lower ones so the
    two families start distinct (type-2). f = 0 makes the network output
    vanish initially, so the conventional estimation law starts alone.
    """
    lo, hi = input_range
    span = hi - lo

    def family(n: int) -> tuple[np.ndarray, np.ndarray]:
        centers = np.linspace(lo, hi, n) if n > 1 else np.array([(lo + hi) / 2.0])
        spread = span / (n - 1) if n > 1 else span / 2.0
        return centers, np.full(n, spread)

    c1, s1 = family(n_mf1)
    c2, s2 = family(n_mf2)
    return T2nfsParams(
        c1_lo=c1.copy(), c1_up=c1.copy(),
        s1_lo=s1.copy(), s1_up=s1 * upper_spread_ratio,
        c2_lo=c2.copy(), c2_up=c2.copy(),
        s2_lo=s2.copy(), s2_up=s2 * upper_spread_ratio,
        f=np.zeros((n_mf1, n_mf2)),
        q=q0,
        alpha=alpha,
    )


def membership(xi, c, sigma):
    """Gaussian membership exp(-((xi - c)/sigma)^2); scalar or elementwise."""
    if np.any(np.asarray(sigma) <= 0):
        raise ValueError("sigma must be strictly positive")
    z = (xi - c) / sigma
    return np.exp(-z * z)


def forward(params: T2nfsParams, xi1: float, xi2: float) -> FiringState:
    """Inference pass: product firing, per-family normalization, q-blend output."""
    mu1_lo = membership(xi1, params.c1_lo, params.s1_lo)
    mu1_up = membership(xi1, params.c1_up, params.s1_up)
    mu2_lo = membership(xi2, params.c2_lo, params.s2_lo)
    mu2_up = membership(xi2, params.c2_up, params.s2_up)

    w_lo = np.outer(mu1_lo, mu2_lo)
    w_up = np.outer(mu1_up, mu2_up)
    sum_lo = w_lo.sum()
    sum_up = w_up.sum()
    if sum_lo < DEGENERATE_FIRING or sum_up < DEGENERATE_FIRING:
        raise DegenerateFiringError(
            f"firing strengths underflowed at (xi1, xi2) = ({xi1}, {xi2})"
        )
    wn_lo = w_lo / sum_lo
    wn_up = w_up / sum_up
    q = params.q
    tau_n = q * float(np.vdot(params.f, wn_lo)) + (1.0 - q) * float(
        np.vdot(params.f, wn_up)
    )
    return FiringState(w_lo=w_lo, w_up=w_up, wn_lo=wn_lo, wn_up=wn_up, tau_n=tau_n)


def _sigma_proposal(sigma, c, xi, factor, dt, guard_eps):
    """Proposed Euler increment of the spread rule plus its guard count.

    sigma' = -(sigma/(xi - c)) * (xi + sigma^2/(xi - c)) * alpha * sgn(s)

    An entry is unsafe when its denominator is near-singular or the step
    would exceed the relative rate limit; the caller freezes the whole
    membership group if any entry anywhere is unsafe.
    """
    den = xi - c
    safe = np.abs(den) >= guard_eps
    den_safe = np.where(safe, den, 1.0)
    rate = -(sigma / den_safe) * (xi + sigma * sigma / den_safe) * factor
    safe &= np.abs(rate) * dt <= MAX_SIGMA_REL_STEP * sigma
    delta = np.where(safe, rate * dt, 0.0)
    return delta, int(np.count_nonzero(~safe))


def adapt(
    params: T2nfsParams,
    firing: FiringState,
    xi1: float,
    xi2: float,
    xi1_rate: float,
    xi2_rate: float,
    s: float,
    dt: float,
    sgn_delta: float = 0.05,
    guard_eps: float = GUARD_EPS,
    dead_zone: float = 0.0,
) -> tuple[T2nfsParams, GuardCounts]:
    """One Euler step of every sliding-mode adaptation rule.

    `firing` must come from forward(params, xi1, xi2).

    The rules decompose into three independent contributions to the rate of
    the network output: the consequent rule gives exactly -alpha*sgn(s), the
    q rule gives exactly -alpha*sgn(s) through the opposite blend weights,
    and the center/spread rules are a cancellation pair whose huge singular
    terms sum to zero for frozen inputs. Consequently the center and spread
    rules freeze together as one group when any of them trips a guard
    (near-zero denominator or rate limit), while the consequent and q rules
    freeze independently. The aggregate output rate is then
    -alpha*sgn(s) * (active consequent + active q), at most -2*alpha*sgn(s).

    If |s| < dead_zone the step is skipped entirely (counted as a guard):
    inside that boundary layer the sign estimate is dominated by noise and
    adaptation would only cause parameter drift.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if dead_zone > 0.0 and abs(s) < dead_zone:
        return params, GuardCounts(dead_zone=1)
    sg = smoothed_sign(s, sgn_delta)
    alpha = params.alpha
    factor = alpha * sg

    # Centers: one shared rate per input, identical for the lower and upper family.
    center_guards = 0
    dc1 = (xi1_rate + xi1 * factor) * dt
    if abs(dc1) > MAX_CENTER_STEP:
        dc1 = 0.0
        center_guards += 1
    dc2 = (xi2_rate + xi2 * factor) * dt
    if abs(dc2) > MAX_CENTER_STEP:
        dc2 = 0.0
        center_guards += 1

    ds1_lo, g1 = _sigma_proposal(params.s1_lo, params.c1_lo, xi1, factor, dt, guard_eps)
    ds1_up, g2 = _sigma_proposal(params.s1_up, params.c1_up, xi1, factor, dt, guard_eps)
    ds2_lo, g3 = _sigma_proposal(params.s2_lo, params.c2_lo, xi2, factor, dt, guard_eps)
    ds2_up, g4 = _sigma_proposal(params.s2_up, params.c2_up, xi2, factor, dt, guard_eps)
    sigma_guards = g1 + g2 + g3 + g4

    # Group freeze: centers and spreads cancel pairwise, so they only move
    # together; any guard among them freezes them all for the step.
    if center_guards + sigma_guards > 0:
        dc1 = dc2 = 0.0
        ds1_lo = ds1_up = ds2_lo = ds2_up = 0.0

    # Mixing weight: q' = -alpha * sgn(s) / (F.(Wn_lo - Wn_up)), projected
    # onto [0, 1] (q blends two convex combinations, so only that interval is
    # meaningful; under sustained noise the raw rule otherwise drifts without
    # bound). Independent of the membership group. In a type-1 downgrade its
    # denominator is identically zero, so it stays guarded and q is inert.
    q = params.q
    den_q = float(np.vdot(params.f, firing.wn_lo - firing.wn_up))
    q_guards = 0
    dq = 0.0
    if abs(den_q) >= guard_eps and abs(factor / den_q * dt) <= MAX_Q_STEP:
        dq = -factor / den_q * dt
        clipped = min(max(q + dq, 0.0), 1.0)
        if clipped != q + dq:
            dq = clipped - q
            q_guards = 1
    else:
        q_guards = 1

    # Consequents: f' = -(combined_ij / combined.combined) * alpha * sgn(s)
    # with combined = q*Wn_lo + (1-q)*Wn_up.
    combined = q * firing.wn_lo + (1.0 - q) * firing.wn_up
    den_f = float(np.vdot(combined, combined))
    f_guards = 0
    df = None
    if abs(den_f) >= guard_eps:
        df = combined / den_f * factor * dt
    if df is not None and float(np.max(np.abs(df))) <= MAX_F_STEP:
        f_new = params.f - df
    else:
        f_new = params.f
        f_guards = 1

    new = T2nfsParams(
        c1_lo=params.c1_lo + dc1, c1_up=params.c1_up + dc1,
        s1_lo=np.maximum(params.s1_lo + ds1_lo, SIGMA_FLOOR),
        s1_up=np.maximum(params.s1_up + ds1_up, SIGMA_FLOOR),
        c2_lo=params.c2_lo + dc2, c2_up=params.c2_up + dc2,
        s2_lo=np.maximum(params.s2_lo + ds2_lo, SIGMA_FLOOR),
        s2_up=np.maximum(params.s2_up + ds2_up, SIGMA_FLOOR),
        f=f_new, q=q + dq, alpha=alpha,
    )
    return new, GuardCounts(
        sigma=sigma_guards, f=f_guards, q=q_guards, center=center_guards
    )


def tau_n_rate_oracle(
    params_before: T2nfsParams,
    params_after: T2nfsParams,
    xi1: float,
    xi2: float,
    dt: float,
) -> float:
    """Finite-difference rate of the network output across one adaptation step.

    With inputs frozen (xi rates supplied as 0) and no guard active, this
    approaches -2 * alpha * sgn(s) as dt -> 0.
    """
    before = forward(params_before, xi1, xi2).tau_n
    after = forward(params_after, xi1, xi2).tau_n
    return (after - before) / dt


def to_type1(params: T2nfsParams) -> T2nfsParams:
    """Collapse to a type-1 system: upper params equal the lower ones.

    The adaptation rules preserve the equality, so the downgrade is permanent;
    q becomes inert (its rule denominator vanishes and stays guarded).
    """
    return replace(
        params,
        c1_up=params.c1_lo.copy(),
        s1_up=params.s1_lo.copy(),
        c2_up=params.c2_lo.copy(),
        s2_up=params.s2_lo.copy(),
    )


def params_table(params: T2nfsParams) -> list[tuple[str, float]]:
    """Flat (label, value) rows for trace export and test fixtures.

    Order: c1_lo, c1_up, s1_lo, s1_up, c2_lo, c2_up, s2_lo, s2_up (each by
    index), then f row-major, then q.
    """
    rows: list[tuple[str, float]] = []
    for name in ("c1_lo", "c1_up", "s1_lo", "s1_up", "c2_lo", "c2_up", "s2_lo", "s2_up"):
        arr = getattr(params, name)
        rows.extend((f"{name}[{k}]", float(v)) for k, v in enumerate(arr))
    i_n, j_n = params.f.shape
    rows.extend(
        (f"f[{i}][{j}]", float(params.f[i, j])) for i in range(i_n) for j in range(j_n)
    )
    rows.append(("q", float(params.q)))
    return rows
