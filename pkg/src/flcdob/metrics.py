"""Step-response and estimation-quality metrics computed from a run trace.

Definitions (x1 regulates to the origin, so the transition runs from the
window's initial x1 toward its steady mean):

- steady_state_error: mean x1 over the final 10% of the window.
- rise_time_10_90: time from 10% to 90% traversal of |x1(t0) - x1_final|.
- settling_time_2pct: last time |x1 - x1_final| exceeds 2% of the initial
  deviation, measured from the window start.
- overshoot_pct: max excursion beyond the final value, as a percentage of
  the initial deviation; NaN when the response never crosses the final value.
- mse_disturbance: mean (d_true - d_hat)^2 over the window.

NaN marks genuinely undefined metrics; nothing is silently zeroed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .trace import RunTrace


@dataclass(frozen=True)
class Metrics:
    steady_state_error: float
    rise_time_10_90: float
    settling_time_2pct: float
    overshoot_pct: float
    mse_disturbance: float
    mse_window: tuple[float, float]


def compute_metrics(
    trace: RunTrace,
    window: tuple[float, float],
    estimator: str = "auto",
) -> Metrics:
    """Compute all metrics over the given (t_start, t_end) window.

    estimator picks the disturbance-estimate column for the MSE:
    "auto" prefers d_hat_sl when it is ever nonzero, else d_hat_bn.
    """
    sl = trace.window_slice(*window)
    t = trace.t[sl]
    x1 = trace.x1[sl]
    if len(t) < 2:
        raise ValueError(f"window {window} selects fewer than 2 samples")

    n_tail = max(1, int(round(0.1 * len(x1))))
    x1_final = float(np.mean(x1[-n_tail:]))
    x1_start = float(x1[0])
    dev = x1_start - x1_final

    rise = _rise_time(t, x1, x1_start, x1_final)
    settle = _settling_time(t, x1, x1_final, abs(dev))
    overshoot = _overshoot(x1, x1_start, x1_final)

    if estimator == "auto":
        estimator = "d_hat_sl" if np.any(trace.d_hat_sl != 0.0) else "d_hat_bn"
    if estimator not in ("d_hat_sl", "d_hat_bn"):
        raise ValueError(f"unknown estimator column {estimator!r}")
    d_hat = trace.column(estimator)[sl]
    mse = float(np.mean((trace.d_true[sl] - d_hat) ** 2))

    return Metrics(
        steady_state_error=x1_final,
        rise_time_10_90=rise,
        settling_time_2pct=settle,
        overshoot_pct=overshoot,
        mse_disturbance=mse,
        mse_window=(float(t[0]), float(t[-1])),
    )


def _rise_time(t, x1, x1_start, x1_final) -> float:
    dev = x1_final - x1_start
    if dev == 0.0:
        return math.nan
    progress = (x1 - x1_start) / dev
    above10 = np.nonzero(progress >= 0.1)[0]
    above90 = np.nonzero(progress >= 0.9)[0]
    if len(above10) == 0 or len(above90) == 0:
        return math.nan
    return float(t[above90[0]] - t[above10[0]])


def _settling_time(t, x1, x1_final, initial_dev) -> float:
    if initial_dev == 0.0:
        return 0.0
    outside = np.nonzero(np.abs(x1 - x1_final) > 0.02 * initial_dev)[0]
    if len(outside) == 0:
        return 0.0
    return float(t[outside[-1]] - t[0])


def _overshoot(x1, x1_start, x1_final) -> float:
    dev = x1_start - x1_final
    if dev == 0.0:
        return math.nan
    beyond = (x1 - x1_final) * math.copysign(1.0, x1_final - x1_start)
    if np.all(beyond <= 0.0):
        return math.nan  # response never crosses the final value
    return float(np.max(beyond) / abs(dev) * 100.0)
