"""Step-response and estimation metrics against closed-form signals."""

import math

import numpy as np
import pytest

from flcdob.metrics import compute_metrics
from flcdob.trace import RunTrace


def make_trace(t, x1, d_true=None, d_hat_bn=None, d_hat_sl=None):
    n = len(t)
    zeros = np.zeros(n)
    return RunTrace(
        t=np.asarray(t, dtype=float),
        x1=np.asarray(x1, dtype=float),
        x2=zeros.copy(),
        u=zeros.copy(),
        d_true=zeros.copy() if d_true is None else np.asarray(d_true, float),
        d_hat_bn=zeros.copy() if d_hat_bn is None else np.asarray(d_hat_bn, float),
        d_hat_sl=zeros.copy() if d_hat_sl is None else np.asarray(d_hat_sl, float),
        tau=zeros.copy(),
        tau_c=zeros.copy(),
        tau_n=zeros.copy(),
        s=zeros.copy(),
        q=zeros.copy(),
        guards=np.zeros(n, dtype=np.int64),
    )


class TestSettlingTime:
    def test_exponential_decay_closed_form(self):
        # x1 = e^{-t}: last |x1| > 0.02 at t = ln(50).
        t = np.arange(0.0, 10.0, 0.001)
        trace = make_trace(t, np.exp(-t))
        m = compute_metrics(trace, (0.0, 10.0))
        assert m.settling_time_2pct == pytest.approx(math.log(50.0), abs=0.01)

    def test_constant_trace(self):
        t = np.arange(0.0, 1.0, 0.001)
        trace = make_trace(t, np.full_like(t, 0.3))
        m = compute_metrics(trace, (0.0, 1.0))
        assert m.steady_state_error == pytest.approx(0.3)
        assert math.isnan(m.rise_time_10_90)
        assert m.settling_time_2pct == 0.0


class TestRiseTime:
    def test_linear_ramp(self):
        # x1 rises 0 -> 1 linearly over [0, 1] then holds; 10%-90% = 0.8.
        t = np.arange(0.0, 2.0, 0.001)
        x1 = np.clip(t, 0.0, 1.0)
        trace = make_trace(t, x1)
        m = compute_metrics(trace, (0.0, 2.0))
        assert m.rise_time_10_90 == pytest.approx(0.8, abs=0.01)


class TestOvershoot:
    def test_no_crossing_is_nan(self):
        # Ramp down to 0.5 and hold exactly: never crosses the final value.
        t = np.arange(0.0, 5.0, 0.001)
        trace = make_trace(t, np.maximum(0.5, 1.0 - t))
        m = compute_metrics(trace, (0.0, 5.0))
        assert math.isnan(m.overshoot_pct)

    def test_damped_oscillation(self):
        # x1 = e^{-t} cos(2 pi t) decaying to 0; first undershoot sets the
        # overshoot magnitude relative to the initial deviation of 1.
        t = np.arange(0.0, 8.0, 0.001)
        x1 = np.exp(-t) * np.cos(2 * np.pi * t)
        trace = make_trace(t, x1)
        m = compute_metrics(trace, (0.0, 8.0))
        peak = float(np.max(-x1))
        assert m.overshoot_pct == pytest.approx(peak * 100.0, rel=0.02)


class TestDisturbanceMse:
    def test_perfect_estimate(self):
        t = np.arange(0.0, 1.0, 0.001)
        d = 0.5 * np.sin(t)
        trace = make_trace(t, np.zeros_like(t), d_true=d, d_hat_bn=d.copy())
        m = compute_metrics(trace, (0.0, 1.0), estimator="d_hat_bn")
        assert m.mse_disturbance == 0.0

    def test_constant_offset(self):
        t = np.arange(0.0, 1.0, 0.001)
        d = np.full_like(t, 0.5)
        trace = make_trace(t, np.zeros_like(t), d_true=d,
                           d_hat_bn=np.full_like(t, 0.3))
        m = compute_metrics(trace, (0.0, 1.0), estimator="d_hat_bn")
        assert m.mse_disturbance == pytest.approx(0.04, abs=1e-12)

    def test_auto_prefers_learning_estimate(self):
        t = np.arange(0.0, 1.0, 0.001)
        d = np.full_like(t, 1.0)
        trace = make_trace(t, np.zeros_like(t), d_true=d,
                           d_hat_bn=np.zeros_like(t),
                           d_hat_sl=np.full_like(t, 1.0))
        m = compute_metrics(trace, (0.0, 1.0))
        assert m.mse_disturbance == 0.0


class TestWindows:
    def test_window_restricts_computation(self):
        t = np.arange(0.0, 10.0, 0.01)
        x1 = np.where(t < 5.0, 1.0, 0.0)
        trace = make_trace(t, x1)
        m = compute_metrics(trace, (6.0, 10.0))
        assert m.steady_state_error == 0.0
        assert m.mse_window[0] == pytest.approx(6.0)

    def test_empty_window_rejected(self):
        t = np.arange(0.0, 1.0, 0.001)
        trace = make_trace(t, np.zeros_like(t))
        with pytest.raises(ValueError):
            compute_metrics(trace, (2.0, 3.0))

    def test_unknown_estimator_rejected(self):
        t = np.arange(0.0, 1.0, 0.001)
        trace = make_trace(t, np.zeros_like(t))
        with pytest.raises(ValueError):
            compute_metrics(trace, (0.0, 1.0), estimator="d_hat_xx")
