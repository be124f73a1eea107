"""End-to-end acceptance runs: benchmark scenarios, observers, learning, CLI.

The expensive closed-loop traces are computed once per session and shared.
"""

import dataclasses
import math
import subprocess
import sys
import time

import numpy as np
import pytest

from flcdob.harness import ScenarioConfig, mse_table, run_scenario
from flcdob.metrics import compute_metrics
from flcdob.plant import StepDisturbance
from flcdob.t2nfs import (
    adapt,
    forward,
    initial_params,
    smoothed_sign,
    tau_n_rate_oracle,
    to_type1,
)
from flcdob.trace import export_trace, load_trace

CONTROLLERS = ("flc", "flci", "bndo", "sldo")


@pytest.fixture(scope="session")
def benchmark_traces():
    """The four 60 s benchmark runs, with wall-clock runtimes."""
    traces, runtimes = {}, {}
    for name in CONTROLLERS:
        t0 = time.perf_counter()
        traces[name] = run_scenario(ScenarioConfig.benchmark_default(name))
        runtimes[name] = time.perf_counter() - t0
    return traces, runtimes


@pytest.fixture(scope="session")
def open_mode_trace():
    """Benchmark run with the open (pure-differencing) observer composition."""
    config = dataclasses.replace(
        ScenarioConfig.benchmark_default("sldo"), closure="open", horizon=40.0
    )
    return run_scenario(config)


@pytest.fixture(scope="session")
def high_rate_trace():
    """Benchmark run with the adaptation rate raised well above the
    disturbance-derivative bound, for the sliding-condition check."""
    return run_scenario(ScenarioConfig.benchmark_default("sldo", alpha=1.0))


class TestBaselineController:
    def test_steady_state_plateau_under_step(self, benchmark_traces):
        # Without compensation a constant disturbance d on the x1 channel
        # shifts the equilibrium to x1 = k2*d/k1 = 5*0.5/3 = 0.8333.
        traces, _ = benchmark_traces
        trace = traces["flc"]
        window = trace.window_slice(35.0, 40.0)
        assert float(np.mean(trace.x1[window])) == pytest.approx(
            0.8333, abs=0.01
        )

    def test_runtime_budget(self, benchmark_traces):
        _, runtimes = benchmark_traces
        assert runtimes["flc"] < 5.0


class TestBasicObserver:
    def test_estimation_error_decays_exponentially(self):
        # Unit test of the observer pole: a 0.5 step at t=0 with a cold
        # estimate leaves e_d(t) = 0.5 e^{-l1 t}.
        config = ScenarioConfig(
            controller="flc-bndo",
            horizon=1.0,
            disturbance=StepDisturbance(0.5, 0.0, 2.0),
        )
        trace = run_scenario(config)
        e_d = trace.d_true - trace.d_hat_bn
        envelope = 0.5 * np.exp(-5.0 * trace.t)
        assert float(np.max(np.abs(e_d - envelope))) < 1e-3

    def test_time_constant(self):
        config = ScenarioConfig(
            controller="flc-bndo",
            horizon=1.0,
            disturbance=StepDisturbance(0.5, 0.0, 2.0),
        )
        trace = run_scenario(config)
        e_d = trace.d_true - trace.d_hat_bn
        # Log-linear fit over [0, 1]: pole at -5 -> time constant 0.2 s.
        slope = np.polyfit(trace.t, np.log(e_d), 1)[0]
        assert -1.0 / slope == pytest.approx(0.2, rel=0.10)


class TestUndisturbedPhase:
    def test_observer_controllers_match_baseline(self, benchmark_traces):
        # With no disturbance both observers output ~0, so FLC, FLC-BNDO
        # and FLC-SLDO produce the same trajectory.
        traces, _ = benchmark_traces
        window = traces["flc"].window_slice(0.0, 20.0)
        ref = traces["flc"].x1[window]
        for name in ("bndo", "sldo"):
            other = traces[name].x1[traces[name].window_slice(0.0, 20.0)]
            assert float(np.max(np.abs(other - ref))) <= 1e-3

    def test_integral_controller_overshoots_more(self, benchmark_traces):
        # The integral state adds a slow mode that drags x1 through zero.
        traces, _ = benchmark_traces
        window = traces["flc"].window_slice(0.0, 20.0)
        undershoot = {
            name: max(0.0, float(-np.min(traces[name].x1[window])))
            for name in ("flc", "flci")
        }
        assert undershoot["flci"] > undershoot["flc"]

    def test_all_controllers_regulate_phase_one(self, benchmark_traces):
        traces, _ = benchmark_traces
        for name in ("flc", "bndo", "sldo"):
            trace = traces[name]
            idx = int(round(10.0 / 0.001))
            assert abs(trace.x1[idx]) < 0.01
        # The integral controller's slow mode needs the full phase.
        flci = traces["flci"]
        assert abs(flci.x1[int(round(20.0 / 0.001))]) < 0.01


class TestAdaptationLaw:
    def seed_consequents(self, params, scale=0.5, seed=1):
        rng = np.random.default_rng(seed)
        return dataclasses.replace(
            params, f=rng.normal(scale=scale, size=params.f.shape)
        )

    def test_rate_converges_to_sliding_law(self):
        # The per-step parameter update realizes d(tau_n)/dt =
        # -2 alpha sgn(s); its discretization error is first order in dt.
        errors = []
        dts = (1e-3, 1e-4, 1e-5)
        for dt in dts:
            params = self.seed_consequents(initial_params(alpha=0.03))
            xi1, xi2, s = 0.8, -0.6, 1e6
            firing = forward(params, xi1, xi2)
            after, guards = adapt(
                params, firing, xi1, xi2, 0.0, 0.0, s, dt, dead_zone=0.0
            )
            assert guards.total == 0
            rate = tau_n_rate_oracle(params, after, xi1, xi2, dt)
            errors.append(abs(rate + 2 * 0.03 * smoothed_sign(s)))
        slope = np.polyfit(np.log(dts), np.log(errors), 1)[0]
        assert slope == pytest.approx(1.0, abs=0.15)


class TestNetworkTakeover:
    def test_network_term_dominates_after_learning(self, open_mode_trace):
        # In the pure-differencing composition the conventional term decays
        # as the network absorbs the mapping: by the end of the constant
        # phase it contributes under 5% of the network term.
        window = open_mode_trace.window_slice(39.0, 40.0)
        mean_conv = float(np.mean(np.abs(open_mode_trace.tau_c[window])))
        mean_net = float(np.mean(np.abs(open_mode_trace.tau_n[window])))
        assert mean_net > 0.0
        assert mean_conv < 0.05 * mean_net


class TestSlidingCondition:
    def test_surface_energy_non_increasing(self, high_rate_trace):
        # With the adaptation rate above the disturbance-derivative bound,
        # V = s^2/2 must not grow on steps where adaptation actually ran
        # (surface outside the dead zone, so the sliding update fired).
        trace = high_rate_trace
        s = trace.s
        idx = np.nonzero((trace.t >= 40.0) & (np.abs(s) >= 0.05))[0]
        idx = idx[idx + 1 < len(s)]
        assert len(idx) > 1000
        decreasing = s[idx + 1] ** 2 <= s[idx] ** 2
        assert float(np.mean(decreasing)) >= 0.99


class TestDisturbanceRejection:
    def test_learning_observer_regulates_best(self, benchmark_traces):
        traces, _ = benchmark_traces
        def tail_avg(name):
            trace = traces[name]
            window = trace.window_slice(45.0, 60.0)
            return float(np.mean(np.abs(trace.x1[window])))
        sldo = tail_avg("sldo")
        for name in ("flc", "flci", "bndo"):
            assert sldo < 0.25 * tail_avg(name)

    def test_learning_observer_beats_basic_observer(self, benchmark_traces):
        # On the time-varying phase the learned estimate tracks at least
        # 5x better (MSE) than the fixed-pole observer.
        traces, _ = benchmark_traces
        sldo = traces["sldo"]
        bndo = traces["bndo"]
        w_s = sldo.window_slice(40.0, 60.0)
        w_b = bndo.window_slice(40.0, 60.0)
        mse_sl = float(np.mean((sldo.d_true[w_s] - sldo.d_hat_sl[w_s]) ** 2))
        mse_bn = float(np.mean((bndo.d_true[w_b] - bndo.d_hat_bn[w_b]) ** 2))
        assert mse_bn >= 5.0 * mse_sl


class TestNoiseStudy:
    def test_interval_network_helps_most_when_noisy(self):
        # 10-seed comparison across noise levels: the interval (type-2)
        # membership layer must win outright at the noisiest level, and its
        # relative advantage must shrink as the measurements get cleaner.
        result = mse_table(seeds=tuple(range(10)))
        assert result.snrs == (20.0, 40.0, 80.0)
        assert result.type2_mse[0] <= result.type1_mse[0]
        imp = result.improvement_pct
        assert imp[0] > imp[1] > imp[2]


class TestReproducibility:
    def test_noisy_run_is_deterministic_under_seed(self):
        config = ScenarioConfig.benchmark_default(
            "sldo", horizon=5.0, snr_db=40.0, seed=7
        )
        a = run_scenario(config)
        b = run_scenario(config)
        assert a.determinism_hash() == b.determinism_hash()

    def test_metrics_survive_export(self, benchmark_traces, tmp_path):
        traces, _ = benchmark_traces
        path = tmp_path / "bndo.csv"
        export_trace(traces["bndo"], path)
        back = load_trace(path)
        window = (40.0, 60.0)
        assert compute_metrics(back, window) == compute_metrics(
            traces["bndo"], window
        )


class TestCliCheck:
    def test_check_subcommand_passes_quickly(self):
        t0 = time.perf_counter()
        proc = subprocess.run(
            [sys.executable, "-m", "flcdob", "check"],
            capture_output=True,
            text=True,
            timeout=120,
        )
        elapsed = time.perf_counter() - t0
        assert proc.returncode == 0, proc.stdout + proc.stderr
        assert elapsed < 60.0
