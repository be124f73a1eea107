"""Command-line front end: run scenarios, sweep parameters, compare the four
controllers, reproduce the noise study, and execute the invariant check suite.

Exit codes: 0 success, 2 invariant-suite failure, 3 numerical blow-up,
4 configuration error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from pathlib import Path

import numpy as np

from .controllers import Variant
from .harness import (
    BlowUpError,
    ConfigError,
    ScenarioConfig,
    mse_table,
    run_scenario,
)
from .metrics import compute_metrics
from .trace import RunTrace, export_trace, load_trace

EXIT_OK = 0
EXIT_INVARIANT = 2
EXIT_BLOWUP = 3
EXIT_CONFIG = 4


def _load_config(args) -> ScenarioConfig:
    if args.config is not None:
        config = ScenarioConfig.from_yaml(args.config)
    else:
        config = ScenarioConfig.benchmark_default(args.controller)
    if getattr(args, "scheme", None):
        config = dataclasses.replace(config, scheme=args.scheme)
    return config


def _metrics_dict(trace: RunTrace, window: tuple[float, float]) -> dict:
    m = compute_metrics(trace, window)
    return dataclasses.asdict(m)


def _write_run_outputs(trace: RunTrace, config: ScenarioConfig, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    export_trace(trace, out / "trace.csv")
    export_trace(trace, out / "trace_plot.csv", every=10)
    config.to_yaml(out / "config.yaml")
    horizon = float(trace.t[-1])
    payload = {
        "metadata": trace.metadata,
        "determinism_hash": trace.determinism_hash(),
        "metrics_full": _metrics_dict(trace, (0.0, horizon)),
    }
    with open(out / "metrics.json", "w") as fh:
        json.dump(payload, fh, indent=2)


def cmd_run(args) -> int:
    config = _load_config(args)
    trace = run_scenario(config)
    if args.out:
        _write_run_outputs(trace, config, Path(args.out))
    horizon = float(trace.t[-1])
    m = compute_metrics(trace, (0.0, horizon))
    print(f"controller       : {config.controller.value}")
    print(f"samples          : {len(trace)}")
    print(f"steady-state x1  : {m.steady_state_error:.6g}")
    print(f"settling (2%)    : {m.settling_time_2pct:.6g} s")
    print(f"overshoot        : {m.overshoot_pct:.6g} %")
    print(f"disturbance MSE  : {m.mse_disturbance:.6g}")
    print(f"determinism hash : {trace.determinism_hash()[:16]}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    base = _load_config(args)
    values = [float(v) for v in args.values.split(",")]
    if not hasattr(base, args.param):
        raise ConfigError(f"unknown scenario parameter {args.param!r}")
    print(f"{args.param:>12}  {'mse':>12}  {'steady x1':>12}  {'settling':>10}")
    for value in values:
        config = dataclasses.replace(base, **{args.param: value})
        trace = run_scenario(config)
        m = compute_metrics(trace, (0.0, float(trace.t[-1])))
        print(
            f"{value:>12.6g}  {m.mse_disturbance:>12.6g}  "
            f"{m.steady_state_error:>12.6g}  {m.settling_time_2pct:>10.4g}"
        )
        if args.out:
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            export_trace(trace, out / f"sweep_{args.param}_{value:g}.csv")
    return EXIT_OK


def _comparison_plots(traces: dict[str, RunTrace], out: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out.mkdir(parents=True, exist_ok=True)
    step = 10  # plot every 10th sample; panels do not need 1 kHz resolution

    fig, axes = plt.subplots(2, 1, figsize=(9, 7), sharex=True)
    for name, tr in traces.items():
        axes[0].plot(tr.t[::step], tr.x1[::step], label=name, linewidth=1.0)
        axes[1].plot(tr.t[::step], tr.x2[::step], label=name, linewidth=1.0)
    axes[0].set_ylabel("x1")
    axes[1].set_ylabel("x2")
    axes[1].set_xlabel("t [s]")
    axes[0].legend()
    fig.savefig(out / "states.png", dpi=120)
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(9, 4))
    for name, tr in traces.items():
        ax.plot(tr.t[::step], tr.u[::step], label=name, linewidth=1.0)
    ax.set_xlabel("t [s]")
    ax.set_ylabel("u")
    ax.legend()
    fig.savefig(out / "control.png", dpi=120)
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(9, 4))
    any_tr = next(iter(traces.values()))
    ax.plot(any_tr.t[::step], any_tr.d_true[::step], "k--", label="d true")
    for name, tr in traces.items():
        if np.any(tr.d_hat_bn != 0.0):
            ax.plot(tr.t[::step], tr.d_hat_bn[::step], label=f"{name} d_hat_bn",
                    linewidth=1.0)
        if np.any(tr.d_hat_sl != 0.0):
            ax.plot(tr.t[::step], tr.d_hat_sl[::step], label=f"{name} d_hat_sl",
                    linewidth=1.0)
    ax.set_xlabel("t [s]")
    ax.set_ylabel("disturbance")
    ax.legend()
    fig.savefig(out / "estimates.png", dpi=120)
    plt.close(fig)

    for name, tr in traces.items():
        if not np.any(tr.tau != 0.0):
            continue
        fig, axes = plt.subplots(2, 1, figsize=(9, 6), sharex=True)
        axes[0].plot(tr.t[::step], tr.tau_c[::step], label="tau_c", linewidth=1.0)
        axes[0].plot(tr.t[::step], tr.tau_n[::step], label="tau_n", linewidth=1.0)
        axes[0].plot(tr.t[::step], tr.tau[::step], label="tau", linewidth=1.0)
        axes[0].set_ylabel("learning signals")
        axes[0].legend()
        axes[1].plot(tr.t[::step], tr.q[::step], label="q", linewidth=1.0)
        axes[1].set_ylabel("q")
        axes[1].set_xlabel("t [s]")
        axes[1].legend()
        fig.savefig(out / f"learning_{name}.png", dpi=120)
        plt.close(fig)

    fig, ax = plt.subplots(figsize=(6, 6))
    for name, tr in traces.items():
        ax.plot(tr.x1[::step], tr.x2[::step], label=name, linewidth=0.8)
    ax.set_xlabel("x1")
    ax.set_ylabel("x2")
    ax.legend()
    fig.savefig(out / "phase_portrait.png", dpi=120)
    plt.close(fig)


def cmd_compare(args) -> int:
    names = [n.strip() for n in args.controllers.split(",") if n.strip()]
    traces: dict[str, RunTrace] = {}
    for name in names:
        variant = Variant.parse(name)
        config = ScenarioConfig.benchmark_default(variant)
        if args.scheme:
            config = dataclasses.replace(config, scheme=args.scheme)
        traces[name] = run_scenario(config)

    print(f"{'controller':>12}  {'steady x1':>12}  {'settling':>10}  "
          f"{'overshoot %':>12}  {'mean|x1| [45,60]':>18}")
    for name, tr in traces.items():
        m = compute_metrics(tr, (20.0, 40.0))
        tail = tr.window_slice(45.0, 60.0)
        robust = float(np.mean(np.abs(tr.x1[tail])))
        print(f"{name:>12}  {m.steady_state_error:>12.6g}  "
              f"{m.settling_time_2pct:>10.4g}  {m.overshoot_pct:>12.6g}  "
              f"{robust:>18.6g}")

    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for name, tr in traces.items():
            export_trace(tr, out / f"{name}.csv", every=10)
        _comparison_plots(traces, out)
    return EXIT_OK


def cmd_noise_study(args) -> int:
    result = mse_table(seeds=tuple(range(args.seeds)))
    print(result.format())
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "noise_table.json", "w") as fh:
            json.dump(dataclasses.asdict(result), fh, indent=2)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Invariant check suite
# ---------------------------------------------------------------------------

def _check_firing_normalization() -> list[str]:
    from .t2nfs import forward, initial_params

    failures = []
    params = initial_params()
    rng = np.random.default_rng(7)
    for xi1, xi2 in rng.uniform(-3.0, 3.0, size=(50, 2)):
        firing = forward(params, float(xi1), float(xi2))
        if abs(float(np.sum(firing.wn_lo)) - 1.0) > 1e-12:
            failures.append(f"lower weights not normalized at ({xi1}, {xi2})")
        if abs(float(np.sum(firing.wn_up)) - 1.0) > 1e-12:
            failures.append(f"upper weights not normalized at ({xi1}, {xi2})")
    return failures


def _check_composition_and_spreads() -> list[str]:
    """Short closed-loop run: tau/s identities and spread positivity."""
    from .bndo import bndo_update, initial_bndo
    from .controllers import ControllerGains, flc_bndo_control
    from .plant import PlantState, advance, benchmark_model
    from .sldo import initial_sldo, sldo_update
    from .t2nfs import initial_params

    failures = []
    model = benchmark_model()
    gains = ControllerGains(k1=3.0, k2=5.0)
    dt = 0.001
    x = PlantState(1.0, 1.0)
    bndo = initial_bndo(x, 5.0)
    sldo = initial_sldo(10.0, 5.0)
    params = initial_params()
    u = 0.0
    for k in range(4000):
        t = k * dt
        d = 0.5 if t >= 1.0 else 0.0
        bndo = bndo_update(bndo, x, u, model, dt)
        sldo, params = sldo_update(sldo, bndo.d_hat, params, dt)
        u = flc_bndo_control(x, bndo.d_hat, gains, model)
        if sldo.tau != sldo.tau_c - sldo.tau_n:
            failures.append(f"tau composition broken at step {k}")
            break
        if sldo.s != sldo.tau_c + sldo.xi2 / sldo.l1:
            failures.append(f"sliding surface identity broken at step {k}")
            break
        for name in ("s1_lo", "s1_up", "s2_lo", "s2_up"):
            if np.any(getattr(params, name) <= 0.0):
                failures.append(f"non-positive spread {name} at step {k}")
                return failures
        x = advance(x, u, d, model, dt)
    return failures


def _check_determinism() -> list[str]:
    config = ScenarioConfig.benchmark_default(
        Variant.FLC_SLDO, horizon=8.0, snr_db=40.0, seed=123
    )
    h1 = run_scenario(config).determinism_hash()
    h2 = run_scenario(config).determinism_hash()
    if h1 != h2:
        return [f"determinism hash mismatch: {h1} != {h2}"]
    return []


def _check_metrics_roundtrip(tmpdir: Path) -> list[str]:
    config = ScenarioConfig.benchmark_default(Variant.FLC_BNDO, horizon=5.0)
    trace = run_scenario(config)
    path = tmpdir / "roundtrip.csv"
    export_trace(trace, path)
    reloaded = load_trace(path)
    m1 = compute_metrics(trace, (0.0, 5.0))
    m2 = compute_metrics(reloaded, (0.0, 5.0))
    if m1 != m2:
        return [f"metrics changed across export/import: {m1} vs {m2}"]
    return []


def run_check_suite(tmpdir: Path | None = None) -> list[str]:
    """All invariant checks; returns human-readable failure descriptions."""
    import tempfile

    failures = []
    failures += _check_firing_normalization()
    failures += _check_composition_and_spreads()
    failures += _check_determinism()
    if tmpdir is None:
        with tempfile.TemporaryDirectory() as td:
            failures += _check_metrics_roundtrip(Path(td))
    else:
        failures += _check_metrics_roundtrip(tmpdir)
    return failures


def cmd_check(args) -> int:
    started = time.monotonic()
    failures = run_check_suite()
    elapsed = time.monotonic() - started
    if failures:
        for f in failures:
            print(f"FAIL: {f}", file=sys.stderr)
        print(f"check suite: {len(failures)} failure(s) in {elapsed:.1f} s")
        return EXIT_INVARIANT
    print(f"check suite: all invariants hold ({elapsed:.1f} s)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flcdob",
        description=(
            "Simulate feedback-linearization control of a second-order "
            "nonlinear plant under a mismatched disturbance, with optional "
            "disturbance observers."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one scenario")
    p_run.add_argument("--config", help="scenario YAML file (default: built-in preset)")
    p_run.add_argument("--controller", default="flc-sldo",
                       help="controller for the built-in preset")
    p_run.add_argument("--out", help="output directory for trace/metrics")
    p_run.add_argument("--scheme", choices=("euler", "rk4"), default=None)
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a scenario across parameter values")
    p_sweep.add_argument("--config", help="base scenario YAML file")
    p_sweep.add_argument("--controller", default="flc-sldo")
    p_sweep.add_argument("--param", required=True, help="scenario field to vary")
    p_sweep.add_argument("--values", required=True, help="comma-separated values")
    p_sweep.add_argument("--out", help="output directory for traces")
    p_sweep.add_argument("--scheme", choices=("euler", "rk4"), default=None)
    p_sweep.set_defaults(func=cmd_sweep)

    p_cmp = sub.add_parser("compare", help="run several controllers side by side")
    p_cmp.add_argument("--controllers", default="flc,flci,bndo,sldo")
    p_cmp.add_argument("--out", help="output directory for traces and plots")
    p_cmp.add_argument("--scheme", choices=("euler", "rk4"), default=None)
    p_cmp.set_defaults(func=cmd_compare)

    p_tbl = sub.add_parser("noise-study", help="type-1 vs type-2 estimation MSE under noise")
    p_tbl.add_argument("--seeds", type=int, default=10)
    p_tbl.add_argument("--out", help="output directory for the table JSON")
    p_tbl.set_defaults(func=cmd_noise_study)

    p_chk = sub.add_parser("check", help="run the invariant check suite")
    p_chk.set_defaults(func=cmd_check)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BlowUpError as exc:
        print(
            f"numerical blow-up: {exc} (last valid record {exc.last_valid_index})",
            file=sys.stderr,
        )
        return EXIT_BLOWUP


if __name__ == "__main__":
    sys.exit(main())
