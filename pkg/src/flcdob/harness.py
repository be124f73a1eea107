"""Scenario runner: closed-loop execution, measurement noise, noise-study sweep.

The loop per step: read the (optionally noisy) measured state, update the
BNDO over the elapsed interval, update the SLDO, compute the control, record,
advance the true plant. Identical config and seed give bit-identical traces.
"""

from __future__ import annotations

import concurrent.futures
import hashlib
import json
import math
import os
from dataclasses import asdict, dataclass, field, replace

import numpy as np
import yaml

from . import __version__
from .bndo import bndo_update, coupled_step, initial_bndo
from .controllers import (
    ControllerGains,
    ControllerState,
    Variant,
    flc_bndo_control,
    flc_control,
    flc_sldo_control,
    flci_control,
)
from .plant import (
    DisturbanceProfile,
    MultiSineDisturbance,
    PiecewiseDisturbance,
    PlantModel,
    PlantState,
    SimulationError,
    StepDisturbance,
    ZeroDisturbance,
    advance,
    benchmark_model,
    double_integrator_model,
    eval_disturbance,
    benchmark_disturbance,
)
from .sldo import initial_sldo, sldo_update
from .t2nfs import initial_params, smoothed_sign, to_type1
from .trace import RunTrace

__all__ = [
    "ScenarioConfig",
    "ConfigError",
    "BlowUpError",
    "run_scenario",
    "inject_noise",
    "mse_table",
    "NoiseStudyResult",
    "smoothed_sign",
]

_PLANTS = {
    "benchmark": benchmark_model,
    "double-integrator": double_integrator_model,
}


class ConfigError(ValueError):
    """Scenario configuration is inconsistent or unparseable."""


class BlowUpError(SimulationError):
    """Integration diverged; carries the last valid record index."""

    def __init__(self, message: str, last_valid_index: int):
        super().__init__(message)
        self.last_valid_index = last_valid_index


@dataclass(frozen=True)
class ScenarioConfig:
    """Declarative description of one closed-loop experiment.

    Defaults replicate the benchmark study scenario (minus the
    disturbance, which `benchmark_default` fills in).
    """

    controller: Variant = Variant.FLC_SLDO
    plant: str = "benchmark"
    k1: float = 3.0
    k2: float = 5.0
    ki: float = 3.0
    l1: float = 5.0
    l2: float = 0.0
    eta: float = 10.0
    alpha: float = 0.03
    q0: float = 0.5
    n_mf1: int = 3
    n_mf2: int = 3
    type1: bool = False
    input_range: tuple[float, float] = (-3.0, 3.0)
    adapt: bool = True
    x0: tuple[float, float] = (1.0, 1.0)
    dt: float = 0.001
    horizon: float = 60.0
    disturbance: DisturbanceProfile = field(default_factory=ZeroDisturbance)
    snr_db: float | None = None
    seed: int | None = None
    noise_channels: str = "both"  # "both" or "output" (x1 only)
    sgn_delta: float = 0.05
    scheme: str = "rk4"
    closure: str = "closed"   # SLDO input closure: "closed" or "open"
    dead_zone: float = 0.05   # adaptation pauses while |s| is below this
    # One-pole low-pass time constant (s) on the BNDO estimate feeding the
    # SLDO differencing; None = automatic: off when noiseless, and scaled
    # with the noise amplitude otherwise (raw second differences of white
    # noise diverge, and the louder the noise the slower the filter must be
    # to keep the differenced inputs inside the network's input range).
    bn_filter_tc: float | None = None

    def __post_init__(self):
        if isinstance(self.controller, str):
            try:
                parsed = Variant.parse(self.controller)
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
            object.__setattr__(self, "controller", parsed)
        if self.dt <= 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if self.horizon <= 0:
            raise ConfigError(f"horizon must be positive, got {self.horizon}")
        if self.scheme not in ("rk4", "euler"):
            raise ConfigError(f"scheme must be rk4 or euler, got {self.scheme!r}")
        if self.noise_channels not in ("both", "output"):
            raise ConfigError(f"noise_channels must be both or output")
        if self.snr_db is not None and self.seed is None:
            raise ConfigError("a seed is mandatory when noise is enabled")
        if self.plant not in _PLANTS:
            raise ConfigError(f"unknown plant {self.plant!r}")
        if self.sgn_delta <= 0:
            raise ConfigError(f"sgn_delta must be positive, got {self.sgn_delta}")
        if self.closure not in ("closed", "open"):
            raise ConfigError(f"closure must be closed or open, got {self.closure!r}")
        if self.dead_zone < 0:
            raise ConfigError(f"dead_zone must be >= 0, got {self.dead_zone}")
        if self.bn_filter_tc is not None and self.bn_filter_tc < 0:
            raise ConfigError(
                f"bn_filter_tc must be >= 0, got {self.bn_filter_tc}"
            )

    @property
    def effective_bn_filter_tc(self) -> float:
        if self.bn_filter_tc is not None:
            return self.bn_filter_tc
        if self.snr_db is None:
            return 0.0
        # Power law in the noise amplitude, saturated at both ends: 3.0 s
        # up to 40 dB SNR (second differences of loud noise need heavy
        # smoothing to stay inside the network's input range), decaying to
        # the 0.05 s floor by 80 dB, where the noise is nearly harmless.
        tc = 3.0 * 60.0 ** (-(self.snr_db - 40.0) / 40.0)
        return min(3.0, max(0.05, tc))

    @property
    def gains(self) -> ControllerGains:
        return ControllerGains(k1=self.k1, k2=self.k2, ki=self.ki)

    def model(self) -> PlantModel:
        return _PLANTS[self.plant]()

    @classmethod
    def benchmark_default(cls, controller: Variant | str = Variant.FLC_SLDO, **overrides):
        """The simulation-study scenario: x0 = (1,1), 60 s, three-phase disturbance."""
        if isinstance(controller, str):
            controller = Variant.parse(controller)
        return cls(controller=controller, disturbance=benchmark_disturbance(), **overrides)

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        raw = asdict(self)
        raw["controller"] = self.controller.value
        raw["disturbance"] = _disturbance_to_dict(self.disturbance)
        raw["input_range"] = list(self.input_range)
        raw["x0"] = list(self.x0)
        return raw

    @classmethod
    def from_dict(cls, raw: dict) -> "ScenarioConfig":
        data = dict(raw)
        try:
            if "controller" in data:
                data["controller"] = Variant.parse(data["controller"])
            if "disturbance" in data:
                data["disturbance"] = _disturbance_from_dict(data["disturbance"])
            if "input_range" in data:
                data["input_range"] = tuple(data["input_range"])
            if "x0" in data:
                data["x0"] = tuple(data["x0"])
            return cls(**data)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad scenario config: {exc}") from exc

    @classmethod
    def from_yaml(cls, path) -> "ScenarioConfig":
        try:
            with open(path) as fh:
                raw = yaml.safe_load(fh)
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot load config {path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"config file {path} must contain a mapping")
        return cls.from_dict(raw)

    def to_yaml(self, path) -> None:
        with open(path, "w") as fh:
            yaml.safe_dump(self.to_dict(), fh, sort_keys=False)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def _disturbance_to_dict(profile: DisturbanceProfile) -> dict:
    if isinstance(profile, ZeroDisturbance):
        return {"type": "zero"}
    if isinstance(profile, StepDisturbance):
        return {
            "type": "step",
            "magnitude": profile.magnitude,
            "t_on": profile.t_on,
            "t_off": profile.t_off,
        }
    if isinstance(profile, MultiSineDisturbance):
        return {
            "type": "multisine",
            "offset": profile.offset,
            "amplitudes": list(profile.amplitudes),
            "frequencies": list(profile.frequencies),
            "t_on": profile.t_on,
            "t_off": profile.t_off,
        }
    if isinstance(profile, PiecewiseDisturbance):
        return {
            "type": "piecewise",
            "segments": [
                {"interval": list(iv), "profile": _disturbance_to_dict(p)}
                for iv, p in profile.segments
            ],
        }
    raise ConfigError(f"unserializable disturbance {type(profile).__name__}")


def _disturbance_from_dict(raw) -> DisturbanceProfile:
    if isinstance(raw, (ZeroDisturbance, StepDisturbance, MultiSineDisturbance,
                        PiecewiseDisturbance)):
        return raw
    if not isinstance(raw, dict) or "type" not in raw:
        raise ConfigError(f"bad disturbance spec: {raw!r}")
    kind = raw["type"]
    if kind == "zero":
        return ZeroDisturbance()
    if kind == "step":
        return StepDisturbance(raw["magnitude"], raw["t_on"], raw["t_off"])
    if kind == "multisine":
        return MultiSineDisturbance(
            raw["offset"],
            tuple(raw["amplitudes"]),
            tuple(raw["frequencies"]),
            raw["t_on"],
            raw["t_off"],
        )
    if kind == "piecewise":
        return PiecewiseDisturbance(
            tuple(
                (tuple(seg["interval"]), _disturbance_from_dict(seg["profile"]))
                for seg in raw["segments"]
            )
        )
    raise ConfigError(f"unknown disturbance type {kind!r}")


# ---------------------------------------------------------------------------
# Noise
# ---------------------------------------------------------------------------

def inject_noise(
    y: float, snr_db: float, signal_power: float, rng: np.random.Generator
) -> float:
    """Add zero-mean Gaussian noise with variance signal_power / 10^(snr/10).

    The generator advances by one draw; reproducibility comes from its seed.
    """
    std = math.sqrt(signal_power * 10.0 ** (-snr_db / 10.0))
    return y + std * rng.standard_normal()


# ---------------------------------------------------------------------------
# Scenario execution
# ---------------------------------------------------------------------------

def run_scenario(config: ScenarioConfig) -> RunTrace:
    """Execute the closed loop and return the complete per-step trace."""
    model = config.model()
    gains = config.gains
    variant = config.controller
    dt = config.dt
    n = int(round(config.horizon / dt))

    uses_bndo = variant in (Variant.FLC_BNDO, Variant.FLC_SLDO)
    uses_sldo = variant is Variant.FLC_SLDO

    x = PlantState(*config.x0)
    cstate = ControllerState(variant=variant)
    bndo = initial_bndo(x, config.l1, config.l2) if uses_bndo else None
    sldo = (
        initial_sldo(
            config.eta, config.l1,
            input_clip=config.input_range, closure=config.closure,
        )
        if uses_sldo
        else None
    )
    params = None
    if uses_sldo:
        params = initial_params(
            n_mf1=config.n_mf1,
            n_mf2=config.n_mf2,
            input_range=config.input_range,
            alpha=config.alpha,
            q0=config.q0,
        )
        if config.type1:
            params = to_type1(params)

    rng = np.random.default_rng(config.seed) if config.snr_db is not None else None
    power_x1 = 0.0  # running sums of the clean squared signals
    power_x2 = 0.0
    filter_tc = config.effective_bn_filter_tc
    bn_filtered = 0.0  # low-passed BNDO estimate feeding the SLDO

    cols = {name: np.zeros(n + 1) for name in (
        "t", "x1", "x2", "u", "d_true", "d_hat_bn", "d_hat_sl",
        "tau", "tau_c", "tau_n", "s", "q",
    )}
    guards = np.zeros(n + 1, dtype=np.int64)

    x_meas_prev = None
    u_prev = 0.0
    for k in range(n + 1):
        t = k * dt
        d_true = eval_disturbance(config.disturbance, t)

        # Measurement (noise scaled by the running mean square of each channel).
        power_x1 += x.x1 * x.x1
        power_x2 += x.x2 * x.x2
        if rng is not None:
            p1 = power_x1 / (k + 1)
            x1_m = inject_noise(x.x1, config.snr_db, p1, rng) if p1 > 0 else x.x1
            if config.noise_channels == "both":
                p2 = power_x2 / (k + 1)
                x2_m = inject_noise(x.x2, config.snr_db, p2, rng) if p2 > 0 else x.x2
            else:
                x2_m = x.x2
            x_meas = PlantState(x1_m, x2_m)
        else:
            x_meas = x

        try:
            if uses_bndo and k > 0 and rng is not None:
                # Noisy measurements: the observer integrates over the elapsed
                # interval with the measured-state path, never the true state.
                bndo = bndo_update(
                    bndo, x_meas, u_prev, model, dt,
                    x_begin=x_meas_prev, scheme=config.scheme,
                )
            if uses_sldo:
                if filter_tc > 0.0:
                    bn_filtered += (dt / filter_tc) * (bndo.d_hat - bn_filtered)
                else:
                    bn_filtered = bndo.d_hat
                sldo, params = sldo_update(
                    sldo, bn_filtered, params, dt,
                    sgn_delta=config.sgn_delta, adapt_enabled=config.adapt,
                    dead_zone=config.dead_zone,
                )

            if variant is Variant.FLC:
                u = flc_control(x_meas, gains, model)
            elif variant is Variant.FLC_I:
                u, cstate = flci_control(x_meas, cstate, gains, model, dt)
            elif variant is Variant.FLC_BNDO:
                u = flc_bndo_control(x_meas, bndo.d_hat, gains, model)
            else:
                u = flc_sldo_control(x_meas, sldo.d_hat_sl, sldo.tau, gains, model)
        except SimulationError as exc:
            raise BlowUpError(
                f"step {k} (t = {t:.6g} s): {exc}", last_valid_index=k - 1
            ) from exc

        cols["t"][k] = t
        cols["x1"][k] = x.x1
        cols["x2"][k] = x.x2
        cols["u"][k] = u
        cols["d_true"][k] = d_true
        if uses_bndo:
            cols["d_hat_bn"][k] = bndo.d_hat
        if uses_sldo:
            cols["d_hat_sl"][k] = sldo.d_hat_sl
            cols["tau"][k] = sldo.tau
            cols["tau_c"][k] = sldo.tau_c
            cols["tau_n"][k] = sldo.tau_n
            cols["s"][k] = sldo.s
            cols["q"][k] = params.q
            guards[k] = sldo.guards

        if k < n:
            try:
                if uses_bndo and rng is None:
                    # Noiseless: measured = true, so the observer internal
                    # state co-integrates with the plant in one joint step.
                    x, bndo = coupled_step(
                        x, bndo, u, d_true, model, dt, scheme=config.scheme
                    )
                else:
                    x = advance(x, u, d_true, model, dt, scheme=config.scheme)
            except SimulationError as exc:
                raise BlowUpError(
                    f"plant step {k} (t = {t:.6g} s): {exc}", last_valid_index=k
                ) from exc
            x_meas_prev = x_meas
            u_prev = u

    metadata = {
        "config_hash": config.config_hash(),
        "scheme": config.scheme,
        "code_version": __version__,
        "controller": variant.value,
    }
    return RunTrace(**cols, guards=guards, metadata=metadata)


# ---------------------------------------------------------------------------
# Type-1 vs type-2 noise study
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NoiseStudyResult:
    snrs: tuple[float, ...]
    type1_mse: tuple[float, ...]   # mean over seeds, per SNR
    type2_mse: tuple[float, ...]
    seeds: tuple[int, ...]

    @property
    def improvement_pct(self) -> tuple[float, ...]:
        """Relative type-2 improvement over type-1, percent, per SNR."""
        return tuple(
            (t1 - t2) / t1 * 100.0 if t1 > 0 else 0.0
            for t1, t2 in zip(self.type1_mse, self.type2_mse)
        )

    def format(self) -> str:
        header = "          " + "".join(f"{s:>12.0f} dB" for s in self.snrs)
        rows = [header]
        rows.append("Type-1 NFS" + "".join(f"{v:>15.4f}" for v in self.type1_mse))
        rows.append("Type-2 NFS" + "".join(f"{v:>15.4f}" for v in self.type2_mse))
        rows.append(
            "Improvement"
            + "".join(f"{v:>13.2f} %" for v in self.improvement_pct)
        )
        return "\n".join(rows)


def _noise_study_cell(raw_config: dict) -> float:
    """Worker: disturbance-estimation MSE of one noisy SLDO run.

    Scored over the final third of the horizon -- in the benchmark scenario
    that is the time-varying phase, where the learned estimate matters most
    and both network types have had the whole run to train.
    """
    config = ScenarioConfig.from_dict(raw_config)
    trace = run_scenario(config)
    window = trace.window_slice(2.0 * config.horizon / 3.0, config.horizon)
    err = trace.d_true[window] - trace.d_hat_sl[window]
    return float(np.mean(err**2))


def mse_table(
    base: ScenarioConfig | None = None,
    snrs: tuple[float, ...] = (20.0, 40.0, 80.0),
    seeds: tuple[int, ...] = tuple(range(10)),
    parallel: bool = True,
) -> NoiseStudyResult:
    """Disturbance-estimation MSE, type-1 vs type-2, averaged across seeds."""
    if base is None:
        base = ScenarioConfig.benchmark_default(Variant.FLC_SLDO)
    if base.controller is not Variant.FLC_SLDO:
        raise ConfigError("mse_table requires FLC-SLDO scenarios")

    jobs = []
    for type1 in (True, False):
        for snr in snrs:
            for seed in seeds:
                cfg = replace(base, type1=type1, snr_db=snr, seed=int(seed))
                jobs.append(cfg.to_dict())

    if parallel and len(jobs) > 1:
        workers = min(len(jobs), os.cpu_count() or 1)
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_noise_study_cell, jobs))
    else:
        results = [_noise_study_cell(job) for job in jobs]

    per_seed = np.array(results).reshape(2, len(snrs), len(seeds))
    means = per_seed.mean(axis=2)
    return NoiseStudyResult(
        snrs=tuple(snrs),
        type1_mse=tuple(means[0]),
        type2_mse=tuple(means[1]),
        seeds=tuple(int(s) for s in seeds),
    )
