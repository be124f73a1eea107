"""Feedback-linearization control with disturbance observers.

Simulation library comparing four controllers of a second-order nonlinear
plant with a mismatched disturbance channel: plain feedback linearization,
integral-augmented, observer-compensated (BNDO), and self-learning
observer-compensated (SLDO) with an online-trained interval type-2
neuro-fuzzy estimator.
"""

__version__ = "0.1.0"

from .bndo import BndoState, bndo_rate, bndo_update, initial_bndo
from .controllers import (
    ControllerGains,
    ControllerState,
    Variant,
    flc_bndo_control,
    flc_control,
    flc_sldo_control,
    flci_control,
    predict_steady_state_x1,
)
from .plant import (
    MultiSineDisturbance,
    PiecewiseDisturbance,
    PlantModel,
    PlantState,
    SimulationError,
    StepDisturbance,
    ZeroDisturbance,
    benchmark_model,
    eval_disturbance,
    benchmark_disturbance,
    plant_derivatives,
)
from .sldo import SldoState, initial_sldo, sldo_update
from .t2nfs import T2nfsParams, forward, initial_params, smoothed_sign, to_type1
from .harness import (
    BlowUpError,
    ConfigError,
    ScenarioConfig,
    inject_noise,
    mse_table,
    run_scenario,
)
from .metrics import Metrics, compute_metrics
from .trace import RunTrace, export_trace, load_trace
