"""Energy-tank stabilized dynamical systems learned from demonstrations."""

from .benchmark import RunConfig, run_corpus, run_motion, sweep_storage
from .dynamics import (
    AuditReport,
    DivergenceError,
    Rollout,
    StabilizedDS,
    TankState,
    init_tank,
    integrate,
    lyapunov_audit,
    stabilized_velocity,
    tank_step,
)
from .estimator import EsdsModel
from .gains import GainParams
from .metrics import (
    MetricsReport,
    resample_equidistant,
    swept_error_area,
    tetragon_area,
    velocity_rmse,
)
from .regression import (
    GmrRegressor,
    GpRegressor,
    RbfRidgeRegressor,
    SingularModelError,
    TrainingSet,
    load_model,
    save_model,
)
from .synthetic import gen_synthetic, make_demonstrations
from .training import (
    Demonstration,
    build_training_pairs,
    downsample,
    estimate_storage_cap,
    finite_diff_velocities,
    load_motion_corpus,
    preprocess,
    translate_to_goal,
)

__version__ = "0.1.0"

__all__ = [
    "AuditReport",
    "Demonstration",
    "DivergenceError",
    "EsdsModel",
    "GainParams",
    "GmrRegressor",
    "GpRegressor",
    "MetricsReport",
    "RbfRidgeRegressor",
    "Rollout",
    "RunConfig",
    "SingularModelError",
    "StabilizedDS",
    "TankState",
    "TrainingSet",
    "build_training_pairs",
    "downsample",
    "estimate_storage_cap",
    "finite_diff_velocities",
    "gen_synthetic",
    "init_tank",
    "integrate",
    "load_model",
    "load_motion_corpus",
    "lyapunov_audit",
    "make_demonstrations",
    "preprocess",
    "resample_equidistant",
    "run_corpus",
    "run_motion",
    "save_model",
    "stabilized_velocity",
    "swept_error_area",
    "sweep_storage",
    "tank_step",
    "tetragon_area",
    "translate_to_goal",
    "velocity_rmse",
]
