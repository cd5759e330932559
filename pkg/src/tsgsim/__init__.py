"""Constrained spacecraft rendezvous simulation with a time shift governor.

A two-body closed loop with a periodic LQ tracking controller, constraint
enforcement by a time-shifted virtual target, a learned time-shift predictor
with forward-simulation verification and bisection fallback, and a Monte
Carlo evaluation harness.
"""

from .constraints import (
    ConstraintConfig,
    ConstraintReport,
    ShiftVerifier,
    evaluate_constraints,
    los_constraint,
    soft_docking_constraint,
    thrust_constraint,
    verify_shift,
)
from .dynamics import (
    MU_EARTH,
    GravityModel,
    OrbitalElements,
    ReferenceOrbit,
    StateVector,
    elements_to_state,
    orbit_period,
    propagate,
    vnb_frame,
)
from .governor import (
    GovernorConfig,
    GovernorContext,
    GovernorRecord,
    TimeShiftState,
    bisection_tsg,
    hybrid_step,
    initial_shift,
    virtual_target,
)
from .harness import (
    CampaignResult,
    Metrics,
    MissionInfeasibleError,
    TrajectoryLog,
    compute_metrics,
    generate_dataset,
    monte_carlo,
    read_log_csv,
    run_mission,
    sample_initial_states,
    write_log_csv,
)
from .lqr import (
    GainSchedule,
    LqrWeights,
    build_gain_schedule,
    control_law,
    load_gain_schedule,
    solve_dare,
)
from .lstm import (
    LstmModel,
    ModelRegistry,
    SlidingWindow,
    load_model,
    load_registry,
    lstm_forward,
    predict_shift,
    save_model,
)
from .scenario import (
    PRESETS,
    ScenarioConfig,
    load_scenario,
    preset_leo_crew3,
    preset_molniya,
    save_scenario,
)

__all__ = [
    "MU_EARTH",
    "CampaignResult",
    "ConstraintConfig",
    "ConstraintReport",
    "GainSchedule",
    "GovernorConfig",
    "GovernorContext",
    "GovernorRecord",
    "GravityModel",
    "LqrWeights",
    "LstmModel",
    "Metrics",
    "MissionInfeasibleError",
    "ModelRegistry",
    "OrbitalElements",
    "PRESETS",
    "ReferenceOrbit",
    "ScenarioConfig",
    "ShiftVerifier",
    "SlidingWindow",
    "StateVector",
    "TimeShiftState",
    "TrajectoryLog",
    "bisection_tsg",
    "build_gain_schedule",
    "compute_metrics",
    "control_law",
    "elements_to_state",
    "evaluate_constraints",
    "generate_dataset",
    "hybrid_step",
    "initial_shift",
    "load_gain_schedule",
    "load_model",
    "load_registry",
    "load_scenario",
    "los_constraint",
    "lstm_forward",
    "monte_carlo",
    "orbit_period",
    "predict_shift",
    "preset_leo_crew3",
    "preset_molniya",
    "propagate",
    "read_log_csv",
    "run_mission",
    "sample_initial_states",
    "save_model",
    "save_scenario",
    "soft_docking_constraint",
    "solve_dare",
    "thrust_constraint",
    "verify_shift",
    "virtual_target",
    "vnb_frame",
    "write_log_csv",
]

__version__ = "0.1.0"
