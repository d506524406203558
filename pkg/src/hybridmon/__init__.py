"""Conflict-driven anomaly detection for hybrid (mixed discrete/continuous) systems.

The package models hybrid automata with per-mode linear dynamics, builds a
hybrid observer (discrete-event observer plus per-mode steady-state Kalman
filters), runs a three-conflict detector over zonotope reachable sets, and
computes guaranteed-detectable attack magnitudes by robust optimization over
box uncertainty sets. A train-gate false-data-injection case study ships as
the built-in scenario.
"""

from .model import (
    DegenerateModelError,
    Event,
    Fsm,
    Guard,
    HybridAutomaton,
    Invariant,
    LtiDynamics,
    Mode,
    ModelError,
    RegionDecomposition,
    Transition,
    decompose_regions,
    extract_fsm,
    validate_model,
)
from .model_io import dump_model, load_model, model_to_dict, parse_model
from .observer import (
    DiscreteInconsistencyError,
    ObservabilityResult,
    ObserverFsm,
    build_observer,
    check_current_state_observability,
    step_discrete,
)
from .kalman import (
    ContinuousEstimate,
    KalmanBank,
    KalmanGain,
    RiccatiError,
    check_dwell,
    step_continuous,
    synthesize_gains,
)
from .reachability import (
    HorizonError,
    Zonotope,
    box_zonotope,
    compute_delta,
    inflate,
    intersects_box,
    linear_map,
    reach,
)
from .conflicts import (
    ConflictReport,
    Detector,
    UnsupportedShapeError,
    detect,
    initial_set,
    volume,
    volume_bound,
)
from .guarantees import (
    EmptyGeometryError,
    GuaranteeBound,
    NoGuaranteeError,
    OracleScaleError,
    detection_threshold,
    box_max,
    oracle_box_optimum,
    solve_d_star,
    solve_z_star,
    state_guarantees,
)
from .simulate import (
    AttackSpec,
    ConstantController,
    FdiaClassification,
    ScenarioConfig,
    SimulationResult,
    SimulationSummary,
    ZoneController,
    ZoneSpeedLimit,
    classify_fdia,
    residual_baseline,
    simulate,
    sweep,
)
from .train_gate import ramp_attack, train_gate_model, train_gate_scenario

__version__ = "0.1.0"

__all__ = [
    "AttackSpec",
    "ConflictReport",
    "ConstantController",
    "ContinuousEstimate",
    "DegenerateModelError",
    "Detector",
    "DiscreteInconsistencyError",
    "EmptyGeometryError",
    "Event",
    "FdiaClassification",
    "Fsm",
    "Guard",
    "GuaranteeBound",
    "HorizonError",
    "HybridAutomaton",
    "Invariant",
    "KalmanBank",
    "KalmanGain",
    "LtiDynamics",
    "Mode",
    "ModelError",
    "NoGuaranteeError",
    "ObservabilityResult",
    "ObserverFsm",
    "OracleScaleError",
    "RegionDecomposition",
    "RiccatiError",
    "ScenarioConfig",
    "SimulationResult",
    "SimulationSummary",
    "Transition",
    "UnsupportedShapeError",
    "ZoneController",
    "ZoneSpeedLimit",
    "Zonotope",
    "box_max",
    "box_zonotope",
    "build_observer",
    "check_current_state_observability",
    "check_dwell",
    "classify_fdia",
    "compute_delta",
    "decompose_regions",
    "detect",
    "detection_threshold",
    "dump_model",
    "extract_fsm",
    "inflate",
    "initial_set",
    "intersects_box",
    "linear_map",
    "load_model",
    "model_to_dict",
    "oracle_box_optimum",
    "parse_model",
    "ramp_attack",
    "reach",
    "residual_baseline",
    "simulate",
    "solve_d_star",
    "solve_z_star",
    "state_guarantees",
    "step_continuous",
    "step_discrete",
    "sweep",
    "synthesize_gains",
    "train_gate_model",
    "train_gate_scenario",
    "validate_model",
    "volume",
    "volume_bound",
]
