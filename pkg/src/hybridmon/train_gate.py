"""Built-in train-gate crossing scenario.

A train runs an 80 m loop with a gate at 60 m and track sensors at 45 m
and 75 m. The controller slows the train to 0.2 m/s within 16 m of the
gate and runs 1 m/s elsewhere; safe operation keeps speed at or under
0.4 m/s within 12 m of the gate. State is [position, speed]; position
integrates speed at the 0.1 s sampling period and speed tracks the
reference with a 0.95 decay, giving eigenvalues {1, 0.95}. Passing a
sensor emits a command/sensor event pair and switches the mode one
sample later.
"""

from __future__ import annotations

from .model import HybridAutomaton
from .model_io import parse_model
from .simulate import AttackSpec, ScenarioConfig, ZoneController, ZoneSpeedLimit

TRACK_LENGTH = 80.0
GATE_POSITION = 60.0
SLOW_ZONE_HALF_WIDTH = 16.0
SAFE_ZONE_HALF_WIDTH = 12.0
SENSOR_APPROACH = 45.0
SENSOR_LEAVE = 75.0
FAST_SPEED = 1.0
SLOW_SPEED = 0.2
SAFE_SPEED = 0.4
STEADY_TIME = 1.5  # seconds until the estimator settles: dwell_time * sampling_period

TRAIN_GATE_MODEL_DICT = {
    "states": [
        {
            "id": 1,
            "A": [[1.0, 0.1], [0.0, 0.95]],
            "B": [[0.0], [0.05]],
            "invariant": [[0.0, 46.0], [0.0, 1.5]],
        },
        {
            "id": 2,
            "A": [[1.0, 0.1], [0.0, 0.95]],
            "B": [[0.0], [0.05]],
            "invariant": [[45.0, 76.0], [0.0, 0.4]],
        },
        {
            "id": 3,
            "A": [[1.0, 0.1], [0.0, 0.95]],
            "B": [[0.0], [0.05]],
            "invariant": [[75.0, 80.0], [0.0, 1.5]],
        },
    ],
    "events": [
        {"id": "c_down", "kind": "input", "observable": True},
        {"id": "s_1", "kind": "output", "observable": True},
        {"id": "c_up", "kind": "input", "observable": True},
        {"id": "s_2", "kind": "output", "observable": True},
        {"id": "c_next", "kind": "input", "observable": True},
        {"id": "s_3", "kind": "output", "observable": True},
    ],
    "transitions": [
        {
            "source": 1,
            "input_event": "c_down",
            "output_event": "s_1",
            "target": 2,
            "guard": {"axis": 0, "sign": 1, "threshold": 45.0},
        },
        {
            "source": 2,
            "input_event": "c_up",
            "output_event": "s_2",
            "target": 3,
            "guard": {"axis": 0, "sign": 1, "threshold": 75.0},
        },
        {
            "source": 3,
            "input_event": "c_next",
            "output_event": "s_3",
            "target": 1,
            "guard": {"axis": 0, "sign": 1, "threshold": 80.0},
        },
    ],
    "noise": {"w": [0.01, 0.01], "v": [0.1, 0.1]},
    "input_bound": 1.0,
    "sampling_period": 0.1,
    "dwell_time": 15,
    "theta": 0.05,
}


def train_gate_model() -> HybridAutomaton:
    """The shipped three-mode crossing model."""
    return parse_model(TRAIN_GATE_MODEL_DICT)


def ramp_attack(slope: float, start_time: float = STEADY_TIME) -> AttackSpec:
    """Position-sensor ramp growing by `slope` meters per second."""
    return AttackSpec(axes=(0,), kind="ramp", slope=slope, start_time=start_time)


def train_gate_scenario(
    seed: int = 0,
    duration: float = 200.0,
    attack: AttackSpec | None = None,
    model: HybridAutomaton | None = None,
) -> ScenarioConfig:
    """One lap from the depot: start at rest at position 0, stop at 80 m."""
    return ScenarioConfig(
        model=model if model is not None else train_gate_model(),
        controller=ZoneController(
            axis=0,
            center=GATE_POSITION,
            half_width=SLOW_ZONE_HALF_WIDTH,
            inside_value=SLOW_SPEED,
            outside_value=FAST_SPEED,
        ),
        initial_state=(0.0, 0.0),
        initial_mode=1,
        duration=duration,
        seed=seed,
        attack=attack,
        safety=ZoneSpeedLimit(
            position_axis=0,
            center=GATE_POSITION,
            half_width=SAFE_ZONE_HALF_WIDTH,
            speed_axis=1,
            limit=SAFE_SPEED,
        ),
        stop_events=frozenset({"s_3"}),
    )
