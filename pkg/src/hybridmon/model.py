"""Hybrid automaton data model, structural validation, and region decomposition.

A hybrid automaton here is a set of discrete modes, each carrying linear
time-invariant dynamics x+ = A x + B u + w and a hyperrectangular invariant,
connected by guarded transitions. Each guard is a closed half-space on a
single state variable. Measurements are y = x + v (identity output map).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

ModeId = int | str

EIG_TOL = 1e-9   # slack for marginally stable eigenvalues landing near 1
GEOM_TOL = 1e-9  # slack for interval endpoint comparisons


class ModelError(ValueError):
    """Structurally malformed model (bad shapes, dangling references)."""


class DegenerateModelError(ModelError):
    """Two modes share an identical invariant; regions cannot be separated."""


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class Event:
    """A discrete event: a command (input) or a sensor signal (output)."""

    name: str
    kind: str  # "input" or "output"
    observable: bool = True

    def __post_init__(self) -> None:
        if self.kind not in ("input", "output"):
            raise ModelError(f"event {self.name!r}: kind must be input or output")


@dataclass(frozen=True)
class Invariant:
    """Axis-aligned hyperrectangle of admissible continuous states for a mode."""

    intervals: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        ivs = tuple((float(lo), float(hi)) for lo, hi in self.intervals)
        object.__setattr__(self, "intervals", ivs)
        for i, (lo, hi) in enumerate(ivs):
            if not (np.isfinite(lo) and np.isfinite(hi)):
                raise ModelError(f"invariant axis {i}: bounds must be finite")
            if lo > hi:
                raise ModelError(f"invariant axis {i}: lower bound {lo} > upper bound {hi}")

    @property
    def dim(self) -> int:
        return len(self.intervals)

    def lower(self, axis: int) -> float:
        return self.intervals[axis][0]

    def upper(self, axis: int) -> float:
        return self.intervals[axis][1]

    def span(self, axis: int) -> float:
        lo, hi = self.intervals[axis]
        return hi - lo

    def contains(self, x: Sequence[float], tol: float = 0.0) -> bool:
        return all(
            lo - tol <= xi <= hi + tol
            for xi, (lo, hi) in zip(np.asarray(x, dtype=float), self.intervals)
        )

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        arr = np.asarray(self.intervals, dtype=float)
        return arr[:, 0].copy(), arr[:, 1].copy()


@dataclass(frozen=True)
class LtiDynamics:
    """Per-mode dynamics x+ = A x + B u + w with bounded noise and input.

    w_bounds and v_bounds are per-axis infinity-norm bounds on the process
    and measurement noise; input_bound is the infinity-norm bound on u.
    The output map is the identity, so no output matrix is stored.
    """

    a: np.ndarray
    b: np.ndarray
    w_bounds: np.ndarray
    v_bounds: np.ndarray
    input_bound: float

    def __post_init__(self) -> None:
        a = _readonly(np.atleast_2d(np.asarray(self.a, dtype=float)))
        b = _readonly(np.atleast_2d(np.asarray(self.b, dtype=float)))
        w = _readonly(np.atleast_1d(np.asarray(self.w_bounds, dtype=float)))
        v = _readonly(np.atleast_1d(np.asarray(self.v_bounds, dtype=float)))
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ModelError(f"A must be square, got shape {a.shape}")
        n = a.shape[0]
        if b.shape[0] != n:
            raise ModelError(f"B must have {n} rows, got shape {b.shape}")
        if w.shape != (n,):
            raise ModelError(f"process noise bounds must have length {n}")
        if v.shape != (n,):
            raise ModelError(f"measurement noise bounds must have length {n}")
        if np.any(w < 0) or np.any(v < 0):
            raise ModelError("noise bounds must be nonnegative")
        if not np.all(np.isfinite(a)) or not np.all(np.isfinite(b)):
            raise ModelError("system matrices must be finite")
        mu = float(self.input_bound)
        if not np.isfinite(mu) or mu < 0:
            raise ModelError("input bound must be finite and nonnegative")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "w_bounds", w)
        object.__setattr__(self, "v_bounds", v)
        object.__setattr__(self, "input_bound", mu)

    @property
    def dim(self) -> int:
        return self.a.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.b.shape[1]

    @property
    def w_norm(self) -> float:
        return float(np.max(self.w_bounds)) if self.w_bounds.size else 0.0

    @property
    def v_norm(self) -> float:
        return float(np.max(self.v_bounds)) if self.v_bounds.size else 0.0


@dataclass(frozen=True)
class Guard:
    """Closed half-space past the hyperplane x[axis] = threshold.

    sign +1 fires at or above the threshold coordinate, -1 at or below it,
    so threshold always reads as a position on the axis.
    """

    axis: int
    sign: int
    threshold: float

    def __post_init__(self) -> None:
        if self.sign not in (-1, 1):
            raise ModelError(f"guard sign must be -1 or +1, got {self.sign}")
        object.__setattr__(self, "axis", int(self.axis))
        object.__setattr__(self, "threshold", float(self.threshold))

    def satisfied(self, x: Sequence[float]) -> bool:
        value = float(np.asarray(x, dtype=float)[self.axis])
        return self.sign * (value - self.threshold) >= 0.0


@dataclass(frozen=True)
class Transition:
    """A guarded mode switch labeled by an input event and its output event."""

    source: ModeId
    input_event: str
    output_event: str
    target: ModeId
    guard: Guard


@dataclass(frozen=True)
class Mode:
    """One discrete mode: id, continuous dynamics, and invariant."""

    mode_id: ModeId
    dynamics: LtiDynamics
    invariant: Invariant

    def __post_init__(self) -> None:
        if self.dynamics.dim != self.invariant.dim:
            raise ModelError(
                f"mode {self.mode_id!r}: dynamics dimension {self.dynamics.dim} "
                f"!= invariant dimension {self.invariant.dim}"
            )


@dataclass(frozen=True)
class HybridAutomaton:
    """The full nominal model: modes, events, guarded transitions, timing."""

    modes: tuple[Mode, ...]
    events: tuple[Event, ...]
    transitions: tuple[Transition, ...]
    dwell_time: int
    sampling_period: float
    theta: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "modes", tuple(self.modes))
        object.__setattr__(self, "events", tuple(self.events))
        object.__setattr__(self, "transitions", tuple(self.transitions))
        object.__setattr__(self, "dwell_time", int(self.dwell_time))
        object.__setattr__(self, "sampling_period", float(self.sampling_period))
        object.__setattr__(self, "theta", float(self.theta))
        if not self.modes:
            raise ModelError("model must declare at least one mode")
        ids = [m.mode_id for m in self.modes]
        if len(set(ids)) != len(ids):
            raise ModelError("duplicate mode ids")
        names = [e.name for e in self.events]
        if len(set(names)) != len(names):
            raise ModelError("duplicate event names")
        if self.dwell_time < 1:
            raise ModelError("dwell_time must be a positive number of samples")
        if self.sampling_period <= 0:
            raise ModelError("sampling_period must be positive")
        if self.theta <= 0:
            raise ModelError("theta must be positive")
        dims = {m.dynamics.dim for m in self.modes}
        if len(dims) != 1:
            raise ModelError("all modes must share one continuous dimension")
        event_by_name = {e.name: e for e in self.events}
        seen_pairs: set[tuple[ModeId, str]] = set()
        for tr in self.transitions:
            if tr.source not in set(ids) or tr.target not in set(ids):
                raise ModelError(f"transition references unknown mode: {tr}")
            if tr.input_event not in event_by_name:
                raise ModelError(f"transition references unknown event {tr.input_event!r}")
            if tr.output_event not in event_by_name:
                raise ModelError(f"transition references unknown event {tr.output_event!r}")
            if event_by_name[tr.input_event].kind != "input":
                raise ModelError(f"event {tr.input_event!r} used as input but declared output")
            if event_by_name[tr.output_event].kind != "output":
                raise ModelError(f"event {tr.output_event!r} used as output but declared input")
            if not (0 <= tr.guard.axis < self.dim):
                raise ModelError(f"guard axis {tr.guard.axis} out of range")
            key = (tr.source, tr.input_event)
            if key in seen_pairs:
                # the discrete transition relation must stay a function
                raise ModelError(f"duplicate transition for (mode, input event) {key}")
            seen_pairs.add(key)

    @property
    def dim(self) -> int:
        return self.modes[0].dynamics.dim

    @property
    def mode_ids(self) -> tuple[ModeId, ...]:
        return tuple(m.mode_id for m in self.modes)

    def mode(self, mode_id: ModeId) -> Mode:
        for m in self.modes:
            if m.mode_id == mode_id:
                return m
        raise KeyError(mode_id)

    def dynamics(self, mode_id: ModeId) -> LtiDynamics:
        return self.mode(mode_id).dynamics

    def invariant(self, mode_id: ModeId) -> Invariant:
        return self.mode(mode_id).invariant

    def event(self, name: str) -> Event:
        for e in self.events:
            if e.name == name:
                return e
        raise KeyError(name)

    def transitions_from(self, mode_id: ModeId) -> tuple[Transition, ...]:
        return tuple(t for t in self.transitions if t.source == mode_id)


@dataclass(frozen=True)
class Fsm:
    """Discrete skeleton of the automaton: modes, transition map, output map."""

    states: tuple[ModeId, ...]
    transitions: Mapping[tuple[ModeId, str], ModeId]
    outputs: Mapping[tuple[ModeId, str], str]

    def active_pairs(self, state: ModeId) -> tuple[tuple[str, str], ...]:
        """Input/output event pairs that can occur at a state, sorted."""
        pairs = [
            (psi, self.outputs[(q, psi)])
            for (q, psi) in self.transitions
            if q == state
        ]
        return tuple(sorted(pairs))


Box = tuple[tuple[float, float], ...]


@dataclass(frozen=True)
class RegionDecomposition:
    """Intermediate region, per-mode normal regions, and neighbor hyperplanes.

    All boxes are stored as closed intervals (the closures of the regions);
    membership queries realize the strict inequalities of the open region
    descriptions by testing the intermediate region first.
    """

    intermediate: tuple[tuple[tuple[ModeId, ModeId], Box], ...]
    normal: Mapping[ModeId, tuple[Box, ...]]
    neighbor_values: Mapping[tuple[ModeId, str], float]

    def intermediate_boxes(self) -> tuple[Box, ...]:
        return tuple(box for _, box in self.intermediate)

    def in_intermediate(self, x: Sequence[float]) -> bool:
        pt = np.asarray(x, dtype=float)
        return any(_box_contains(box, pt) for box in self.intermediate_boxes())

    def in_normal(self, mode_id: ModeId, x: Sequence[float]) -> bool:
        """Membership in the normal region of a mode (intermediate excluded)."""
        if self.in_intermediate(x):
            return False
        pt = np.asarray(x, dtype=float)
        return any(_box_contains(box, pt) for box in self.normal[mode_id])

    def classify(self, x: Sequence[float]) -> tuple[str, object] | None:
        """Return ("intermediate", pair) or ("normal", mode id) or None."""
        pt = np.asarray(x, dtype=float)
        for pair, box in self.intermediate:
            if _box_contains(box, pt):
                return ("intermediate", pair)
        for mode_id in sorted(self.normal, key=str):
            for box in self.normal[mode_id]:
                if _box_contains(box, pt):
                    return ("normal", mode_id)
        return None


def _box_contains(box: Box, pt: np.ndarray) -> bool:
    return all(lo <= xi <= hi for xi, (lo, hi) in zip(pt, box))


def _box_intersect(a: Box, b: Box) -> Box | None:
    out: list[tuple[float, float]] = []
    for (alo, ahi), (blo, bhi) in zip(a, b):
        lo, hi = max(alo, blo), min(ahi, bhi)
        if lo > hi:
            return None
        out.append((lo, hi))
    return tuple(out)


def _box_subtract(base: Box, cut: Box) -> list[Box]:
    """Closed boxes covering the closure of base minus cut.

    Splits axis by axis; zero-width slivers (which lie inside the closure of
    the cut) are dropped.
    """
    if _box_intersect(base, cut) is None:
        return [base]
    pieces: list[Box] = []
    remaining = list(base)
    for axis, ((blo, bhi), (clo, chi)) in enumerate(zip(base, cut)):
        if clo > blo:
            lower = list(remaining)
            lower[axis] = (blo, min(bhi, clo))
            if all(lo < hi for lo, hi in lower):
                pieces.append(tuple(lower))
        if chi < bhi:
            upper = list(remaining)
            upper[axis] = (max(blo, chi), bhi)
            if all(lo < hi for lo, hi in upper):
                pieces.append(tuple(upper))
        remaining[axis] = (max(blo, clo), min(bhi, chi))
    return pieces


def validate_model(model: HybridAutomaton) -> list[str]:
    """Check the modeling assumptions; return one descriptor per violation.

    Structural problems (bad shapes, dangling ids) raise ModelError at
    construction time; this function reports semantic assumption violations:
    eigenvalue moduli above 1, guards outside their source invariant, and
    intermediate bands not delimited by the guard and neighbor hyperplanes.
    """
    violations: list[str] = []
    for mode in model.modes:
        eigs = np.linalg.eigvals(mode.dynamics.a)
        worst = float(np.max(np.abs(eigs))) if eigs.size else 0.0
        if worst > 1.0 + EIG_TOL:
            violations.append(
                f"stability: mode {mode.mode_id!r} has eigenvalue modulus {worst:.6g} > 1"
            )
    for tr in model.transitions:
        inv = model.invariant(tr.source)
        lo, hi = inv.intervals[tr.guard.axis]
        if not (lo - GEOM_TOL <= tr.guard.threshold <= hi + GEOM_TOL):
            violations.append(
                f"guard-placement: transition {tr.source!r}->{tr.target!r} has "
                f"threshold {tr.guard.threshold} outside invariant axis "
                f"interval [{lo}, {hi}]"
            )
            continue
        c_g = tr.guard.threshold
        c_l = neighbor_value(model, tr)
        if abs(c_l - c_g) <= GEOM_TOL:
            # guard sits on the invariant face: the band between the guard
            # hyperplane and its neighbor is empty, nothing to delimit
            continue
        inv_t = model.invariant(tr.target)
        band = _interval_intersect(
            inv.intervals[tr.guard.axis], inv_t.intervals[tr.guard.axis]
        )
        if band is None:
            violations.append(
                f"intermediate-region: transition {tr.source!r}->{tr.target!r} "
                f"has disjoint invariants on guard axis {tr.guard.axis}"
            )
            continue
        expected = (min(c_g, c_l), max(c_g, c_l))
        if abs(band[0] - expected[0]) > GEOM_TOL or abs(band[1] - expected[1]) > GEOM_TOL:
            violations.append(
                f"intermediate-region: transition {tr.source!r}->{tr.target!r} "
                f"overlap band {band} is not delimited by the guard hyperplane "
                f"{c_g} and its neighbor hyperplane {c_l}"
            )
    return violations


def _interval_intersect(
    a: tuple[float, float], b: tuple[float, float]
) -> tuple[float, float] | None:
    lo, hi = max(a[0], b[0]), min(a[1], b[1])
    if lo > hi:
        return None
    return (lo, hi)


def neighbor_value(model: HybridAutomaton, transition: Transition) -> float:
    """Value of the invariant boundary face nearest the guard on its axis.

    The neighbor hyperplane is whichever of the two invariant faces on the
    guard axis minimizes the distance to the guard threshold; ties pick the
    lower face. A guard sitting exactly on a face yields that face, making
    the band between guard and neighbor hyperplane empty.
    """
    inv = model.invariant(transition.source)
    lo, hi = inv.intervals[transition.guard.axis]
    c_g = transition.guard.threshold
    return min((lo, hi), key=lambda c: (abs(c - c_g), c))


def decompose_regions(model: HybridAutomaton) -> RegionDecomposition:
    """Split mode invariants into the intermediate region and normal regions.

    The intermediate region is the union of pairwise invariant intersections;
    each mode's normal region is the closure of its invariant minus the
    closure of the intermediate region, stored as a list of closed boxes.
    """
    modes = sorted(model.modes, key=lambda m: str(m.mode_id))
    for a, b in itertools.combinations(modes, 2):
        if a.invariant.intervals == b.invariant.intervals:
            raise DegenerateModelError(
                f"modes {a.mode_id!r} and {b.mode_id!r} have identical invariants"
            )
    intermediate: list[tuple[tuple[ModeId, ModeId], Box]] = []
    for a, b in itertools.combinations(modes, 2):
        overlap = _box_intersect(a.invariant.intervals, b.invariant.intervals)
        if overlap is not None:
            intermediate.append(((a.mode_id, b.mode_id), overlap))
    normal: dict[ModeId, tuple[Box, ...]] = {}
    for mode in modes:
        boxes: list[Box] = [mode.invariant.intervals]
        for _, cut in intermediate:
            boxes = [piece for box in boxes for piece in _box_subtract(box, cut)]
        normal[mode.mode_id] = tuple(boxes)
    neighbor_values = {
        (tr.source, tr.input_event): neighbor_value(model, tr)
        for tr in model.transitions
    }
    return RegionDecomposition(
        intermediate=tuple(intermediate),
        normal=normal,
        neighbor_values=neighbor_values,
    )


def extract_fsm(model: HybridAutomaton) -> Fsm:
    """Discrete skeleton: every guarded transition, continuous dynamics dropped.

    Events that label no nominal transition (for instance anomaly events kept
    in the event list for documentation) do not appear in the maps.
    """
    states = tuple(sorted(model.mode_ids, key=str))
    transitions: dict[tuple[ModeId, str], ModeId] = {}
    outputs: dict[tuple[ModeId, str], str] = {}
    for tr in sorted(model.transitions, key=lambda t: (str(t.source), t.input_event)):
        transitions[(tr.source, tr.input_event)] = tr.target
        outputs[(tr.source, tr.input_event)] = tr.output_event
    return Fsm(states=states, transitions=transitions, outputs=outputs)
