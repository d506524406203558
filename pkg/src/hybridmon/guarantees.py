"""Guaranteed-detection thresholds for each guard and state.

Two arms per guard: the measurement arm (least offset past the guard
that pushes every consistent measurement outside the invariant one step
after the switch) and the horizon arm (least offset that drives the
whole horizon-step reachable band past the neighbor hyperplane). The
per-state detection threshold is the larger available arm plus the
measurement uncertainty margin. All inner optimizations are over boxes,
so maxima and minima are closed-form; a vertex-enumeration oracle
cross-checks the closed form in tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from .model import (
    Guard,
    HybridAutomaton,
    Invariant,
    LtiDynamics,
    Mode,
    ModeId,
    RegionDecomposition,
    Transition,
    decompose_regions,
)
from .reachability import box_zonotope, compute_all_deltas, reach, sigma_sum, step_bound

BISECT_TOL = 1e-9


class EmptyGeometryError(RuntimeError):
    """The one-step overshoot slab does not reach past the guard."""


class NoGuaranteeError(RuntimeError):
    """Neither threshold arm is available for the state."""


class OracleScaleError(ValueError):
    """Vertex enumeration refused: too many box corners."""


@dataclass(frozen=True)
class GuardGuarantee:
    """Solved quantities for one outgoing guard."""

    input_event: str
    z_star: float
    d_star: float  # math.inf when the horizon arm has no feasible offset
    epsilon: float


@dataclass(frozen=True)
class GuaranteeBound:
    """Per-state aggregate of the guard solutions."""

    mode_id: ModeId
    guards: tuple[GuardGuarantee, ...]
    z_star: float | None  # max over guards; None when the state has none
    d_star: float | None  # None when any guard's horizon arm is unavailable
    threshold: float | None  # None when no arm is available


def box_max(a: Sequence[float], lo: Sequence[float], hi: Sequence[float]) -> float:
    """Closed-form max of a.x over the box [lo, hi]."""
    a = np.asarray(a, dtype=float)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if np.any(lo > hi):
        raise ValueError("box has lo > hi")
    center = (lo + hi) / 2.0
    half = (hi - lo) / 2.0
    return float(a @ center + np.abs(a) @ half)


def _box_min(a: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> float:
    return -box_max(-np.asarray(a, dtype=float), lo, hi)


def oracle_box_optimum(a: Sequence[float], box: Sequence[tuple[float, float]]) -> float:
    """Max of a.x over a box by brute-force vertex enumeration."""
    a = np.asarray(a, dtype=float)
    if len(box) != a.size:
        raise ValueError("vector and box dimensions differ")
    if a.size > 10:
        raise OracleScaleError(f"{a.size} axes means {2**a.size} vertices; capped at 10")
    for lo, hi in box:
        if lo > hi:
            raise ValueError("box has lo > hi")
    best = -math.inf
    for mask in range(2 ** a.size):
        vertex = np.array(
            [box[i][1] if mask >> i & 1 else box[i][0] for i in range(a.size)]
        )
        best = max(best, float(a @ vertex))
    return best


def _scalar_v(model: HybridAutomaton) -> float:
    return float(max(np.max(model.dynamics(q).v_bounds) for q in model.mode_ids))


def _reflect_model(model: HybridAutomaton, axis: int) -> HybridAutomaton:
    """Mirror the whole state space on one axis so a falling guard rises."""
    modes = []
    for mode_id in model.mode_ids:
        mode = model.mode(mode_id)
        dyn = mode.dynamics
        a = dyn.a.copy()
        a[axis, :] *= -1.0
        a[:, axis] *= -1.0
        b = dyn.b.copy()
        b[axis, :] *= -1.0
        intervals = list(mode.invariant.intervals)
        lo, hi = intervals[axis]
        intervals[axis] = (-hi, -lo)
        modes.append(
            Mode(
                mode_id=mode.mode_id,
                dynamics=replace(dyn, a=a, b=b),
                invariant=Invariant(intervals=tuple(intervals)),
            )
        )
    transitions = []
    for tr in model.transitions:
        guard = tr.guard
        if guard.axis == axis:
            guard = Guard(axis=axis, sign=-guard.sign, threshold=-guard.threshold)
        transitions.append(replace(tr, guard=guard))
    return replace(model, modes=tuple(modes), transitions=tuple(transitions))


def facet_epsilon(model: HybridAutomaton, transition: Transition) -> float:
    """Farthest coordinate past the guard one step after it fires.

    Max of the guard-axis coordinate over the one-step reachable set of the
    guard hyperplane clipped to the source invariant.
    """
    guard = transition.guard
    if guard.sign < 0:
        reflected = _reflect_model(model, guard.axis)
        tr = _matching_transition(reflected, transition)
        return -facet_epsilon(reflected, tr)
    lo, hi = model.invariant(transition.source).bounds()
    lo[guard.axis] = hi[guard.axis] = guard.threshold
    hull_lo, hull_hi = reach(
        model, transition.source, box_zonotope(lo, hi), 1
    ).interval_hull()
    return float(hull_hi[guard.axis])


def _matching_transition(model: HybridAutomaton, transition: Transition) -> Transition:
    for tr in model.transitions_from(transition.source):
        if tr.input_event == transition.input_event:
            return tr
    raise KeyError(f"transition {transition.input_event!r} not found after reflection")


def solve_z_star(
    model: HybridAutomaton,
    regions: RegionDecomposition,
    transition: Transition,
) -> float:
    """Least measurement offset past the guard that escapes the invariant.

    Closed form: worst one-step image of the overshoot slab on the guard
    axis, plus one step of input and noise inflation and the measurement
    margin, minus the guard threshold; floored at zero.
    """
    guard = transition.guard
    if guard.sign < 0:
        reflected = _reflect_model(model, guard.axis)
        return solve_z_star(
            reflected, decompose_regions(reflected), _matching_transition(reflected, transition)
        )
    c_g = guard.threshold
    epsilon = facet_epsilon(model, transition)
    if epsilon < c_g:
        raise EmptyGeometryError(
            f"one-step overshoot tops out at {epsilon}, below the guard {c_g}"
        )
    lo, hi = model.invariant(transition.source).bounds()
    lo[guard.axis] = max(lo[guard.axis], c_g)
    hi[guard.axis] = min(hi[guard.axis], epsilon)
    if lo[guard.axis] > hi[guard.axis]:
        raise EmptyGeometryError("overshoot slab misses the source invariant")
    dyn_t = model.dynamics(transition.target)
    a_row = dyn_t.a[guard.axis]
    sigma = step_bound(model, transition.target)
    margin = model.theta + 2.0 * _scalar_v(model)
    return max(0.0, box_max(a_row, lo, hi) + sigma + margin - c_g)


def _d_star_raw(
    a_row: np.ndarray,
    inv_lo: np.ndarray,
    inv_hi: np.ndarray,
    axis: int,
    c_g: float,
    c_l: float,
    sigma: float,
    margin: float,
) -> float:
    """Least offset d whose measurement band reaches past the neighbor value.

    The band pins the guard axis to [c_g + d - margin, c_g + d + margin];
    an offset whose band misses the invariant entirely proves nothing and
    fails. The band minimum is nondecreasing in d (the guard-axis
    coefficient of the horizon-step matrix is nonnegative in the systems
    handled here), so the least satisfying d is found by bisection.
    """

    def band_min(d: float) -> float | None:
        blo = max(inv_lo[axis], c_g + d - margin)
        bhi = min(inv_hi[axis], c_g + d + margin)
        if blo > bhi:
            return None
        lo = inv_lo.copy()
        hi = inv_hi.copy()
        lo[axis], hi[axis] = blo, bhi
        return _box_min(a_row, lo, hi)

    def holds(d: float) -> bool:
        m = band_min(d)
        return m is not None and m - sigma >= c_l

    d_cap = inv_hi[axis] - c_g + margin  # largest d whose band still meets the invariant
    if not holds(d_cap):
        return math.inf
    if holds(0.0):
        return 0.0
    lo_d, hi_d = 0.0, d_cap
    while hi_d - lo_d > BISECT_TOL:
        mid = (lo_d + hi_d) / 2.0
        if holds(mid):
            hi_d = mid
        else:
            lo_d = mid
    return hi_d


def solve_d_star(
    model: HybridAutomaton,
    regions: RegionDecomposition,
    transition: Transition,
    delta_q: int,
) -> float:
    """Horizon-arm threshold for one guard; +inf when no offset works."""
    guard = transition.guard
    if guard.sign < 0:
        reflected = _reflect_model(model, guard.axis)
        return solve_d_star(
            reflected,
            decompose_regions(reflected),
            _matching_transition(reflected, transition),
            delta_q,
        )
    dyn = model.dynamics(transition.source)
    a_norm = float(np.max(np.sum(np.abs(dyn.a), axis=1)))
    sigma = sigma_sum(a_norm, delta_q, step_bound(model, transition.source))
    a_row = np.linalg.matrix_power(dyn.a, delta_q)[guard.axis]
    inv_lo, inv_hi = model.invariant(transition.source).bounds()
    c_l = regions.neighbor_values[(transition.source, transition.input_event)]
    margin = model.theta + 2.0 * _scalar_v(model)
    return _d_star_raw(
        a_row, inv_lo, inv_hi, guard.axis, guard.threshold, c_l, sigma, margin
    )


def state_guarantees(
    model: HybridAutomaton,
    regions: RegionDecomposition | None = None,
    deltas: Mapping[ModeId, int] | None = None,
) -> dict[ModeId, GuaranteeBound]:
    """Solve both arms for every guard and aggregate per state."""
    if regions is None:
        regions = decompose_regions(model)
    if deltas is None:
        deltas = compute_all_deltas(model, regions)
    out: dict[ModeId, GuaranteeBound] = {}
    margin = model.theta + 2.0 * _scalar_v(model)
    for mode_id in model.mode_ids:
        guards = []
        for tr in model.transitions_from(mode_id):
            z = solve_z_star(model, regions, tr)
            d = (
                solve_d_star(model, regions, tr, deltas[mode_id])
                if deltas[mode_id] > 0
                else math.inf
            )
            guards.append(
                GuardGuarantee(
                    input_event=tr.input_event,
                    z_star=z,
                    d_star=d,
                    epsilon=facet_epsilon(model, tr),
                )
            )
        z_arm = max((g.z_star for g in guards), default=None)
        d_values = [g.d_star for g in guards]
        d_arm = max(d_values) if d_values and all(math.isfinite(d) for d in d_values) else None
        threshold = None
        arms = [a for a in (z_arm, d_arm) if a is not None]
        if arms:
            threshold = max(arms) + margin
        out[mode_id] = GuaranteeBound(
            mode_id=mode_id,
            guards=tuple(guards),
            z_star=z_arm,
            d_star=d_arm,
            threshold=threshold,
        )
    return out


def detection_threshold(
    model: HybridAutomaton,
    mode_id: ModeId,
    regions: RegionDecomposition | None = None,
    deltas: Mapping[ModeId, int] | None = None,
) -> float:
    """Anomaly magnitude above which detection is guaranteed in this state."""
    bound = state_guarantees(model, regions, deltas)[mode_id]
    if bound.threshold is None:
        raise NoGuaranteeError(f"state {mode_id!r}: no threshold arm is available")
    return bound.threshold
