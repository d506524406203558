"""Three-way conflict detector run against the observer output each sample.

Conflict A: the measurement-consistent initial set has grown past the
volume that bounded noise alone can explain. Conflict B: that set has no
point inside the estimated mode's invariant. Conflict C: its reachable
set over the mode's horizon leaves the invariant entirely. Any one of
them marks the sample anomalous.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .model import HybridAutomaton, ModeId, RegionDecomposition, decompose_regions
from .reachability import (
    Zonotope,
    compute_all_deltas,
    inflate,
    intersects_box,
    linear_map,
    sigma_sum,
    step_bound,
)


class UnsupportedShapeError(ValueError):
    """Volume is only defined here for axis-aligned zonotopes."""


@dataclass(frozen=True)
class ConflictReport:
    """Per-sample detector verdict plus the geometry behind it."""

    time_index: int
    estimated_mode: ModeId | None
    warming_up: bool
    conflict_a: bool
    conflict_b: bool
    conflict_c: bool
    initial_set: Zonotope
    reach_set: Zonotope | None
    volume: float
    volume_bound: float

    @property
    def alarm(self) -> bool:
        return self.conflict_a or self.conflict_b or self.conflict_c


def initial_set(
    x_est: Sequence[float], residual: Sequence[float], v_bounds: Sequence[float]
) -> Zonotope:
    """Axis-aligned box of states consistent with the current measurement.

    Centered at the estimate with per-axis half-width |r_i| + v_i.
    """
    x_est = np.asarray(x_est, dtype=float)
    residual = np.asarray(residual, dtype=float)
    v_bounds = np.asarray(v_bounds, dtype=float)
    if residual.shape != x_est.shape or v_bounds.shape != x_est.shape:
        raise ValueError("residual/noise dimensions do not match the estimate")
    half = np.abs(residual) + v_bounds
    return Zonotope(center=x_est, generators=np.diag(half))


def volume(z: Zonotope) -> float:
    """Box volume of an axis-aligned zonotope."""
    if not z.is_axis_aligned():
        raise UnsupportedShapeError("volume requires an axis-aligned zonotope")
    half = np.sum(np.abs(z.generators), axis=0)
    return float(np.prod(2.0 * half))


def volume_bound(model: HybridAutomaton) -> float:
    """Largest initial-set volume bounded noise can produce: prod(2*theta + 4*v_i)."""
    v = np.max([model.dynamics(q).v_bounds for q in model.mode_ids], axis=0)
    return float(np.prod(2.0 * model.theta + 4.0 * v))


def _invariant_box(model: HybridAutomaton, mode_id: ModeId) -> tuple[tuple[float, float], ...]:
    lo, hi = model.invariant(mode_id).bounds()
    return tuple(zip(lo.tolist(), hi.tolist()))


def detect(
    model: HybridAutomaton,
    regions: RegionDecomposition,
    deltas: Mapping[ModeId, int],
    node: Sequence[ModeId],
    x_est: Sequence[float],
    residual: Sequence[float],
    time_index: int = 0,
) -> ConflictReport:
    """One-shot conflict evaluation; requires a settled singleton mode estimate."""
    if len(node) != 1:
        raise ValueError(
            f"conflict detection needs a singleton mode estimate, got {tuple(node)!r}"
        )
    detector = Detector(model, regions=regions, deltas=deltas)
    return detector.evaluate(time_index, tuple(node), True, x_est, residual)


class Detector:
    """Conflict evaluator with per-mode geometry precomputed once.

    Holds each mode's invariant box, horizon, matrix power over the
    horizon, and accumulated inflation radius, so the per-sample check is
    a handful of interval comparisons.
    """

    def __init__(
        self,
        model: HybridAutomaton,
        regions: RegionDecomposition | None = None,
        deltas: Mapping[ModeId, int] | None = None,
    ) -> None:
        self.model = model
        self.regions = regions if regions is not None else decompose_regions(model)
        self.deltas = (
            dict(deltas) if deltas is not None else compute_all_deltas(model, self.regions)
        )
        self.volume_bound = volume_bound(model)
        self._fallback_v = np.max(
            [model.dynamics(q).v_bounds for q in model.mode_ids], axis=0
        )
        self._inv_box: dict[ModeId, tuple[tuple[float, float], ...]] = {}
        self._a_power: dict[ModeId, np.ndarray] = {}
        self._sigma: dict[ModeId, float] = {}
        for mode_id in model.mode_ids:
            dyn = model.dynamics(mode_id)
            delta = self.deltas[mode_id]
            a_norm = float(np.max(np.sum(np.abs(dyn.a), axis=1)))
            self._inv_box[mode_id] = _invariant_box(model, mode_id)
            self._a_power[mode_id] = np.linalg.matrix_power(dyn.a, delta)
            self._sigma[mode_id] = sigma_sum(a_norm, delta, step_bound(model, mode_id))

    def evaluate(
        self,
        time_index: int,
        node: tuple[ModeId, ...],
        steady: bool,
        x_est: Sequence[float],
        residual: Sequence[float],
    ) -> ConflictReport:
        """Verdict for one sample; non-singleton or unsettled input only warms up."""
        singleton = len(node) == 1
        v = self.model.dynamics(node[0]).v_bounds if singleton else self._fallback_v
        x_i = initial_set(x_est, residual, v)
        vol = volume(x_i)
        if not (singleton and steady):
            return ConflictReport(
                time_index=time_index,
                estimated_mode=node[0] if singleton else None,
                warming_up=True,
                conflict_a=False,
                conflict_b=False,
                conflict_c=False,
                initial_set=x_i,
                reach_set=None,
                volume=vol,
                volume_bound=self.volume_bound,
            )
        mode_id = node[0]
        inv_box = self._inv_box[mode_id]
        conflict_a = vol > self.volume_bound
        conflict_b = not intersects_box(x_i, inv_box)
        reach_set: Zonotope | None = None
        conflict_c = False
        if self.deltas[mode_id] > 0:
            reach_set = inflate(
                linear_map(self._a_power[mode_id], x_i), self._sigma[mode_id]
            )
            conflict_c = not intersects_box(reach_set, inv_box)
        return ConflictReport(
            time_index=time_index,
            estimated_mode=mode_id,
            warming_up=False,
            conflict_a=conflict_a,
            conflict_b=conflict_b,
            conflict_c=conflict_c,
            initial_set=x_i,
            reach_set=reach_set,
            volume=vol,
            volume_bound=self.volume_bound,
        )
