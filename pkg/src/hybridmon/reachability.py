"""Zonotope algebra, forward reachable sets, and the per-mode horizon search.

A zonotope is a center plus generator segments; the set is
{c + sum_i b_i g_i : b_i in [-1, 1]}. Reachable sets use the closed form
A^d Z plus an infinity-ball whose radius is the geometric sum of the
per-step input and noise bound, so generators never accumulate with the
horizon.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import linprog

from .model import GEOM_TOL, HybridAutomaton, ModeId, RegionDecomposition, Transition

NORM_ONE_TOL = 1e-12  # treat the matrix norm as exactly one inside this slack
MAX_DELTA = 10_000


class HorizonError(RuntimeError):
    """No contact with the neighbor hyperplane within the search cap."""


@dataclass(frozen=True)
class Zonotope:
    """Center (n,) and generators as rows of a (p, n) array."""

    center: np.ndarray
    generators: np.ndarray

    def __post_init__(self) -> None:
        center = np.array(self.center, dtype=float).reshape(-1)
        generators = np.array(self.generators, dtype=float)
        if generators.size == 0:
            generators = np.zeros((0, center.size))
        generators = np.atleast_2d(generators)
        if generators.shape[1] != center.size:
            raise ValueError(
                f"generator dimension {generators.shape[1]} != center dimension {center.size}"
            )
        center.flags.writeable = False
        generators.flags.writeable = False
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "generators", generators)

    @property
    def dim(self) -> int:
        return self.center.size

    @property
    def order(self) -> int:
        return self.generators.shape[0]

    def interval_hull(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-axis [lo, hi] of the tightest axis-aligned bounding box."""
        radius = np.sum(np.abs(self.generators), axis=0)
        return self.center - radius, self.center + radius

    def is_axis_aligned(self) -> bool:
        """Every generator has at most one nonzero coordinate."""
        return bool(np.all(np.count_nonzero(self.generators, axis=1) <= 1))

    def support(self, direction: np.ndarray) -> tuple[float, float]:
        """Min and max of direction . x over the zonotope."""
        mid = float(direction @ self.center)
        radius = float(np.sum(np.abs(self.generators @ direction)))
        return mid - radius, mid + radius


def box_zonotope(lo: Sequence[float], hi: Sequence[float]) -> Zonotope:
    """Axis-aligned zonotope for the box [lo, hi]; zero-width axes get no generator."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if np.any(lo > hi):
        raise ValueError("box has lo > hi")
    center = (lo + hi) / 2.0
    half = (hi - lo) / 2.0
    generators = [half[i] * np.eye(len(lo))[i] for i in range(len(lo)) if half[i] > 0.0]
    return Zonotope(center=center, generators=np.array(generators).reshape(-1, len(lo)))


def linear_map(matrix: np.ndarray, z: Zonotope) -> Zonotope:
    """Exact image of the zonotope under a linear map."""
    matrix = np.asarray(matrix, dtype=float)
    return Zonotope(center=matrix @ z.center, generators=z.generators @ matrix.T)


def inflate(z: Zonotope, sigma: float) -> Zonotope:
    """Minkowski sum with the infinity-ball of radius sigma."""
    if sigma < 0:
        raise ValueError("inflation radius must be nonnegative")
    if sigma == 0.0:
        return z
    extra = sigma * np.eye(z.dim)
    return Zonotope(center=z.center, generators=np.vstack([z.generators, extra]))


def step_bound(model: HybridAutomaton, mode_id: ModeId) -> float:
    """Per-step inflation radius: ||B|| mu + w in the infinity norm."""
    dyn = model.dynamics(mode_id)
    b_norm = float(np.max(np.sum(np.abs(dyn.b), axis=1))) if dyn.b.size else 0.0
    return b_norm * dyn.input_bound + dyn.w_norm


def sigma_sum(a_norm: float, steps: int, per_step: float) -> float:
    """Geometric sum of per-step inflation over the horizon.

    (1 - a_norm^steps) / (1 - a_norm) * per_step, with the analytic limit
    steps * per_step when the norm is one.
    """
    if steps <= 0:
        return 0.0
    if abs(a_norm - 1.0) <= NORM_ONE_TOL:
        return steps * per_step
    return (1.0 - a_norm**steps) / (1.0 - a_norm) * per_step


def reach(model: HybridAutomaton, mode_id: ModeId, z: Zonotope, delta: int) -> Zonotope:
    """Forward reachable set over-approximation after delta steps in one mode."""
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    if delta == 0:
        return z
    dyn = model.dynamics(mode_id)
    a_norm = float(np.max(np.sum(np.abs(dyn.a), axis=1)))
    sigma = sigma_sum(a_norm, delta, step_bound(model, mode_id))
    mapped = linear_map(np.linalg.matrix_power(dyn.a, delta), z)
    return inflate(mapped, sigma)


def _perp2(v: np.ndarray) -> np.ndarray:
    return np.array([-v[1], v[0]])


def intersects_box(z: Zonotope, box: Sequence[tuple[float, float]]) -> bool:
    """Exact emptiness decision for a zonotope against an axis-aligned box.

    Boundary contact counts as intersection. Fast paths: disjoint interval
    hulls (always correct as a negative), axis-aligned zonotopes (the hull
    is the set), and 2-D separating axes over all edge normals (exact for
    convex polygons). Higher dimensions fall back to linear-program
    feasibility over the generator coefficients.
    """
    box = tuple((float(lo), float(hi)) for lo, hi in box)
    if len(box) != z.dim:
        raise ValueError("box dimension does not match zonotope dimension")
    lo, hi = z.interval_hull()
    for axis, (blo, bhi) in enumerate(box):
        if hi[axis] < blo or lo[axis] > bhi:
            return False
    if z.is_axis_aligned():
        return True  # hull overlap is exact for interval sets
    if z.dim == 2:
        center = np.array([(blo + bhi) / 2.0 for blo, bhi in box])
        half = np.array([(bhi - blo) / 2.0 for blo, bhi in box])
        axes = [g for g in (_perp2(g) for g in z.generators) if np.any(g != 0.0)]
        for direction in axes:
            z_lo, z_hi = z.support(direction)
            mid = float(direction @ center)
            rad = float(np.abs(direction) @ half)
            if z_hi < mid - rad or z_lo > mid + rad:
                return False
        return True  # box axes were already checked against the hull
    # feasibility of: box_lo <= c + G' b <= box_hi, b in [-1, 1]^p
    g = z.generators.T
    a_ub = np.vstack([g, -g])
    b_ub = np.concatenate(
        [
            np.array([bhi for _, bhi in box]) - z.center,
            z.center - np.array([blo for blo, _ in box]),
        ]
    )
    result = linprog(
        c=np.zeros(z.order),
        A_ub=a_ub,
        b_ub=b_ub,
        bounds=[(-1.0, 1.0)] * z.order,
        method="highs",
    )
    if result.status == 0:
        return True
    if result.status == 2:
        return False
    raise RuntimeError(f"intersection solve failed: {result.message}")


def _facet_box(
    model: HybridAutomaton, transition: Transition
) -> tuple[np.ndarray, np.ndarray]:
    """Box of continuous states possible at the instant a transition fires.

    The guard hyperplane pins the guard axis to the threshold; the other
    axes are clipped to both the source and target invariants, since the
    state must be admissible in the source when the guard fires and in the
    target one step later. If that clip is empty the source invariant alone
    is used.
    """
    inv_s = model.invariant(transition.source)
    inv_t = model.invariant(transition.target)
    lo_s, hi_s = inv_s.bounds()
    lo_t, hi_t = inv_t.bounds()
    lo = np.maximum(lo_s, lo_t)
    hi = np.minimum(hi_s, hi_t)
    if np.any(lo > hi):
        lo, hi = lo_s, hi_s
    axis = transition.guard.axis
    lo[axis] = hi[axis] = transition.guard.threshold
    return lo, hi


def compute_delta(
    model: HybridAutomaton,
    regions: RegionDecomposition,
    mode_id: ModeId,
    max_delta: int = MAX_DELTA,
) -> tuple[int, dict[tuple[ModeId, str], int]]:
    """Per-mode reachability horizon and the per-guard horizons behind it.

    For each outgoing guard, the horizon is the least delta such that the
    (delta + 1)-step reachable set from the guard facet touches the neighbor
    hyperplane value on the guard axis (interval-hull contact). A guard
    sitting on the invariant face gives zero immediately. The mode's horizon
    is the minimum over its guards; a mode with no outgoing guard gets zero,
    since no transition constrains how long the estimate may linger.
    """
    per_guard: dict[tuple[ModeId, str], int] = {}
    for tr in model.transitions_from(mode_id):
        key = (tr.source, tr.input_event)
        c_l = regions.neighbor_values[key]
        c_g = tr.guard.threshold
        if abs(c_l - c_g) <= GEOM_TOL:
            per_guard[key] = 0
            continue
        lo, hi = _facet_box(model, tr)
        facet = box_zonotope(lo, hi)
        found: int | None = None
        for delta in range(max_delta + 1):
            hull_lo, hull_hi = reach(model, mode_id, facet, delta + 1).interval_hull()
            if hull_lo[tr.guard.axis] <= c_l <= hull_hi[tr.guard.axis]:
                found = delta
                break
        if found is None:
            raise HorizonError(
                f"mode {mode_id!r}, guard at {c_g} on axis {tr.guard.axis}: no "
                f"contact with neighbor value {c_l} within {max_delta} steps"
            )
        per_guard[key] = found
    delta_q = min(per_guard.values()) if per_guard else 0
    return delta_q, per_guard


def compute_all_deltas(
    model: HybridAutomaton,
    regions: RegionDecomposition,
    max_delta: int = MAX_DELTA,
) -> dict[ModeId, int]:
    """Horizon table for every mode."""
    return {
        mode_id: compute_delta(model, regions, mode_id, max_delta=max_delta)[0]
        for mode_id in model.mode_ids
    }
