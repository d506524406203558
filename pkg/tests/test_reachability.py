"""Zonotope algebra, reachable-set over-approximation, horizon search."""

import numpy as np
import pytest

from hybridmon import (
    Event,
    Guard,
    HorizonError,
    HybridAutomaton,
    Invariant,
    LtiDynamics,
    Mode,
    Transition,
    Zonotope,
    box_zonotope,
    compute_delta,
    inflate,
    intersects_box,
    linear_map,
    reach,
)
from hybridmon.reachability import compute_all_deltas, sigma_sum, step_bound


def one_guard(a, w, inv_src, inv_tgt, threshold, b=0.0, mu=0.0):
    return HybridAutomaton(
        modes=(
            Mode(
                1,
                LtiDynamics(a=[[a]], b=[[b]], w_bounds=[w], v_bounds=[0.1], input_bound=mu),
                Invariant((inv_src,)),
            ),
            Mode(
                2,
                LtiDynamics(a=[[a]], b=[[b]], w_bounds=[w], v_bounds=[0.1], input_bound=mu),
                Invariant((inv_tgt,)),
            ),
        ),
        events=(Event("go", "input"), Event("seen", "output")),
        transitions=(Transition(1, "go", "seen", 2, Guard(axis=0, sign=1, threshold=threshold)),),
        dwell_time=1,
        sampling_period=1.0,
        theta=0.05,
    )


class TestZonotope:
    def test_shape_and_hull(self):
        z = Zonotope(center=[1.0, 2.0], generators=[[0.5, 0.0], [0.1, 0.2]])
        assert z.dim == 2 and z.order == 2
        lo, hi = z.interval_hull()
        np.testing.assert_allclose(lo, [0.4, 1.8])
        np.testing.assert_allclose(hi, [1.6, 2.2])

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError, match="generator dimension"):
            Zonotope(center=[0.0, 0.0], generators=[[1.0, 0.0, 0.0]])

    def test_arrays_are_readonly(self):
        z = Zonotope(center=[0.0], generators=[[1.0]])
        with pytest.raises(ValueError):
            z.center[0] = 5.0

    def test_axis_alignment(self):
        assert Zonotope([0.0, 0.0], [[1.0, 0.0], [0.0, 2.0]]).is_axis_aligned()
        assert not Zonotope([0.0, 0.0], [[1.0, 1.0]]).is_axis_aligned()
        assert Zonotope([0.0, 0.0], np.zeros((0, 2))).is_axis_aligned()

    def test_support(self):
        z = Zonotope(center=[1.0, 0.0], generators=[[1.0, 1.0]])
        lo, hi = z.support(np.array([1.0, -1.0]))
        # the generator is orthogonal to the direction, so a single point
        assert lo == hi == 1.0
        lo, hi = z.support(np.array([1.0, 1.0]))
        assert (lo, hi) == (-1.0, 3.0)


class TestBoxZonotope:
    def test_round_trip_hull(self):
        z = box_zonotope([0.0, -1.0], [2.0, 3.0])
        lo, hi = z.interval_hull()
        np.testing.assert_allclose(lo, [0.0, -1.0])
        np.testing.assert_allclose(hi, [2.0, 3.0])
        assert z.is_axis_aligned()

    def test_zero_width_axes_get_no_generator(self):
        z = box_zonotope([1.0, 2.0], [1.0, 4.0])
        assert z.order == 1
        np.testing.assert_allclose(z.center, [1.0, 3.0])

    def test_inverted_box_rejected(self):
        with pytest.raises(ValueError, match="lo > hi"):
            box_zonotope([1.0], [0.0])


class TestLinearMapInflate:
    def test_rotation_maps_vertices(self):
        rot = np.array([[0.0, -1.0], [1.0, 0.0]])
        z = linear_map(rot, box_zonotope([-1.0, -2.0], [1.0, 2.0]))
        lo, hi = z.interval_hull()
        np.testing.assert_allclose(lo, [-2.0, -1.0])
        np.testing.assert_allclose(hi, [2.0, 1.0])
        # support along the rotated first axis stays the original width
        assert z.support(np.array([0.0, 1.0])) == (-1.0, 1.0)

    def test_inflate_grows_hull_by_radius(self):
        z = box_zonotope([0.0], [1.0])
        grown = inflate(z, 0.25)
        lo, hi = grown.interval_hull()
        assert (lo[0], hi[0]) == (-0.25, 1.25)

    def test_inflate_zero_returns_same_object(self):
        z = box_zonotope([0.0], [1.0])
        assert inflate(z, 0.0) is z

    def test_inflate_negative_rejected(self):
        with pytest.raises(ValueError):
            inflate(box_zonotope([0.0], [1.0]), -0.1)


class TestSigmaSum:
    def test_train_gate_per_step_bound(self, tg_model):
        # ||B|| mu + w = 0.05 * 1.0 + 0.01
        assert step_bound(tg_model, 1) == pytest.approx(0.06, abs=1e-15)

    def test_geometric_sum_frozen(self):
        # 0.06 * (1.1^d - 1) / 0.1 for the crossing model's row-sum norm
        assert sigma_sum(1.1, 8, 0.06) == pytest.approx(0.6861532860000001, abs=1e-12)
        assert sigma_sum(1.1, 9, 0.06) == pytest.approx(0.8147686146000003, abs=1e-12)

    def test_norm_one_analytic_limit(self):
        assert sigma_sum(1.0, 5, 0.06) == pytest.approx(0.30, abs=1e-15)
        assert sigma_sum(1.0 + 1e-13, 5, 0.06) == pytest.approx(0.30, abs=1e-15)

    def test_zero_steps(self):
        assert sigma_sum(1.1, 0, 0.06) == 0.0


class TestReach:
    def test_zero_steps_is_identity(self, tg_model):
        z = box_zonotope([44.9, 0.1], [45.1, 0.3])
        assert reach(tg_model, 1, z, 0) is z

    def test_negative_steps_rejected(self, tg_model):
        with pytest.raises(ValueError):
            reach(tg_model, 1, box_zonotope([0.0, 0.0], [1.0, 1.0]), -1)

    def test_one_step_hull_by_hand(self, tg_model):
        z = box_zonotope([44.9, 0.1], [45.1, 0.3])
        lo, hi = reach(tg_model, 1, z, 1).interval_hull()
        # A [45, .2] = [45.02, .19]; generator radii (0.1, 0) and (0.01, 0.095);
        # plus the 0.06 inflation on both axes
        np.testing.assert_allclose(lo, [44.85, 0.035], atol=1e-12)
        np.testing.assert_allclose(hi, [45.19, 0.345], atol=1e-12)

    def test_hulls_nest_with_horizon(self, tg_model):
        z = box_zonotope([44.9, 0.1], [45.1, 0.3])
        prev_lo, prev_hi = reach(tg_model, 1, z, 0).interval_hull()
        for delta in range(1, 13):
            lo, hi = reach(tg_model, 1, z, delta).interval_hull()
            assert np.all(lo <= prev_lo + 1e-12)
            assert np.all(hi >= prev_hi - 1e-12)
            prev_lo, prev_hi = lo, hi

    def test_sampled_trajectories_stay_inside(self, tg_model):
        rng = np.random.default_rng(42)
        dyn = tg_model.dynamics(1)
        z0 = box_zonotope([10.0, 0.5], [12.0, 0.7])
        delta = 6
        tube = reach(tg_model, 1, z0, delta)
        for _ in range(50):
            x = rng.uniform([10.0, 0.5], [12.0, 0.7])
            for _ in range(delta):
                u = rng.uniform(-dyn.input_bound, dyn.input_bound, size=1)
                w = rng.uniform(-dyn.w_bounds, dyn.w_bounds)
                x = dyn.a @ x + dyn.b @ u + w
            assert intersects_box(tube, [(x[0], x[0]), (x[1], x[1])])


class TestIntersectsBox:
    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimension"):
            intersects_box(box_zonotope([0.0], [1.0]), [(0.0, 1.0), (0.0, 1.0)])

    def test_hull_quick_reject(self):
        z = Zonotope([0.0, 0.0], [[1.0, 1.0]])
        assert not intersects_box(z, [(5.0, 6.0), (0.0, 1.0)])

    def test_axis_aligned_boundary_contact(self):
        z = box_zonotope([0.0, 0.0], [1.0, 1.0])
        assert intersects_box(z, [(1.0, 2.0), (1.0, 2.0)])  # corner touch
        assert not intersects_box(z, [(1.0 + 1e-9, 2.0), (0.0, 1.0)])

    def test_diamond_misses_corner_box(self):
        # hulls overlap but the diamond x: |x|+|y| <= 1 stays clear
        z = Zonotope([0.0, 0.0], [[0.5, 0.5], [0.5, -0.5]])
        assert not intersects_box(z, [(0.8, 1.0), (0.8, 1.0)])
        assert intersects_box(z, [(0.4, 1.0), (0.4, 1.0)])  # touches at (.5, .5)

    def test_segment_separating_axis(self):
        z = Zonotope([0.0, 0.0], [[1.0, 1.0]])  # segment y = x
        assert not intersects_box(z, [(0.5, 1.0), (-0.2, -0.1)])
        assert intersects_box(z, [(0.4, 0.6), (0.4, 0.6)])

    def test_three_dimensional_lp_fallback(self):
        z = Zonotope([0.0, 0.0, 0.0], [[1.0, 1.0, 1.0]])
        assert intersects_box(z, [(0.9, 1.1), (0.9, 1.1), (0.9, 1.1)])
        assert not intersects_box(z, [(0.9, 1.1), (0.9, 1.1), (-1.1, -0.9)])


class TestComputeDelta:
    def test_train_gate_mode_horizons(self, tg_model, tg_regions):
        delta_1, per_guard = compute_delta(tg_model, tg_regions, 1)
        assert delta_1 == 8
        assert per_guard == {(1, "c_down"): 8}
        assert compute_all_deltas(tg_model, tg_regions) == {1: 8, 2: 8, 3: 0}

    def test_guard_on_invariant_face_gives_zero(self, tg_model, tg_regions):
        # mode 3's guard sits on the invariant face at 80
        delta_3, per_guard = compute_delta(tg_model, tg_regions, 3)
        assert delta_3 == 0
        assert per_guard == {(3, "c_next"): 0}

    def test_mode_without_guards_gives_zero(self, tg_model, tg_regions):
        from hybridmon import decompose_regions

        model = one_guard(1.0, 0.0, (0.0, 10.0), (10.0, 12.0), 10.0)
        regions = decompose_regions(model)
        assert compute_delta(model, regions, 2) == (0, {})

    def test_drift_free_unit_chain(self):
        from hybridmon import decompose_regions

        # facet at 5, neighbor face at 6, steps of at most 0.1: nine steps of
        # slack before the tenth reach hull can touch the face
        model = one_guard(1.0, 0.0, (0.0, 6.0), (5.0, 8.0), 5.0, b=1.0, mu=0.1)
        regions = decompose_regions(model)
        assert compute_delta(model, regions, 1) == (9, {(1, "go"): 9})

    def test_contracting_mode_never_reaches(self):
        from hybridmon import decompose_regions

        model = one_guard(0.5, 0.0, (0.0, 6.0), (5.0, 8.0), 5.0)
        regions = decompose_regions(model)
        with pytest.raises(HorizonError, match="no\\s+contact"):
            compute_delta(model, regions, 1, max_delta=50)
