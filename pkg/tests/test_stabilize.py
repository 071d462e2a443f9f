import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uavstate.errors import DegenerateSample, NoConsensus
from uavstate.stabilize import (
    IDENTITY,
    Correspondence,
    RobustFitConfig,
    SimilarityTransform,
    apply_transform,
    estimate_transform,
    solve_least_squares,
    solve_two_point,
    transform_cost,
)

TRUE = SimilarityTransform(1.02, math.radians(0.5), (3.0, -2.0))


def matrix_apply(t, pts):
    """Homogeneous-matrix oracle for the complex-number implementation."""
    p = np.c_[np.asarray(pts, float), np.ones(len(pts))]
    return (t.matrix() @ p.T).T[:, :2]


def scene(t, n=100, outliers=0.0, sigma=0.0, seed=0):
    rng = np.random.default_rng(seed)
    cur = rng.uniform((0, 0), (1920, 1080), (n, 2))
    ref = matrix_apply(t, cur) + rng.normal(0, sigma, (n, 2)) if sigma else matrix_apply(t, cur)
    bad = rng.permutation(n)[: int(round(outliers * n))]
    ref[bad] = rng.uniform((0, 0), (1920, 1080), (len(bad), 2))
    return ref, cur


transforms = st.builds(
    SimilarityTransform,
    st.floats(0.5, 2.0),
    st.floats(-math.pi, math.pi),
    st.tuples(st.floats(-500, 500), st.floats(-500, 500)),
)


class TestTransform:
    def test_identity_apply(self):
        pts = np.array([[1.5, 2.0], [1900, 7]])
        assert np.array_equal(apply_transform(IDENTITY, pts), pts)

    def test_matches_matrix_form(self, rng):
        pts = rng.uniform(0, 2000, (50, 2))
        assert apply_transform(TRUE, pts) == pytest.approx(matrix_apply(TRUE, pts), abs=1e-9)

    def test_single_point_shape(self):
        assert apply_transform(TRUE, (10.0, 20.0)).shape == (2,)

    @settings(max_examples=200, deadline=None)
    @given(transforms)
    def test_inverse_round_trip(self, t):
        pts = np.array([[0, 0], [1920, 1080], [960.5, 3.25], [-40, 700]], dtype=float)
        back = apply_transform(t.inverse(), apply_transform(t, pts))
        assert np.abs(back - pts).max() <= 1e-9

    @given(transforms, transforms)
    def test_compose_is_sequential_apply(self, t1, t2):
        pts = np.array([[0.0, 0.0], [100.0, 50.0], [1920.0, 1080.0]])
        direct = apply_transform(t1.compose(t2), pts)
        seq = apply_transform(t1, apply_transform(t2, pts))
        assert np.abs(direct - seq).max() <= 1e-6


class TestSolvers:
    @settings(max_examples=200, deadline=None)
    @given(transforms)
    def test_two_point_exact(self, t):
        cur = np.array([[100.0, 200.0], [1500.0, 900.0]])
        fit = solve_two_point(matrix_apply(t, cur), cur)
        assert fit.scale == pytest.approx(t.scale, rel=1e-9)
        assert abs(math.remainder(fit.rotation - t.rotation, 2 * math.pi)) < 1e-9
        assert fit.translation == pytest.approx(t.translation, abs=1e-7)

    def test_two_point_degenerate(self):
        with pytest.raises(DegenerateSample):
            solve_two_point([[0, 0], [1, 1]], [[5, 5], [5, 5]])

    def test_least_squares_exact(self):
        ref, cur = scene(TRUE)
        fit = solve_least_squares(ref, cur)
        assert fit.scale == pytest.approx(1.02, abs=1e-9)


class TestEstimate:
    def test_exact_correspondences(self):
        ref, cur = scene(TRUE)
        t, rep = estimate_transform((ref, cur))
        assert abs(t.scale - 1.02) <= 1e-6
        assert abs(t.rotation - math.radians(0.5)) <= 1e-6
        assert np.abs(np.subtract(t.translation, (3, -2))).max() <= 1e-4
        assert rep.inlier_count == 100 and rep.inlier_ratio == 1.0

    def test_accepts_correspondence_list(self):
        ref, cur = scene(TRUE, n=20)
        corrs = [Correspondence(tuple(r), tuple(c)) for r, c in zip(ref, cur)]
        t, _ = estimate_transform(corrs)
        assert t.scale == pytest.approx(1.02, abs=1e-6)

    def test_identity_scene(self):
        _, cur = scene(IDENTITY)
        t, rep = estimate_transform((cur, cur))
        assert t.scale == pytest.approx(1.0, abs=1e-12)
        assert t.rotation == pytest.approx(0.0, abs=1e-12)
        assert t.translation == pytest.approx((0, 0), abs=1e-9)
        assert rep.inlier_ratio == 1.0

    def test_half_outliers(self):
        ref, cur = scene(TRUE, outliers=0.5, sigma=0.5, seed=3)
        t, rep = estimate_transform((ref, cur), RobustFitConfig(sigma=0.5, seed=3))
        assert abs(t.scale - 1.02) < 1e-3
        assert abs(math.degrees(t.rotation) - 0.5) < 0.05
        assert np.linalg.norm(np.subtract(t.translation, (3, -2))) < 0.5
        assert rep.inlier_ratio == pytest.approx(0.5, abs=0.05)

    def test_restored_detections(self):
        ref, cur = scene(TRUE, outliers=0.5, sigma=0.5, seed=9)
        t, _ = estimate_transform((ref, cur), RobustFitConfig(sigma=0.5, seed=9))
        boxes = np.array([[400, 300], [445, 300], [445, 318], [400, 318]], dtype=float)
        warped = apply_transform(TRUE.inverse(), boxes)
        assert np.linalg.norm(apply_transform(t, warped) - boxes, axis=1).max() <= 0.5

    def test_report_invariants(self):
        ref, cur = scene(TRUE, outliers=0.3, sigma=0.5)
        _, rep = estimate_transform((ref, cur))
        assert 0 <= rep.inlier_count <= 100
        assert rep.residual_rms >= 0
        assert 1 <= rep.iterations_used <= 2000

    def test_deterministic(self):
        ref, cur = scene(TRUE, outliers=0.4, sigma=0.5)
        a = estimate_transform((ref, cur), RobustFitConfig(seed=11))
        b = estimate_transform((ref, cur), RobustFitConfig(seed=11))
        assert a == b

    def test_too_few(self):
        with pytest.raises(NoConsensus):
            estimate_transform((np.zeros((1, 2)), np.zeros((1, 2))))

    def test_all_coincident(self):
        pts = np.full((10, 2), 5.0)
        with pytest.raises(DegenerateSample):
            estimate_transform((pts, pts), RobustFitConfig(max_iterations=50))

    def test_pure_noise_no_consensus(self):
        rng = np.random.default_rng(0)
        ref = rng.uniform(0, 1000, (60, 2))
        cur = rng.uniform(0, 1000, (60, 2))
        with pytest.raises(NoConsensus):
            estimate_transform((ref, cur))

    def test_true_scores_better_than_identity(self):
        ref, cur = scene(TRUE, outliers=0.3, sigma=0.5)
        cfg = RobustFitConfig(sigma=0.5)
        assert transform_cost(TRUE, ref, cur, cfg) <= transform_cost(IDENTITY, ref, cur, cfg)
