import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uavstate import georef
from uavstate.errors import CoincidentGCPs, InsufficientGCPs, NonPositiveDistance, ZeroBaseline
from uavstate.georef import FrameMapping, GroundControlPoint

from conftest import ALPHA, FULL_HD, forward_gcps, rot


def gcp(i, ltp, pcf):
    return GroundControlPoint(i, ltp, pcf)


class TestFitMapping:
    def test_axis_aligned(self):
        m = georef.fit_mapping([gcp("a", (0, 0), (0, 0)), gcp("b", (100, 0), (1000, 0))], ("a", "b"))
        assert m.alpha == pytest.approx(0.1)
        assert m.theta_offset == pytest.approx(0.0)
        assert m.linear_offset == pytest.approx((0.0, 0.0))

    def test_quarter_turn_sign_follows_image_minus_ground(self):
        # image baseline at 0 rad, ground baseline at +pi/2 -> offset 0 - pi/2
        gcps = [gcp("a", (0, 0), (0, 0)), gcp("b", (0, 100), (1000, 0))]
        m = georef.fit_mapping(gcps, ("a", "b"))
        assert m.alpha == pytest.approx(0.1)
        assert m.theta_offset == pytest.approx(-math.pi / 2)
        for g in gcps:
            assert georef.map_pixel(m, g.pcf) == pytest.approx(g.ltp, abs=1e-12)

    def test_random_similarity_recovered(self, rng):
        for _ in range(200):
            alpha = rng.uniform(0.005, 0.2)
            theta = rng.uniform(-math.pi, math.pi)
            xi = rng.uniform(-500, 500, 2)
            px = rng.uniform(0, 1920, (2, 2))
            if np.linalg.norm(px[1] - px[0]) < 50:
                continue
            m = georef.fit_mapping(forward_gcps(alpha, theta, xi, px))
            assert m.alpha == pytest.approx(alpha, rel=1e-9)
            assert abs(georef.wrap_angle(m.theta_offset - theta)) < 1e-9
            assert m.linear_offset == pytest.approx(tuple(xi), abs=1e-9 * max(1, np.abs(xi).max()))

    def test_round_trip_on_fitting_pair(self, rng):
        gcps = [gcp("p", (12.5, -3.0), (100.0, 900.0)), gcp("q", (80.0, 40.0), (1700.0, 200.0))]
        m = georef.fit_mapping(gcps, ("p", "q"))
        for g in gcps:
            assert np.abs(m.to_ltp(g.pcf) - g.ltp).max() <= 1e-9

    def test_errors(self):
        with pytest.raises(InsufficientGCPs):
            georef.fit_mapping([gcp("a", (0, 0), (0, 0))])
        with pytest.raises(CoincidentGCPs):
            georef.fit_mapping([gcp("a", (0, 0), (5, 5)), gcp("b", (1, 1), (5, 5))])
        with pytest.raises(CoincidentGCPs):
            georef.fit_mapping([gcp("a", (0, 0), (5, 5)), gcp("b", (0, 0), (9, 5))])

    def test_theta_normalised(self):
        m = FrameMapping(1.0, 3 * math.pi, (0, 0))
        assert m.theta_offset == pytest.approx(math.pi)
        m = FrameMapping(1.0, -math.pi, (0, 0))
        assert m.theta_offset == pytest.approx(math.pi)

    def test_alpha_must_be_positive(self):
        with pytest.raises(ValueError):
            FrameMapping(0.0, 0.0, (0, 0))


class TestMapPixel:
    def test_identity(self, identity_mapping):
        assert georef.map_pixel(identity_mapping, (5, 7)) == pytest.approx((5, 7))

    def test_thousand_pixels_against_forward_synthesis(self, rng):
        alpha, theta, xi = 0.0412, 0.73, np.array([-31.0, 250.0])
        m = georef.fit_mapping(forward_gcps(alpha, theta, xi, [(40, 60), (1850, 1010)]))
        px = rng.uniform(0, 1920, (1000, 2))
        truth = np.array([rot(theta).T @ (p * alpha) - xi for p in px])
        assert np.abs(m.to_ltp(px) - truth).max() <= 1e-6

    @settings(max_examples=200, deadline=None)
    @given(
        alpha=st.floats(1e-3, 1.0),
        theta=st.floats(-math.pi, math.pi),
        xi=st.tuples(st.floats(-1e4, 1e4), st.floats(-1e4, 1e4)),
        p=st.tuples(st.floats(0, 4000), st.floats(0, 4000)),
    )
    def test_inverse_round_trip(self, alpha, theta, xi, p):
        m = FrameMapping(alpha, theta, xi)
        assert np.abs(m.to_pcf(m.to_ltp(p)) - np.asarray(p)).max() <= 1e-9 * max(1.0, 1e4 / alpha / 4000)


class TestSimilarityFraction:
    def test_one_pixel_apart(self):
        assert georef.similarity_fraction(1.0, 1.0) == pytest.approx(0.2612, abs=5e-4)

    def test_full_hd_diagonal(self):
        d = math.hypot(1919, 1079)
        assert georef.similarity_fraction(d, 1.0) == pytest.approx(0.99872, abs=1e-4)

    def test_no_ambiguity(self):
        assert georef.similarity_fraction(17.0, 0.0) == 1.0

    def test_rejects_nonpositive(self):
        with pytest.raises(NonPositiveDistance):
            georef.similarity_fraction(0.0, 1.0)

    @given(d=st.floats(0.1, 1e4), dd=st.floats(0.01, 100), z=st.floats(0.01, 5), dz=st.floats(0.01, 5))
    def test_monotone(self, d, dd, z, dz):
        assert georef.similarity_fraction(d + dd, z) > georef.similarity_fraction(d, z)
        assert georef.similarity_fraction(d, z + dz) < georef.similarity_fraction(d, z)


def brute_orientation(delta, zeta):
    """Dense scan of the +-2*zeta perturbation box; the supremum lies on its boundary."""
    base = math.atan2(delta[1], delta[0])
    s = np.linspace(-2 * zeta, 2 * zeta, 401)
    edge = np.concatenate([
        np.stack([s, np.full_like(s, 2 * zeta)], 1), np.stack([s, np.full_like(s, -2 * zeta)], 1),
        np.stack([np.full_like(s, 2 * zeta), s], 1), np.stack([np.full_like(s, -2 * zeta), s], 1),
    ])
    ang = np.arctan2(delta[1] + edge[:, 1], delta[0] + edge[:, 0]) - base
    return float(np.max(np.abs((ang + math.pi) % (2 * math.pi) - math.pi)))


class TestOrientationBound:
    def test_one_pixel(self):
        # the four cases enumerated by hand: atan2(2,-1) is the worst
        cases = [math.atan2(0 + sy * 2, 1 + sx * 2) for sx, sy in itertools.product((1, -1), repeat=2)]
        assert max(abs(c) for c in cases) == pytest.approx(math.atan2(2, -1))
        assert math.degrees(georef.orientation_error_bound((1, 0), 1)) == pytest.approx(116.57, abs=0.01)

    def test_full_hd_diagonal(self):
        assert math.degrees(georef.orientation_error_bound((1919, 1079), 1)) == pytest.approx(0.07, abs=0.005)

    def test_zero_zeta(self):
        assert georef.orientation_error_bound((3, 4), 0.0) == 0.0

    def test_zero_baseline(self):
        with pytest.raises(ZeroBaseline):
            georef.orientation_error_bound((0, 0), 1)

    @pytest.mark.parametrize("delta", [(3, 4), (-50, 7), (1919, 1079), (0, -12), (9, -9)])
    def test_matches_boundary_scan(self, delta):
        assert georef.orientation_error_bound(delta, 1.0) == pytest.approx(brute_orientation(delta, 1.0), abs=1e-4)

    def test_decreases_along_doubling(self):
        vals = [georef.orientation_error_bound((3 * 2**k, 2 * 2**k), 1.0) for k in range(16)]
        assert all(b < a for a, b in zip(vals, vals[1:]))
        assert vals[-1] < 1e-4


class TestRotationPointError:
    def test_large_rotation(self):
        # alpha inverted from the worked example itself
        b = (1920, 1079)
        alpha = 124.8 / (2 * math.sin(math.radians(58)) * math.hypot(*b))
        assert alpha == pytest.approx(ALPHA, abs=1e-4)
        assert georef.rotation_point_error(b, math.radians(116), ALPHA) == pytest.approx(124.8, rel=0.005)

    def test_small_rotation(self):
        v = georef.rotation_point_error((1920, 1079), math.radians(0.07), ALPHA)
        assert v == pytest.approx(0.08, abs=0.02)

    def test_zero(self):
        assert georef.rotation_point_error((1920, 1079), 0.0, ALPHA) == 0.0

    @given(
        b=st.tuples(st.floats(-5000, 5000), st.floats(-5000, 5000)),
        eta=st.floats(-math.pi, math.pi),
        alpha=st.floats(1e-3, 1.0),
    )
    def test_chord_closed_form(self, b, eta, alpha):
        closed = 2 * abs(math.sin(eta / 2)) * math.hypot(*b) * alpha
        assert georef.rotation_point_error(b, eta, alpha) == pytest.approx(closed, rel=1e-12, abs=1e-9)


class TestOffsetError:
    def test_identity_case(self):
        assert georef.offset_error((1920, 1079), 1.0, 0.0, ALPHA) == pytest.approx((0, 0))

    def test_formula_in_meters(self):
        g = np.array([1920.0, 1079.0])
        eta = math.radians(116)
        expected = (rot(eta).T @ (g * 0.26) - g) * ALPHA
        assert georef.offset_error(g, 0.26, eta, ALPHA) == pytest.approx(expected)

    def test_worked_example_convention(self):
        # the quoted (-2394, -759) is in pixels with the rotation taken in the
        # opposite sense; the bound is symmetric in the sign of the angle error
        v = georef.offset_error((1920, 1079), 0.26, math.radians(-116), 1.0)
        assert v == pytest.approx((-2394, -759), rel=0.05)


class TestCompensate:
    def test_two_gcps_equal_pair_fit(self):
        gcps = forward_gcps(0.05, 0.3, (10, -4), [(100, 100), (1800, 900)])
        a = georef.compensate_gcps(gcps)
        b = georef.fit_mapping(gcps)
        assert a == b

    def test_four_noiseless_exact(self):
        gcps = forward_gcps(0.05, -2.0, (10, -4), [(50, 40), (1870, 1040), (1870, 40), (50, 1040)])
        m = georef.compensate_gcps(gcps, 0.25 * math.hypot(*FULL_HD))
        assert m.alpha == pytest.approx(0.05, rel=1e-9)
        assert m.theta_offset == pytest.approx(-2.0, abs=1e-9)
        assert m.linear_offset == pytest.approx((10, -4), abs=1e-9)

    def test_insufficient(self):
        with pytest.raises(InsufficientGCPs):
            georef.compensate_gcps([gcp("a", (0, 0), (0, 0))])

    def test_min_separation_falls_back_to_widest(self):
        gcps = forward_gcps(0.05, 0.1, (0, 0), [(0, 0), (10, 0), (30, 0)])
        m = georef.compensate_gcps(gcps, min_separation_px=1e6)
        assert m.source_gcp_ids == ("g0", "g2")

    def test_averaging_beats_worst_pair(self):
        rng = np.random.default_rng(7)
        alpha, theta, xi = ALPHA, 0.4, np.array([30.0, 12.0])
        layout = np.array([(50, 40), (1870, 1040), (1870, 40), (50, 1040)], dtype=float)
        corners = np.array([(0, 0), (1920, 0), (0, 1080), (1920, 1080)], dtype=float)
        truth_map = FrameMapping(alpha, theta, xi)
        comp, worst = [], []
        for _ in range(500):
            gcps = forward_gcps(alpha, theta, xi, layout)
            gcps = [GroundControlPoint(g.id, g.ltp, tuple(np.add(g.pcf, rng.uniform(-1, 1, 2)))) for g in gcps]
            err = lambda m: np.linalg.norm(m.to_ltp(corners) - truth_map.to_ltp(corners), axis=1).max()
            comp.append(err(georef.compensate_gcps(gcps, 0.25 * math.hypot(*FULL_HD))))
            worst.append(max(err(georef.fit_pair(a, b)) for a, b in itertools.combinations(gcps, 2)))
        assert np.median(comp) < np.median(worst)


class TestBudget:
    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.tuples(st.floats(0, 1920), st.floats(0, 1080)), min_size=3, max_size=8, unique=True))
    def test_far_pairs_dominate(self, pts):
        pts = np.array(pts)
        pairs = [(i, j) for i, j in itertools.combinations(range(len(pts)), 2)
                 if np.linalg.norm(pts[j] - pts[i]) > 10]
        if len(pairs) < 2:
            return
        d = {p: pts[p[1]] - pts[p[0]] for p in pairs}
        far = max(pairs, key=lambda p: np.linalg.norm(d[p]))
        dfar = np.linalg.norm(d[far])
        for p in pairs:
            dn = np.linalg.norm(d[p])
            assert georef.similarity_fraction(dfar) >= georef.similarity_fraction(dn)
            if dn <= dfar / 2:
                assert georef.orientation_error_bound(d[far]) <= georef.orientation_error_bound(d[p])

    def test_budget_json_keys(self):
        gcps = forward_gcps(ALPHA, 0.2, (1, 2), [(10, 10), (1900, 1070)], ids=["A", "B"])
        j = georef.error_budget(gcps, ("A", "B"), 1.0).to_json()
        assert set(j) == {"eta_alpha", "eta_theta_deg", "eta_point_m_at_corner", "eta_offset_m", "zeta_px", "gcp_pair_used"}
        assert 0 < j["eta_alpha"] <= 1
        assert j["gcp_pair_used"] == ["A", "B"]
        assert j["eta_point_m_at_corner"] >= 0

    def test_mapping_bound_holds_under_worst_perturbations(self):
        truth = FrameMapping(ALPHA, 0.3, (5, 5))
        g = np.array([[77.0, 43.0], [1843.0, 1037.0]])
        ltp = truth.to_ltp(g)
        queries = np.array([(0, 0), (1920, 0), (0, 1080), (1920, 1080), (960, 540)], dtype=float)
        for signs in itertools.product((-1, 1), repeat=4):
            e = np.array(signs, dtype=float).reshape(2, 2)
            fit = georef.fit_pair(GroundControlPoint("a", ltp[0], g[0] + e[0]), GroundControlPoint("b", ltp[1], g[1] + e[1]))
            for q in queries:
                err = np.linalg.norm(fit.to_ltp(q) - truth.to_ltp(q))
                assert err <= georef.mapping_error_bound(q, g[0], g[1] - g[0], 1.0, ALPHA)
