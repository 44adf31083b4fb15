import numpy as np
import pytest

from hildrive.geom import (
    arc_points,
    normalize_angle,
    polyline_length,
    ray_circles_distance,
    ray_segments_distance,
    rectangle_corners,
    rectangles_overlap,
    segments_of_polyline,
)


class TestAngles:
    def test_wrap_to_half_open_interval(self):
        assert normalize_angle(0.0) == 0.0
        assert normalize_angle(np.pi) == pytest.approx(np.pi)
        assert normalize_angle(-np.pi) == pytest.approx(np.pi)
        assert normalize_angle(3 * np.pi / 2) == pytest.approx(-np.pi / 2)
        assert normalize_angle(-3 * np.pi / 2) == pytest.approx(np.pi / 2)

    def test_wrap_is_idempotent(self):
        rng = np.random.default_rng(3)
        for a in rng.uniform(-20, 20, size=200):
            w = normalize_angle(a)
            assert -np.pi < w <= np.pi
            assert normalize_angle(w) == pytest.approx(w, abs=1e-12)
            assert np.cos(w) == pytest.approx(np.cos(a), abs=1e-9)
            assert np.sin(w) == pytest.approx(np.sin(a), abs=1e-9)


class TestArcPoints:
    def test_zero_curvature_is_exactly_collinear(self):
        start = np.array([3.0, -2.0])
        pts, end_h = arc_points(start, 0.7, 0.0, 63.0)
        assert end_h == pytest.approx(0.7)
        d = np.diff(pts, axis=0)
        cross = d[:-1, 0] * d[1:, 1] - d[:-1, 1] * d[1:, 0]
        assert np.all(np.abs(cross) <= 1e-9)
        assert polyline_length(pts) == pytest.approx(63.0, abs=1e-9)

    def test_quarter_circle_endpoint(self):
        # Left quarter turn of radius 10 from the origin heading +x.
        r = 10.0
        pts, end_h = arc_points(np.zeros(2), 0.0, 1.0 / r, r * np.pi / 2, step=0.1)
        assert end_h == pytest.approx(np.pi / 2)
        np.testing.assert_allclose(pts[-1], [r, r], atol=1e-9)
        # Every sample stays on the circle centered at (0, r).
        radii = np.linalg.norm(pts - np.array([0.0, r]), axis=1)
        np.testing.assert_allclose(radii, r, atol=1e-9)

    def test_right_turn_mirrors_left_turn(self):
        left, hl = arc_points(np.zeros(2), 0.0, 0.05, 30.0)
        right, hr = arc_points(np.zeros(2), 0.0, -0.05, 30.0)
        np.testing.assert_allclose(left[:, 0], right[:, 0], atol=1e-9)
        np.testing.assert_allclose(left[:, 1], -right[:, 1], atol=1e-9)
        assert hl == pytest.approx(-hr)

    def test_symmetric_s_bump_returns_to_heading(self):
        # right alpha, left 2*alpha, right alpha: net heading change is zero
        # and the displacement is purely along the original heading.
        r, alpha = 20.0, np.deg2rad(33.0)
        k = 1.0 / r
        p1, h1 = arc_points(np.zeros(2), 0.0, -k, r * alpha, step=0.05)
        p2, h2 = arc_points(p1[-1], h1, k, 2 * r * alpha, step=0.05)
        p3, h3 = arc_points(p2[-1], h2, -k, r * alpha, step=0.05)
        assert h3 == pytest.approx(0.0, abs=1e-12)
        np.testing.assert_allclose(p3[-1], [4 * r * np.sin(alpha), 0.0], atol=1e-9)

    def test_rejects_nonpositive_length(self):
        with pytest.raises(ValueError):
            arc_points(np.zeros(2), 0.0, 0.0, 0.0)


class TestRaySegments:
    def test_head_on_hit(self):
        segs = np.array([[10.0, -1.0, 10.0, 1.0]])
        dirs = np.array([[1.0, 0.0]])
        d = ray_segments_distance(np.zeros(2), dirs, segs)
        assert d[0] == pytest.approx(10.0)

    def test_miss_and_behind(self):
        segs = np.array([[10.0, 2.0, 10.0, 4.0],    # off to the side
                         [-5.0, -1.0, -5.0, 1.0]])  # behind the origin
        d = ray_segments_distance(np.zeros(2), np.array([[1.0, 0.0]]), segs)
        assert np.isinf(d[0])

    def test_parallel_ray_misses(self):
        segs = np.array([[0.0, 1.0, 10.0, 1.0]])
        d = ray_segments_distance(np.zeros(2), np.array([[1.0, 0.0]]), segs)
        assert np.isinf(d[0])

    def test_nearest_of_several(self):
        segs = np.array([[4.0, -1.0, 4.0, 1.0],
                         [7.0, -1.0, 7.0, 1.0]])
        d = ray_segments_distance(np.zeros(2), np.array([[1.0, 0.0]]), segs)
        assert d[0] == pytest.approx(4.0)

    def test_diagonal_ray(self):
        segs = np.array([[0.0, 5.0, 10.0, 5.0]])
        u = np.array([[np.cos(np.pi / 4), np.sin(np.pi / 4)]])
        d = ray_segments_distance(np.zeros(2), u, segs)
        assert d[0] == pytest.approx(5.0 * np.sqrt(2.0))

    def test_matches_scalar_reference(self):
        # Brute-force parametric solve per ray/segment pair.
        rng = np.random.default_rng(11)
        origin = rng.uniform(-2, 2, size=2)
        angles = rng.uniform(-np.pi, np.pi, size=40)
        dirs = np.stack([np.cos(angles), np.sin(angles)], axis=1)
        segs = rng.uniform(-20, 20, size=(25, 4))
        got = ray_segments_distance(origin, dirs, segs)
        for i, u in enumerate(dirs):
            best = np.inf
            for ax, ay, bx, by in segs:
                a = np.array([ax, ay])
                v = np.array([bx - ax, by - ay])
                den = u[0] * v[1] - u[1] * v[0]
                if abs(den) < 1e-12:
                    continue
                ao = a - origin
                t = (ao[0] * v[1] - ao[1] * v[0]) / den
                w = (ao[0] * u[1] - ao[1] * u[0]) / den
                if t >= 0 and 0 <= w <= 1:
                    best = min(best, t)
            assert got[i] == pytest.approx(best, abs=1e-9)


class TestRayCircles:
    def test_head_on(self):
        d = ray_circles_distance(np.zeros(2), np.array([[1.0, 0.0]]),
                                 np.array([[5.0, 0.0]]), np.array([1.0]))
        assert d[0] == pytest.approx(4.0)

    def test_from_inside_hits_far_wall(self):
        d = ray_circles_distance(np.array([5.0, 0.0]), np.array([[1.0, 0.0]]),
                                 np.array([[5.5, 0.0]]), np.array([1.0]))
        assert d[0] == pytest.approx(1.5)

    def test_tangent_and_miss(self):
        centers = np.array([[5.0, 1.0]])
        graze = ray_circles_distance(np.zeros(2), np.array([[1.0, 0.0]]),
                                     centers, np.array([1.0]))
        assert graze[0] == pytest.approx(5.0, abs=1e-6)
        miss = ray_circles_distance(np.zeros(2), np.array([[1.0, 0.0]]),
                                    centers, np.array([0.5]))
        assert np.isinf(miss[0])

    def test_behind_misses(self):
        d = ray_circles_distance(np.zeros(2), np.array([[1.0, 0.0]]),
                                 np.array([[-5.0, 0.0]]), np.array([1.0]))
        assert np.isinf(d[0])


class TestRectangles:
    def test_corner_layout(self):
        c = rectangle_corners(0.0, 0.0, 0.0, 4.0, 2.0)
        np.testing.assert_allclose(c, [[2, 1], [-2, 1], [-2, -1], [2, -1]])

    def test_rotated_corners(self):
        c = rectangle_corners(1.0, 1.0, np.pi / 2, 4.0, 2.0)
        np.testing.assert_allclose(c, [[0, 3], [0, -1], [2, -1], [2, 3]], atol=1e-12)

    def test_overlap_cases(self):
        a = rectangle_corners(0, 0, 0, 4, 2)
        assert rectangles_overlap(a, rectangle_corners(1, 0, 0, 4, 2))
        assert not rectangles_overlap(a, rectangle_corners(10, 0, 0, 4, 2))
        # Diagonal box whose corner pokes into a straight one.
        assert rectangles_overlap(a, rectangle_corners(3, 0, np.pi / 4, 4, 2))
        # Same diagonal box moved away.
        assert not rectangles_overlap(a, rectangle_corners(6, 0, np.pi / 4, 4, 2))

    def test_overlap_is_symmetric(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            a = rectangle_corners(*rng.uniform(-3, 3, 2), rng.uniform(-np.pi, np.pi),
                                  rng.uniform(1, 5), rng.uniform(1, 3))
            b = rectangle_corners(*rng.uniform(-3, 3, 2), rng.uniform(-np.pi, np.pi),
                                  rng.uniform(1, 5), rng.uniform(1, 3))
            assert rectangles_overlap(a, b) == rectangles_overlap(b, a)


class TestCircleRect:
    def test_center_inside(self):
        from hildrive.geom import circle_rect_overlap
        assert circle_rect_overlap(np.array([0.1, 0.2]), 0.5,
                                   np.zeros(2), 0.0, 4.0, 2.0)

    def test_edge_touch_and_clear(self):
        from hildrive.geom import circle_rect_overlap
        # Circle just touching the front face of a 4x2 box.
        assert circle_rect_overlap(np.array([2.5, 0.0]), 0.5,
                                   np.zeros(2), 0.0, 4.0, 2.0)
        assert not circle_rect_overlap(np.array([2.6, 0.0]), 0.5,
                                       np.zeros(2), 0.0, 4.0, 2.0)

    def test_rotated_box(self):
        from hildrive.geom import circle_rect_overlap
        # Box rotated 90 degrees: half-length now spans y.
        assert circle_rect_overlap(np.array([0.0, 2.3]), 0.5,
                                   np.zeros(2), np.pi / 2, 4.0, 2.0)
        assert not circle_rect_overlap(np.array([2.3, 0.0]), 0.5,
                                       np.zeros(2), np.pi / 2, 4.0, 2.0)


class TestPolylineHelpers:
    def test_segments_of_polyline(self):
        pts = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 2.0]])
        segs = segments_of_polyline(pts)
        np.testing.assert_allclose(segs, [[0, 0, 1, 0], [1, 0, 1, 2]])

    def test_polyline_length(self):
        pts = np.array([[0.0, 0.0], [3.0, 0.0], [3.0, 4.0]])
        assert polyline_length(pts) == pytest.approx(7.0)
