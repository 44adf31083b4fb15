"""2D geometry primitives: angles, arcs, ray casting, rectangle overlap."""

from __future__ import annotations

import numpy as np


def normalize_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    r = np.remainder(a, 2.0 * np.pi)
    if r > np.pi:
        r -= 2.0 * np.pi
    return float(r)


def unit(heading: float) -> np.ndarray:
    return np.array([np.cos(heading), np.sin(heading)])


def left_normal(heading: float) -> np.ndarray:
    return np.array([-np.sin(heading), np.cos(heading)])


def cross2(a: np.ndarray, b: np.ndarray) -> float:
    return float(a[0] * b[1] - a[1] * b[0])


def arc_points(start: np.ndarray, heading: float, curvature: float,
               arclength: float, step: float = 2.0) -> tuple[np.ndarray, float]:
    """Sample a constant-curvature path; curvature 0 is an exact straight.

    Returns (points (K,2), end heading). Positive curvature turns left.
    """
    if arclength <= 0:
        raise ValueError("arclength must be positive")
    n = max(2, int(np.ceil(arclength / step)) + 1)
    s = np.linspace(0.0, arclength, n)
    if abs(curvature) < 1e-12:
        d = unit(heading)
        pts = start[None, :] + s[:, None] * d[None, :]
        return pts, heading
    r = 1.0 / curvature
    center = start + r * left_normal(heading)
    a0 = np.arctan2(start[1] - center[1], start[0] - center[0])
    angles = a0 + s * curvature
    pts = center[None, :] + np.abs(r) * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    return pts, normalize_angle(heading + arclength * curvature)


def polyline_length(points: np.ndarray) -> float:
    return float(np.sum(np.linalg.norm(np.diff(points, axis=0), axis=1)))


def rectangle_corners(cx: float, cy: float, heading: float,
                      length: float, width: float) -> np.ndarray:
    """Corners of an oriented box centered at (cx, cy), CCW order (4,2)."""
    d = unit(heading)
    n = left_normal(heading)
    hl, hw = length / 2.0, width / 2.0
    c = np.array([cx, cy])
    return np.array([
        c + hl * d + hw * n,
        c - hl * d + hw * n,
        c - hl * d - hw * n,
        c + hl * d - hw * n,
    ])


def rectangles_overlap(corners_a: np.ndarray, corners_b: np.ndarray) -> bool:
    """Separating-axis test for two convex quads given as (4,2) corners."""
    for quad_pair in ((corners_a, corners_b), (corners_b, corners_a)):
        ref, other = quad_pair
        edges = np.roll(ref, -1, axis=0) - ref
        for e in edges:
            axis = np.array([-e[1], e[0]])
            pa = ref @ axis
            pb = other @ axis
            if pa.max() < pb.min() or pb.max() < pa.min():
                return False
    return True


def circle_rect_overlap(center: np.ndarray, radius: float,
                        rect_center: np.ndarray, rect_heading: float,
                        length: float, width: float) -> bool:
    """True when a circle touches an oriented box (closest-point test)."""
    rel = np.asarray(center, dtype=np.float64) - np.asarray(rect_center, dtype=np.float64)
    c, s = np.cos(rect_heading), np.sin(rect_heading)
    lx = c * rel[0] + s * rel[1]
    ly = -s * rel[0] + c * rel[1]
    qx = np.clip(lx, -length / 2.0, length / 2.0)
    qy = np.clip(ly, -width / 2.0, width / 2.0)
    return (lx - qx) ** 2 + (ly - qy) ** 2 <= radius ** 2


def segments_of_polyline(points: np.ndarray) -> np.ndarray:
    """(K-1, 4) array of [ax, ay, bx, by] segments."""
    return np.concatenate([points[:-1], points[1:]], axis=1)


def ray_segments_distance(origin: np.ndarray, dirs: np.ndarray,
                          segments: np.ndarray) -> np.ndarray:
    """First-hit distance of each ray against a segment soup.

    dirs (R,2) must be unit vectors; segments (S,4). Returns (R,) distances,
    inf where a ray hits nothing.
    """
    r = dirs.shape[0]
    if segments.shape[0] == 0:
        return np.full(r, np.inf)
    a = segments[:, 0:2]
    v = segments[:, 2:4] - a
    ao = a - origin[None, :]
    denom = dirs[:, 0:1] * v[None, :, 1] - dirs[:, 1:2] * v[None, :, 0]
    c_av = ao[:, 0] * v[:, 1] - ao[:, 1] * v[:, 0]
    c_au = ao[None, :, 0] * dirs[:, 1:2] - ao[None, :, 1] * dirs[:, 0:1]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = c_av[None, :] / denom
        u = c_au / denom
    valid = (np.abs(denom) > 1e-12) & (t >= 0.0) & (u >= 0.0) & (u <= 1.0)
    t = np.where(valid, t, np.inf)
    return t.min(axis=1)


def ray_circles_distance(origin: np.ndarray, dirs: np.ndarray,
                         centers: np.ndarray, radii: np.ndarray) -> np.ndarray:
    """First-hit distance of each ray against circles; inf on miss."""
    r = dirs.shape[0]
    if centers.shape[0] == 0:
        return np.full(r, np.inf)
    oc = centers - origin[None, :]
    proj = dirs @ oc.T
    d2 = np.sum(oc * oc, axis=1)[None, :] - proj * proj
    disc = radii[None, :] ** 2 - d2
    with np.errstate(invalid="ignore"):
        root = np.sqrt(np.maximum(disc, 0.0))
    t_near = proj - root
    t_far = proj + root
    t = np.where(t_near >= 0.0, t_near, np.where(t_far >= 0.0, t_far, np.inf))
    t = np.where(disc >= 0.0, t, np.inf)
    return t.min(axis=1)
