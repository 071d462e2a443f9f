"""Small planar helpers: rotations, angle wrapping, circular statistics."""

from __future__ import annotations

import math

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap_angle(a):
    """Wrap an angle (scalar or array, radians) into (-pi, pi]."""
    w = np.pi - np.mod(np.pi - np.asarray(a, dtype=float), TWO_PI)
    if np.ndim(w) == 0:
        return float(w)
    return w


def rot(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def circular_mean(angles, weights=None) -> float:
    a = np.asarray(angles, dtype=float)
    w = np.ones_like(a) if weights is None else np.asarray(weights, dtype=float)
    return wrap_angle(math.atan2(float(np.sum(w * np.sin(a))), float(np.sum(w * np.cos(a)))))


def angle_diff_abs(a, b):
    """|a - b| on the circle, in [0, pi]."""
    return np.abs(wrap_angle(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)))


def min_area_rect(points) -> np.ndarray:
    """Corners (4x2, counter-clockwise) of the minimum-area enclosing rectangle."""
    from shapely.geometry import MultiPoint

    rect = MultiPoint([tuple(p) for p in np.asarray(points, dtype=float)]).minimum_rotated_rectangle
    xy = np.asarray(rect.exterior.coords)[:-1]
    if xy.shape[0] != 4:
        raise ValueError("point set is degenerate; no enclosing rectangle")
    # shapely orients exteriors clockwise for this constructor
    if _signed_area(xy) < 0:
        xy = xy[::-1]
    return xy


def _signed_area(xy: np.ndarray) -> float:
    x, y = xy[:, 0], xy[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))
