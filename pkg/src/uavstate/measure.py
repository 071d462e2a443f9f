"""Rotated bounding box -> Kalman measurement (centre, yaw).

Corner heights are unknown in general because the box sides can be
projections of different vehicle parts. Only the corner nearest the
principal point is known to lie at chassis clearance, so that corner is
relief-corrected and the box is rebuilt from it using the known vehicle
dimensions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CornerAboveCamera, DegenerateBox, ZeroSideLength
from .geometry import wrap_angle

QUALITY_OK = "ok"
QUALITY_NOT_RECTANGULAR = "not_rectangular"


@dataclass(frozen=True)
class CameraGeometry:
    resolution: tuple[float, float] = (1920.0, 1080.0)
    hover_altitude: float = 50.0
    alpha: float = 0.0334

    def __post_init__(self) -> None:
        if min(self.resolution) <= 0 or self.hover_altitude <= 0 or self.alpha <= 0:
            raise ValueError("camera geometry values must be positive")

    @property
    def principal_point(self) -> np.ndarray:
        return np.array([self.resolution[0] / 2.0, self.resolution[1] / 2.0])

    @property
    def diagonal(self) -> float:
        return math.hypot(*self.resolution)


@dataclass(frozen=True)
class VehicleDims:
    width: float = 1.80
    length: float = 4.50
    clearance: float = 0.15

    def __post_init__(self) -> None:
        if not 0.0 < self.width < self.length:
            raise ValueError("require 0 < width < length")
        if not 0.05 <= self.clearance <= 0.5:
            raise ValueError("clearance outside plausibility gate [0.05, 0.5] m")


@dataclass(frozen=True)
class RotatedBBox:
    corners: np.ndarray  # (4, 2) pixels, any order

    def __post_init__(self) -> None:
        c = np.asarray(self.corners, dtype=float)
        if c.shape != (4, 2):
            raise DegenerateBox(f"expected 4 corners, got shape {c.shape}")
        object.__setattr__(self, "corners", c)
        d = np.linalg.norm(c[:, None, :] - c[None, :, :], axis=-1)
        if np.any(d[np.triu_indices(4, 1)] == 0.0):
            raise DegenerateBox("two box corners coincide")

    def is_rectangular(self, tolerance: float = 0.2) -> bool:
        """Convex, with opposite sides agreeing within ``tolerance``."""
        ring = _convex_order(self.corners)
        if ring is None:
            return False
        sides = np.linalg.norm(np.roll(ring, -1, axis=0) - ring, axis=1)
        for a, b in ((sides[0], sides[2]), (sides[1], sides[3])):
            if abs(a - b) > tolerance * max(a, b):
                return False
        return True


@dataclass(frozen=True)
class Measurement:
    center: tuple[float, float]
    yaw: float
    frame: int
    est_width: float
    est_length: float
    quality: str = QUALITY_OK


@dataclass(frozen=True)
class SideOrder:
    s: tuple[float, float, float]  # ascending distances from the anchor
    k: int  # width corner (shortest side)
    j: int  # length corner
    diag: int


def _convex_order(c: np.ndarray) -> np.ndarray | None:
    centre = c.mean(axis=0)
    ang = np.arctan2(c[:, 1] - centre[1], c[:, 0] - centre[0])
    ring = c[np.argsort(ang)]
    e = np.roll(ring, -1, axis=0) - ring
    cross = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
    if np.all(cross > 0) or np.all(cross < 0):
        return ring
    return None


def side_order(corners, anchor: int = 0) -> SideOrder:
    """Distances from the anchor corner to the other three, ascending.

    Ties are broken by corner index.
    """
    c = np.asarray(corners, dtype=float)
    others = [i for i in range(4) if i != anchor]
    dist = [float(np.linalg.norm(c[i] - c[anchor])) for i in others]
    order = sorted(range(3), key=lambda m: (dist[m], others[m]))
    s = tuple(dist[m] for m in order)
    if s[0] == 0.0:
        raise DegenerateBox("anchor coincides with another corner")
    return SideOrder(s=s, k=others[order[0]], j=others[order[1]], diag=others[order[2]])


def raw_center(corners_ltp) -> np.ndarray:
    c = np.asarray(corners_ltp, dtype=float)
    return (c.max(axis=0) + c.min(axis=0)) / 2.0


def raw_yaw(corners_ltp, j: int, anchor: int = 0) -> float:
    c = np.asarray(corners_ltp, dtype=float)
    d = c[j] - c[anchor]
    if d[0] == 0.0 and d[1] == 0.0:
        raise DegenerateBox("length corner coincides with anchor")
    return wrap_angle(math.atan2(d[1], d[0]))


def relief_shift(corner, h_corner: float, cam: CameraGeometry) -> np.ndarray:
    """Relief-corrected pixel of a corner known to sit ``h_corner`` above ground."""
    if h_corner >= cam.hover_altitude:
        raise CornerAboveCamera(f"corner height {h_corner} m >= altitude {cam.hover_altitude} m")
    if h_corner < 0.0:
        raise ValueError("corner height must be >= 0")
    b = np.asarray(corner, dtype=float)
    seen = b - cam.principal_point
    return b - seen * (h_corner / cam.hover_altitude)


def corner_error_bound(h_corner: float, cam: CameraGeometry, zeta: float = 1.0) -> float:
    """Ground error of a relief-corrected corner under +-zeta px detection error.

    With ``zeta = 1`` this is (sqrt(2) + h/h_uav) * alpha.
    """
    return (math.sqrt(2.0) * zeta + h_corner / cam.hover_altitude) * cam.alpha


def scale_error_bound(corner, cam: CameraGeometry, h_min: float = 0.11, h_max: float = 1.85) -> float:
    seen = np.asarray(corner, dtype=float) - cam.principal_point
    return float(np.hypot(*seen)) * cam.alpha * (h_max - h_min) / (2.0 * cam.hover_altitude)


def rescale_box(anchor, j_corner, k_corner, dims: VehicleDims, alpha: float) -> np.ndarray:
    """Centre of the box rebuilt from the anchor and the known dimensions.

    Works in any frame where ``alpha`` converts the corner vectors to meters.
    The side vectors are normalised by their own length, so the rebuilt sides
    measure exactly ``dims.length`` and ``dims.width``.
    """
    b1 = np.asarray(anchor, dtype=float)
    vj = np.asarray(j_corner, dtype=float) - b1
    vk = np.asarray(k_corner, dtype=float) - b1
    nj, nk = float(np.linalg.norm(vj)), float(np.linalg.norm(vk))
    if nj == 0.0 or nk == 0.0:
        raise ZeroSideLength("box side of zero length")
    bj = dims.length / (nj * alpha) * vj + b1
    bk = dims.width / (nk * alpha) * vk + b1
    return (bj + bk) / 2.0


def nearest_to_principal(corners, cam: CameraGeometry) -> int:
    c = np.asarray(corners, dtype=float)
    d = np.linalg.norm(c - cam.principal_point, axis=1)
    return int(np.argmin(d))  # argmin keeps the lowest index on ties


def make_measurement(
    box: RotatedBBox,
    mapping,
    cam: CameraGeometry,
    dims: VehicleDims | None = None,
    frame: int = 0,
    transform=None,
    relief: bool = True,
    rect_tolerance: float = 0.2,
) -> Measurement:
    """Measurement vector for one detection.

    ``transform`` (a stabilisation `SimilarityTransform`, cur->ref) is applied
    after relief correction: the principal point belongs to the frame the
    detection was made in, the mapping to the reference frame.
    """
    from .stabilize import apply_transform

    dims = dims or VehicleDims()
    corners = box.corners
    anchor = nearest_to_principal(corners, cam)
    order = side_order(corners, anchor)
    rectangular = box.is_rectangular(rect_tolerance)

    corrected = corners.copy()
    if relief:
        corrected[anchor] = relief_shift(corners[anchor], dims.clearance, cam)
    if transform is not None:
        corrected = apply_transform(transform, corrected)
    ltp = mapping.to_ltp(corrected)

    yaw = raw_yaw(ltp, order.j, anchor)
    est_w, est_l = order.s[0] * mapping.alpha, order.s[1] * mapping.alpha
    if rectangular:
        center = rescale_box(ltp[anchor], ltp[order.j], ltp[order.k], dims, 1.0)
        quality = QUALITY_OK
    else:
        center = raw_center(ltp)
        quality = QUALITY_NOT_RECTANGULAR
    return Measurement(
        center=(float(center[0]), float(center[1])),
        yaw=yaw,
        frame=frame,
        est_width=est_w,
        est_length=est_l,
        quality=quality,
    )
