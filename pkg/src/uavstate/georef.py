"""Pixel-frame to local-tangent-plane mapping from ground control points.

A mapping is the triple (alpha, theta_offset, linear_offset): meters per
pixel, the orientation offset of the image axes relative to east/north, and
a metric translation. A pixel ``p`` maps to the ground as

    ltp = R(theta_offset).T @ (p * alpha) - linear_offset

The error helpers quantify how an ambiguity of ``zeta`` pixels per axis in
locating a GCP degrades each of the three parameters.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CoincidentGCPs, InsufficientGCPs, NonPositiveDistance, ZeroBaseline
from .geometry import circular_mean, rot, wrap_angle

# pairs closer than this are refused rather than producing a huge alpha
MIN_PAIR_SEPARATION_PX = 1e-6


@dataclass(frozen=True)
class GroundControlPoint:
    id: str
    ltp: tuple[float, float]
    pcf: tuple[float, float]

    def __post_init__(self) -> None:
        object.__setattr__(self, "ltp", (float(self.ltp[0]), float(self.ltp[1])))
        object.__setattr__(self, "pcf", (float(self.pcf[0]), float(self.pcf[1])))

    def check_bounds(self, resolution: tuple[float, float]) -> None:
        x, y = self.pcf
        if not (0.0 <= x <= resolution[0] and 0.0 <= y <= resolution[1]):
            raise ValueError(f"GCP {self.id!r} pixel {self.pcf} outside image {resolution}")


@dataclass(frozen=True)
class FrameMapping:
    alpha: float
    theta_offset: float
    linear_offset: tuple[float, float]
    source_gcp_ids: tuple[str, str] = ("", "")

    def __post_init__(self) -> None:
        if not (self.alpha > 0.0 and math.isfinite(self.alpha)):
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        object.__setattr__(self, "theta_offset", wrap_angle(self.theta_offset))
        object.__setattr__(
            self, "linear_offset", (float(self.linear_offset[0]), float(self.linear_offset[1]))
        )

    def to_ltp(self, pts) -> np.ndarray:
        """Vectorised `map_pixel` for an (..., 2) array of pixels."""
        p = np.asarray(pts, dtype=float)
        # row-vector form of R.T @ v is v @ R
        return (p * self.alpha) @ rot(self.theta_offset) - np.asarray(self.linear_offset)

    def to_pcf(self, pts) -> np.ndarray:
        """Analytic inverse of `to_ltp`."""
        q = np.asarray(pts, dtype=float) + np.asarray(self.linear_offset)
        return (q @ rot(self.theta_offset).T) / self.alpha

    def to_json(self) -> dict:
        return {
            "alpha_m_per_px": self.alpha,
            "theta_offset_deg": math.degrees(self.theta_offset),
            "linear_offset_m": list(self.linear_offset),
            "source_gcp_ids": list(self.source_gcp_ids),
        }

    @classmethod
    def from_json(cls, d: dict) -> FrameMapping:
        return cls(
            alpha=float(d["alpha_m_per_px"]),
            theta_offset=math.radians(float(d["theta_offset_deg"])),
            linear_offset=tuple(d["linear_offset_m"]),
            source_gcp_ids=tuple(d.get("source_gcp_ids", ("", ""))),
        )


@dataclass(frozen=True)
class MappingErrorBudget:
    eta_alpha: float
    eta_theta: float
    eta_offset: tuple[float, float]
    alpha: float
    zeta: float = 1.0
    gcp_pair: tuple[str, str] = ("", "")
    corner: tuple[float, float] = (1920.0, 1080.0)
    extras: dict = field(default_factory=dict)

    def eta_point(self, b) -> float:
        return rotation_point_error(b, self.eta_theta, self.alpha)

    def to_json(self) -> dict:
        out = {
            "eta_alpha": self.eta_alpha,
            "eta_theta_deg": math.degrees(self.eta_theta),
            "eta_point_m_at_corner": self.eta_point(self.corner),
            "eta_offset_m": list(self.eta_offset),
            "zeta_px": self.zeta,
            "gcp_pair_used": list(self.gcp_pair),
        }
        out.update(self.extras)
        return out


def _by_id(gcps, gid: str) -> GroundControlPoint:
    for g in gcps:
        if g.id == gid:
            return g
    raise KeyError(f"no GCP with id {gid!r}")


def fit_pair(g1: GroundControlPoint, g2: GroundControlPoint) -> FrameMapping:
    """Exact two-point fit anchored on ``g1``."""
    l1, l2 = np.asarray(g1.ltp), np.asarray(g2.ltp)
    p1, p2 = np.asarray(g1.pcf), np.asarray(g2.pcf)
    d_pcf = float(np.linalg.norm(p2 - p1))
    d_ltp = float(np.linalg.norm(l2 - l1))
    if d_pcf < MIN_PAIR_SEPARATION_PX or d_ltp == 0.0:
        raise CoincidentGCPs(f"GCPs {g1.id!r} and {g2.id!r} coincide")
    alpha = d_ltp / d_pcf
    gp1, gp2 = p1 * alpha, p2 * alpha
    theta_img = math.atan2(gp2[1] - gp1[1], gp2[0] - gp1[0])
    theta_ltp = math.atan2(l2[1] - l1[1], l2[0] - l1[0])
    theta = wrap_angle(theta_img - theta_ltp)
    gpp1 = rot(theta).T @ gp1
    xi_d = gpp1 - l1
    return FrameMapping(alpha, theta, (xi_d[0], xi_d[1]), (g1.id, g2.id))


def fit_mapping(gcps, pair: tuple[str, str] | None = None) -> FrameMapping:
    gcps = list(gcps)
    if len(gcps) < 2:
        raise InsufficientGCPs(f"need at least 2 GCPs, got {len(gcps)}")
    if pair is None:
        g1, g2 = gcps[0], gcps[1]
    else:
        g1, g2 = _by_id(gcps, pair[0]), _by_id(gcps, pair[1])
    return fit_pair(g1, g2)


def map_pixel(m: FrameMapping, p) -> np.ndarray:
    return m.to_ltp(p)


def similarity_fraction(distance: float, zeta: float = 1.0) -> float:
    """Worst-case ratio between the seen and true spatial resolution."""
    if not distance > 0.0:
        raise NonPositiveDistance(f"GCP pixel distance must be > 0, got {distance}")
    if zeta < 0.0:
        raise ValueError("zeta must be >= 0")
    return distance / (distance + 2.0 * math.sqrt(2.0 * zeta * zeta))


def orientation_error_bound(delta, zeta: float = 1.0) -> float:
    """Worst orientation error when both GCPs are off by +-zeta per axis.

    The extreme directions of the perturbed baseline are reached at the
    corners of the +-2*zeta box, so enumerating the four sign combinations
    gives the exact supremum.
    """
    dx, dy = float(delta[0]), float(delta[1])
    if dx == 0.0 and dy == 0.0:
        raise ZeroBaseline("GCP baseline has zero length")
    base = math.atan2(dy, dx)
    worst = 0.0
    for sx, sy in itertools.product((1.0, -1.0), repeat=2):
        a = math.atan2(dy + sy * 2.0 * zeta, dx + sx * 2.0 * zeta)
        worst = max(worst, abs(wrap_angle(a - base)))
    return worst


def rotation_point_error(b, eta_theta: float, alpha: float) -> float:
    """Ground displacement of pixel ``b`` caused by a rotation error."""
    if not alpha > 0.0:
        raise ValueError("alpha must be > 0")
    b = np.asarray(b, dtype=float)
    return float(np.linalg.norm(rot(eta_theta) @ b - b)) * alpha


def offset_error(g, eta_alpha: float, eta_theta: float, alpha: float) -> np.ndarray:
    if not alpha > 0.0:
        raise ValueError("alpha must be > 0")
    if not 0.0 < eta_alpha <= 1.0:
        raise ValueError("eta_alpha must lie in (0, 1]")
    g = np.asarray(g, dtype=float)
    return (rot(eta_theta).T @ (g * eta_alpha) - g) * alpha


def mapping_error_bound(
    p, anchor_pcf, baseline, zeta: float, alpha: float
) -> float:
    """Worst-case ground error of a two-GCP mapping evaluated at pixel ``p``.

    Combines the scale, rotation and anchor-offset terms. The scale term
    covers both directions (seen baseline longer or shorter than true),
    which is wider than ``1 - similarity_fraction``.
    """
    d = float(np.linalg.norm(baseline))
    e_max = 2.0 * math.sqrt(2.0) * zeta
    if d <= e_max:
        return math.inf
    rho_max = d / (d - e_max)
    scale_dev = rho_max - 1.0
    eta_theta = orientation_error_bound(baseline, zeta)
    lever = np.asarray(p, dtype=float) - np.asarray(anchor_pcf, dtype=float)
    r = float(np.linalg.norm(lever))
    return (
        scale_dev * r * alpha
        + rho_max * rotation_point_error(lever, eta_theta, alpha)
        + rho_max * math.sqrt(2.0) * zeta * alpha
    )


def error_budget(
    gcps,
    pair: tuple[str, str],
    zeta: float = 1.0,
    alpha: float | None = None,
    corner: tuple[float, float] = (1920.0, 1080.0),
) -> MappingErrorBudget:
    g1, g2 = _by_id(gcps, pair[0]), _by_id(gcps, pair[1])
    delta = np.asarray(g2.pcf) - np.asarray(g1.pcf)
    if alpha is None:
        alpha = fit_pair(g1, g2).alpha
    eta_a = similarity_fraction(float(np.linalg.norm(delta)), zeta)
    eta_t = orientation_error_bound(delta, zeta)
    off = offset_error(g1.pcf, eta_a, eta_t, alpha)
    return MappingErrorBudget(
        eta_alpha=eta_a,
        eta_theta=eta_t,
        eta_offset=(float(off[0]), float(off[1])),
        alpha=alpha,
        zeta=zeta,
        gcp_pair=(g1.id, g2.id),
        corner=(float(corner[0]), float(corner[1])),
    )


def pair_separation(g1: GroundControlPoint, g2: GroundControlPoint) -> float:
    return float(np.hypot(g2.pcf[0] - g1.pcf[0], g2.pcf[1] - g1.pcf[1]))


def widest_pair(gcps) -> tuple[str, str]:
    gcps = list(gcps)
    if len(gcps) < 2:
        raise InsufficientGCPs(f"need at least 2 GCPs, got {len(gcps)}")
    a, b = max(itertools.combinations(gcps, 2), key=lambda ab: pair_separation(*ab))
    return a.id, b.id


def compensate_gcps(gcps, min_separation_px: float = 0.0) -> FrameMapping:
    """Average the pairwise fits of all sufficiently separated GCP pairs.

    alpha and the linear offset are arithmetic means, the orientation a
    circular mean. If no pair reaches ``min_separation_px`` the widest pair
    alone is used.
    """
    gcps = list(gcps)
    if len(gcps) < 2:
        raise InsufficientGCPs(f"need at least 2 GCPs, got {len(gcps)}")
    pairs = [
        (a, b)
        for a, b in itertools.combinations(gcps, 2)
        if pair_separation(a, b) >= max(min_separation_px, MIN_PAIR_SEPARATION_PX)
    ]
    widest = widest_pair(gcps)
    if not pairs:
        pairs = [(_by_id(gcps, widest[0]), _by_id(gcps, widest[1]))]
    fits = [fit_pair(a, b) for a, b in pairs]
    if len(fits) == 1:
        return fits[0]
    alpha = float(np.mean([f.alpha for f in fits]))
    theta = circular_mean([f.theta_offset for f in fits])
    xi = np.mean([f.linear_offset for f in fits], axis=0)
    return FrameMapping(alpha, theta, (xi[0], xi[1]), widest)
