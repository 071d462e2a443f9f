"""Linear Kalman filter over [x, y, vx, vy, ax, ay, yaw, yaw_rate].

Motion model: constant acceleration driven by white jerk on each planar
axis, constant yaw rate driven by white angular acceleration. Measurements
are position and yaw. Course over ground and sideslip are computed from the
filtered velocity and yaw rather than estimated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

import numpy as np

from .errors import EmptyTrack, NonFiniteMeasurement, NonMonotonicTime, NonPositiveDt
from .geometry import wrap_angle

IX, IY, IVX, IVY, IAX, IAY, IYAW, IYR = range(8)
H = np.zeros((3, 8))
H[0, IX] = H[1, IY] = H[2, IYAW] = 1.0


@dataclass(frozen=True)
class FilterConfig:
    q_jerk: float = 5.0
    q_yaw_acc: float = 1.0
    r_pos: float = (1.0 * 0.0334) ** 2
    r_yaw: float = math.radians(2.0) ** 2
    v_min_cog: float = 0.5
    init_cov_scale: float = 100.0

    def __post_init__(self) -> None:
        for f in fields(self):
            if not getattr(self, f.name) > 0:
                raise ValueError(f"FilterConfig.{f.name} must be positive")

    @classmethod
    def from_dict(cls, d: dict | None) -> FilterConfig:
        d = dict(d or {})
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown filter config keys: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in d.items()})


@dataclass(frozen=True)
class VehicleState:
    x: np.ndarray  # (8,)
    cov: np.ndarray  # (8, 8)
    t: float = 0.0
    frame: int = 0
    nis: float | None = None  # normalised innovation squared of the last update

    @property
    def pos(self) -> np.ndarray:
        return self.x[[IX, IY]]

    @property
    def vel(self) -> np.ndarray:
        return self.x[[IVX, IVY]]

    @property
    def acc(self) -> np.ndarray:
        return self.x[[IAX, IAY]]

    @property
    def yaw(self) -> float:
        return float(self.x[IYAW])

    @property
    def yaw_rate(self) -> float:
        return float(self.x[IYR])


@dataclass(frozen=True)
class DerivedState:
    cog: float
    sideslip: float
    speed: float
    valid_sideslip: bool


def transition(dt: float) -> np.ndarray:
    f = np.eye(8)
    for p, v, a in ((IX, IVX, IAX), (IY, IVY, IAY)):
        f[p, v] = dt
        f[p, a] = 0.5 * dt * dt
        f[v, a] = dt
    f[IYAW, IYR] = dt
    return f


def process_noise(dt: float, cfg: FilterConfig) -> np.ndarray:
    q = np.zeros((8, 8))
    d2, d3, d4, d5 = dt**2, dt**3, dt**4, dt**5
    blk = cfg.q_jerk * np.array(
        [
            [d5 / 20.0, d4 / 8.0, d3 / 6.0],
            [d4 / 8.0, d3 / 3.0, d2 / 2.0],
            [d3 / 6.0, d2 / 2.0, dt],
        ]
    )
    for idx in ((IX, IVX, IAX), (IY, IVY, IAY)):
        q[np.ix_(idx, idx)] = blk
    q[np.ix_((IYAW, IYR), (IYAW, IYR))] = cfg.q_yaw_acc * np.array(
        [[d3 / 3.0, d2 / 2.0], [d2 / 2.0, dt]]
    )
    return q


def _sym(p: np.ndarray) -> np.ndarray:
    return 0.5 * (p + p.T)


def predict(state: VehicleState, dt: float, cfg: FilterConfig) -> VehicleState:
    if not dt > 0.0:
        raise NonPositiveDt(f"dt must be > 0, got {dt}")
    f = transition(dt)
    x = f @ state.x
    x[IYAW] = wrap_angle(x[IYAW])
    p = _sym(f @ state.cov @ f.T + process_noise(dt, cfg))
    return VehicleState(x, p, state.t + dt, state.frame + 1)


def derive(state: VehicleState, cfg: FilterConfig) -> DerivedState:
    vx, vy = float(state.x[IVX]), float(state.x[IVY])
    speed = math.hypot(vx, vy)
    cog = math.atan2(vy, vx)
    valid = speed > cfg.v_min_cog
    beta = wrap_angle(cog - state.yaw) if valid else 0.0
    return DerivedState(cog=cog, sideslip=beta, speed=speed, valid_sideslip=valid)


def resolve_heading(z_yaw: float, state: VehicleState, cfg: FilterConfig) -> float:
    """Choose between the two headings a box direction admits.

    Above ``v_min_cog`` the course over ground is the reference, below it
    the current yaw estimate.
    """
    d = derive(state, cfg)
    ref = d.cog if d.valid_sideslip else state.yaw
    if abs(wrap_angle(z_yaw - ref)) > math.pi / 2.0:
        return wrap_angle(z_yaw + math.pi)
    return z_yaw


def update(state: VehicleState, z, cfg: FilterConfig) -> VehicleState:
    """Joseph-form update with position and yaw.

    ``z`` is a `Measurement` or a sequence ``(x, y, yaw)``.
    """
    if hasattr(z, "center"):
        zv = np.array([z.center[0], z.center[1], z.yaw], dtype=float)
    else:
        zv = np.asarray(z, dtype=float).copy()
    if zv.shape != (3,) or not np.all(np.isfinite(zv)):
        raise NonFiniteMeasurement(f"measurement must be 3 finite values, got {zv}")
    zv[2] = resolve_heading(zv[2], state, cfg)

    r = np.diag([cfg.r_pos, cfg.r_pos, cfg.r_yaw])
    innov = zv - H @ state.x
    innov[2] = wrap_angle(innov[2])
    s = H @ state.cov @ H.T + r
    k = np.linalg.solve(s, H @ state.cov).T
    x = state.x + k @ innov
    x[IYAW] = wrap_angle(x[IYAW])
    ikh = np.eye(8) - k @ H
    p = _sym(ikh @ state.cov @ ikh.T + k @ r @ k.T)
    nis = float(innov @ np.linalg.solve(s, innov))
    return VehicleState(x, p, state.t, state.frame, nis)


def initial_state(z, t: float, cfg: FilterConfig, frame: int = 0) -> VehicleState:
    x = np.zeros(8)
    if hasattr(z, "center"):
        x[IX], x[IY], x[IYAW] = z.center[0], z.center[1], wrap_angle(z.yaw)
    else:
        x[IX], x[IY], x[IYAW] = z[0], z[1], wrap_angle(z[2])
    s = cfg.init_cov_scale
    p = np.diag([cfg.r_pos, cfg.r_pos, s, s, s, s, cfg.r_yaw, s])
    return VehicleState(x, p, t, frame)


def _align_heading(state: VehicleState, cfg: FilterConfig) -> VehicleState:
    d = derive(state, cfg)
    if d.valid_sideslip and abs(wrap_angle(d.cog - state.yaw)) > math.pi / 2.0:
        x = state.x.copy()
        x[IYAW] = wrap_angle(x[IYAW] + math.pi)
        return replace(state, x=x)
    return state


def run_track(
    times,
    measurements,
    cfg: FilterConfig | None = None,
    frames=None,
) -> list[tuple[VehicleState, DerivedState]]:
    """Filter a track. ``measurements[i]`` may be None for a missed frame,
    which produces a predict-only step at ``times[i]``."""
    cfg = cfg or FilterConfig()
    times = [float(t) for t in times]
    measurements = list(measurements)
    if len(times) != len(measurements):
        raise ValueError("times and measurements differ in length")
    if frames is None:
        frames = [getattr(m, "frame", i) if m is not None else i for i, m in enumerate(measurements)]
    if not any(m is not None for m in measurements):
        raise EmptyTrack("track has no measurements")
    for a, b in zip(times, times[1:]):
        if not b > a:
            raise NonMonotonicTime(f"timestamps not strictly increasing at t={b}")

    first = next(i for i, m in enumerate(measurements) if m is not None)
    state = initial_state(measurements[first], times[first], cfg, frames[first])
    out = [(state, derive(state, cfg))]
    aligned = False
    for i in range(first + 1, len(times)):
        state = predict(state, times[i] - times[i - 1], cfg)
        state = replace(state, t=times[i], frame=frames[i])
        if not aligned and derive(state, cfg).valid_sideslip:
            state = _align_heading(state, cfg)
            aligned = True
        if measurements[i] is not None:
            state = update(state, measurements[i], cfg)
        out.append((state, derive(state, cfg)))
    return out
