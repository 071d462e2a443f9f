"""Frame index -> UTC time from a filmed PPS LED."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientEvents, NonPositiveFps, ResidualTooLarge


@dataclass(frozen=True)
class LedEvent:
    frame: int
    utc_second: int


@dataclass(frozen=True)
class TimeBase:
    slope: float
    offset: float
    residual_max: float
    fps_nominal: float
    phase_shift: float = 0.0  # frames added to every query, see fit_timebase

    def frame_to_utc(self, frame):
        return self.offset + self.slope * (np.asarray(frame, dtype=float) + self.phase_shift)

    def to_json(self) -> dict:
        return {
            "slope_s_per_frame": self.slope,
            "offset_utc_s": self.offset,
            "residual_max_s": self.residual_max,
            "eta_tau_s": 1.0 / self.fps_nominal,
            "phase_shift_frames": self.phase_shift,
        }


@dataclass(frozen=True)
class SyncErrors:
    eta_tau: float
    eta_pos: float
    eta_vel: float


def fit_timebase(
    events, fps_nominal: float, slope_tolerance: float = 0.05, phase_shift: float = 0.0
) -> TimeBase:
    """Least-squares line through (frame, utc_second).

    Every residual must stay below one frame period, otherwise an LED frame
    was probably mis-detected.

    The LED frame is the first one exposed after the second starts, so its
    true time lies up to one period after ``utc_second``. With a steady frame
    rate that lag is the same for every event and the fit cannot average it
    out; ``phase_shift = 0.5`` centres it, halving the worst-case error.
    """
    if not fps_nominal > 0:
        raise NonPositiveFps(f"fps must be > 0, got {fps_nominal}")
    events = sorted(events, key=lambda e: e.frame)
    if len(events) < 2:
        raise InsufficientEvents(f"need at least 2 LED events, got {len(events)}")
    f = np.array([e.frame for e in events], dtype=float)
    s = np.array([e.utc_second for e in events], dtype=float)
    if np.any(np.diff(s) <= 0) or np.any(np.diff(f) <= 0):
        raise ValueError("LED events must have strictly increasing frame and utc_second")
    slope, offset = np.polyfit(f - f[0], s, 1)
    offset -= slope * f[0]
    res = s - (offset + slope * f)
    rmax = float(np.max(np.abs(res)))
    period = 1.0 / fps_nominal
    if rmax > period:
        raise ResidualTooLarge(f"LED residual {rmax:.4f} s exceeds one frame ({period:.4f} s)")
    if abs(slope - period) >= slope_tolerance * period:
        raise ResidualTooLarge(f"frame period {slope:.6f} s incompatible with {fps_nominal} fps")
    if not 0.0 <= phase_shift < 1.0:
        raise ValueError("phase_shift must be in [0, 1) frames")
    return TimeBase(float(slope), float(offset), rmax, float(fps_nominal), float(phase_shift))


def frame_to_utc(tb: TimeBase, frame):
    return tb.frame_to_utc(frame)


def sync_error_bounds(fps: float, speed: float = 0.0, accel: float = 0.0) -> SyncErrors:
    if not fps > 0:
        raise NonPositiveFps(f"fps must be > 0, got {fps}")
    eta_tau = 1.0 / fps
    return SyncErrors(eta_tau, abs(speed) * eta_tau, abs(accel) * eta_tau)
