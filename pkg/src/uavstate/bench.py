"""Benchmark an estimated trajectory against a reference trace."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import LengthMismatch, OutOfSpan
from .geometry import angle_diff_abs, wrap_angle

VARIABLES = ("position", "velocity", "acceleration", "yaw", "sideslip", "cog")
UNITS = {
    "position": "m",
    "velocity": "m/s",
    "acceleration": "m/s^2",
    "yaw": "deg",
    "sideslip": "deg",
    "cog": "deg",
}
_ANGLES = ("yaw", "sideslip", "cog")


@dataclass(frozen=True)
class ReferenceSample:
    t: float
    pos: tuple[float, float]
    v_over_ground: float
    a_over_ground: float
    yaw: float
    sideslip: float
    cog: float


@dataclass(frozen=True)
class EstimateSample:
    t: float
    pos: tuple[float, float]
    vel: tuple[float, float]
    acc: tuple[float, float]
    yaw: float
    cog: float
    sideslip: float
    sideslip_valid: bool = True


@dataclass
class VariableStats:
    mean_abs: float
    rmse: float
    max: float
    n: int
    cumulative: list[tuple[float, float]] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"mean_abs": self.mean_abs, "rmse": self.rmse, "max": self.max, "n": self.n}


@dataclass
class BenchReport:
    stats: dict[str, VariableStats]

    def to_json(self) -> dict:
        return {
            name: dict(s.to_json(), unit=UNITS[name]) for name, s in self.stats.items()
        }


def _check_times(t: np.ndarray) -> None:
    if np.any(np.diff(t) <= 0):
        raise ValueError("reference times must be strictly increasing")


def resample_reference(trace, times) -> list[ReferenceSample]:
    """Linear interpolation of every field; angles along the shortest arc."""
    trace = list(trace)
    t = np.array([s.t for s in trace], dtype=float)
    _check_times(t)
    q = np.asarray(times, dtype=float)
    if q.size and (q.min() < t[0] or q.max() > t[-1]):
        raise OutOfSpan(f"query times [{q.min()}, {q.max()}] outside trace [{t[0]}, {t[-1]}]")
    x = np.interp(q, t, [s.pos[0] for s in trace])
    y = np.interp(q, t, [s.pos[1] for s in trace])
    v = np.interp(q, t, [s.v_over_ground for s in trace])
    a = np.interp(q, t, [s.a_over_ground for s in trace])
    # angles: step from the left neighbour along the shortest arc, so a query
    # that hits a sample time returns that sample bit for bit
    i = np.clip(np.searchsorted(t, q, side="right") - 1, 0, max(t.size - 2, 0))
    frac = np.zeros_like(q) if t.size == 1 else (q - t[i]) / (t[i + 1] - t[i])
    ang = {}
    for name in _ANGLES:
        raw = np.array([getattr(s, name) for s in trace], dtype=float)
        if t.size == 1:
            ang[name] = np.full_like(q, raw[0])
            continue
        val = raw[i] + frac * wrap_angle(raw[i + 1] - raw[i])
        outside = (val <= -math.pi) | (val > math.pi)
        ang[name] = np.where(outside, wrap_angle(val), val)
    return [
        ReferenceSample(
            float(q[i]),
            (float(x[i]), float(y[i])),
            float(v[i]),
            float(a[i]),
            float(ang["yaw"][i]),
            float(ang["sideslip"][i]),
            float(ang["cog"][i]),
        )
        for i in range(q.size)
    ]


def cumulative_table(errors) -> list[tuple[float, float]]:
    """(error value, fraction of samples <= value) at every distinct value."""
    e = np.sort(np.asarray(errors, dtype=float))
    if e.size == 0:
        return []
    vals, idx = np.unique(e, return_index=True)
    counts = np.append(idx[1:], e.size)
    return [(float(v), float(c) / e.size) for v, c in zip(vals, counts)]


def _stats(err: np.ndarray) -> VariableStats:
    if err.size == 0:
        return VariableStats(math.nan, math.nan, math.nan, 0, [])
    return VariableStats(
        float(np.mean(err)),
        float(np.sqrt(np.mean(err**2))),
        float(np.max(err)),
        int(err.size),
        cumulative_table(err),
    )


def error_series(est, ref) -> dict[str, np.ndarray]:
    est, ref = list(est), list(ref)
    if len(est) != len(ref):
        raise LengthMismatch(f"{len(est)} estimates vs {len(ref)} reference samples")
    pe = np.array([e.pos for e in est], dtype=float).reshape(-1, 2)
    pr = np.array([r.pos for r in ref], dtype=float).reshape(-1, 2)
    ve = np.linalg.norm(np.array([e.vel for e in est], dtype=float).reshape(-1, 2), axis=1)
    ae = np.linalg.norm(np.array([e.acc for e in est], dtype=float).reshape(-1, 2), axis=1)
    valid = np.array([e.sideslip_valid for e in est], dtype=bool)

    def ang(name: str, mask=None) -> np.ndarray:
        a = np.array([getattr(e, name) for e in est], dtype=float)
        b = np.array([getattr(r, name) for r in ref], dtype=float)
        d = np.degrees(angle_diff_abs(a, b))
        return d if mask is None else d[mask]

    return {
        "position": np.linalg.norm(pe - pr, axis=1),
        "velocity": np.abs(ve - np.array([r.v_over_ground for r in ref])),
        "acceleration": np.abs(ae - np.array([r.a_over_ground for r in ref])),
        "yaw": ang("yaw"),
        "sideslip": ang("sideslip", valid),
        "cog": ang("cog"),
    }


def compare(est, ref) -> BenchReport:
    series = error_series(est, ref)
    return BenchReport({name: _stats(series[name]) for name in VARIABLES})


def format_dat(table) -> str:
    lines = ["error percent"]
    lines += [f"{e:.6f} {p:.6f}" for e, p in table]
    return "\n".join(lines) + "\n"


def emit_plotdata(report: BenchReport, out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for name in VARIABLES:
        path = out / f"{name}.dat"
        path.write_text(format_dat(report.stats[name].cumulative), encoding="utf-8")
        paths.append(path)
    return paths
