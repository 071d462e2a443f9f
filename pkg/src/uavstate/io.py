"""CSV and JSON file formats."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .bench import ReferenceSample
from .errors import SchemaError
from .georef import GroundControlPoint
from .measure import Measurement
from .stabilize import RobustFitReport, SimilarityTransform
from .sync import LedEvent

GCP_HEADER = ["id", "x_ltp_m", "y_ltp_m", "x_pcf_px", "y_pcf_px"]
MATCHES_HEADER = ["frame", "x_ref_px", "y_ref_px", "x_cur_px", "y_cur_px"]
STAB_HEADER = ["frame", "scale", "rotation_deg", "tx_px", "ty_px", "inliers", "rms_px"]
DETECTIONS_HEADER = ["frame", "x1", "y1", "x2", "y2", "x3", "y3", "x4", "y4"]
MEASUREMENTS_HEADER = ["frame", "x_m", "y_m", "yaw_deg", "width_m", "length_m", "quality"]
STATE_HEADER = [
    "t_utc_s", "frame", "x_m", "y_m", "vx_mps", "vy_mps", "ax_mps2", "ay_mps2",
    "yaw_deg", "yawrate_degps", "cog_deg", "sideslip_deg", "sideslip_valid",
]
LED_HEADER = ["frame", "utc_second"]
REFERENCE_HEADER = ["t_utc_s", "x_m", "y_m", "v_mps", "a_mps2", "yaw_deg", "sideslip_deg", "cog_deg"]


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if x == 0.0:
            return "0"  # no negative zero
        return repr(x)
    return str(x)


def read_table(path, header: list[str], types: dict[str, type]) -> list[dict]:
    """Rows of a headed CSV with typed columns. Extra columns are an error."""
    path = Path(path)
    try:
        fh = path.open(newline="", encoding="utf-8")
    except OSError as e:
        raise SchemaError(path, None, None, f"cannot open: {e.strerror}") from e
    with fh:
        reader = csv.reader(fh)
        try:
            got = next(reader)
        except StopIteration:
            raise SchemaError(path, 1, None, "empty file, expected a header") from None
        got = [h.strip() for h in got]
        if got != header:
            raise SchemaError(path, 1, None, f"header {got} != expected {header}")
        rows = []
        for lineno, raw in enumerate(reader, start=2):
            if not raw or all(not c.strip() for c in raw):
                continue
            if len(raw) != len(header):
                raise SchemaError(path, lineno, None, f"{len(raw)} fields, expected {len(header)}")
            row = {}
            for name, cell in zip(header, raw):
                row[name] = _convert(path, lineno, name, cell.strip(), types.get(name, float))
            rows.append(row)
    return rows


def _convert(path, lineno, name, cell, typ):
    try:
        if typ is int:
            v = float(cell)
            if v != int(v):
                raise ValueError
            return int(v)
        if typ is bool:
            if cell.lower() in ("1", "true"):
                return True
            if cell.lower() in ("0", "false"):
                return False
            raise ValueError
        if typ is float:
            v = float(cell)
            if not math.isfinite(v):
                raise ValueError
            return v
        return typ(cell)
    except ValueError:
        raise SchemaError(path, lineno, name, f"cannot parse {cell!r} as {typ.__name__}") from None


def write_table(path, header: list[str], rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])
    return path


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def read_json(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise SchemaError(path, None, None, f"cannot open: {e.strerror}") from e
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError(path, e.lineno, str(e.colno), e.msg) from None


# --- typed readers / writers ------------------------------------------------

def read_gcps(path) -> list[GroundControlPoint]:
    rows = read_table(path, GCP_HEADER, {"id": str})
    return [
        GroundControlPoint(r["id"], (r["x_ltp_m"], r["y_ltp_m"]), (r["x_pcf_px"], r["y_pcf_px"]))
        for r in rows
    ]


def write_gcps(path, gcps) -> Path:
    return write_table(path, GCP_HEADER, [(g.id, *g.ltp, *g.pcf) for g in gcps])


def read_matches(path) -> dict[int, tuple[np.ndarray, np.ndarray]]:
    rows = read_table(path, MATCHES_HEADER, {"frame": int})
    by_frame: dict[int, list] = {}
    for r in rows:
        by_frame.setdefault(r["frame"], []).append(
            (r["x_ref_px"], r["y_ref_px"], r["x_cur_px"], r["y_cur_px"])
        )
    return {
        f: (np.array(v)[:, :2], np.array(v)[:, 2:]) for f, v in sorted(by_frame.items())
    }


def write_matches(path, matches) -> Path:
    rows = []
    for f, ref, cur in matches:
        for (xr, yr), (xc, yc) in zip(ref, cur):
            rows.append((f, xr, yr, xc, yc))
    return write_table(path, MATCHES_HEADER, rows)


def read_stab(path) -> dict[int, SimilarityTransform]:
    rows = read_table(path, STAB_HEADER, {"frame": int, "inliers": int})
    return {
        r["frame"]: SimilarityTransform(r["scale"], math.radians(r["rotation_deg"]), (r["tx_px"], r["ty_px"]))
        for r in rows
    }


def stab_row(frame: int, t: SimilarityTransform, rep: RobustFitReport) -> tuple:
    return (frame, t.scale, math.degrees(t.rotation), t.translation[0], t.translation[1],
            rep.inlier_count, rep.residual_rms)


def read_detections(path) -> list[tuple[int, np.ndarray]]:
    rows = read_table(path, DETECTIONS_HEADER, {"frame": int})
    out = []
    for r in rows:
        c = np.array([[r[f"x{i}"], r[f"y{i}"]] for i in range(1, 5)])
        out.append((r["frame"], c))
    return out


def write_detections(path, detections) -> Path:
    return write_table(
        path, DETECTIONS_HEADER, [(f, *np.asarray(c, dtype=float).ravel()) for f, c in detections]
    )


def measurement_row(m: Measurement) -> tuple:
    return (m.frame, m.center[0], m.center[1], math.degrees(m.yaw), m.est_width, m.est_length, m.quality)


def read_led_events(path) -> list[LedEvent]:
    rows = read_table(path, LED_HEADER, {"frame": int, "utc_second": int})
    return [LedEvent(r["frame"], r["utc_second"]) for r in rows]


def write_led_events(path, events) -> Path:
    return write_table(path, LED_HEADER, [(e.frame, e.utc_second) for e in events])


def read_reference(path) -> list[ReferenceSample]:
    rows = read_table(path, REFERENCE_HEADER, {})
    return [
        ReferenceSample(
            r["t_utc_s"], (r["x_m"], r["y_m"]), r["v_mps"], r["a_mps2"],
            math.radians(r["yaw_deg"]), math.radians(r["sideslip_deg"]), math.radians(r["cog_deg"]),
        )
        for r in rows
    ]


def write_reference(path, samples) -> Path:
    return write_table(
        path,
        REFERENCE_HEADER,
        [
            (s.t, s.pos[0], s.pos[1], s.v_over_ground, s.a_over_ground,
             math.degrees(s.yaw), math.degrees(s.sideslip), math.degrees(s.cog))
            for s in samples
        ],
    )


def read_state(path) -> list[dict]:
    return read_table(path, STATE_HEADER, {"frame": int, "sideslip_valid": bool})
