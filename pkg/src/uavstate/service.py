"""HTTP service over the pipeline. Row models mirror the CSV file columns."""

from __future__ import annotations

import math

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from . import __version__, bench, io, pipeline, sim
from .config import PipelineConfig
from .errors import UavStateError
from .georef import FrameMapping, GroundControlPoint
from .stabilize import SimilarityTransform
from .sync import LedEvent

app = FastAPI(title="uavstate", version=__version__)


class _Row(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GcpRow(_Row):
    id: str
    x_ltp_m: float
    y_ltp_m: float
    x_pcf_px: float
    y_pcf_px: float


class MatchRow(_Row):
    frame: int
    x_ref_px: float
    y_ref_px: float
    x_cur_px: float
    y_cur_px: float


class StabRow(_Row):
    frame: int
    scale: float
    rotation_deg: float
    tx_px: float
    ty_px: float
    inliers: int
    rms_px: float


class DetectionRow(_Row):
    frame: int
    x1: float
    y1: float
    x2: float
    y2: float
    x3: float
    y3: float
    x4: float
    y4: float


class LedRow(_Row):
    frame: int
    utc_second: int


class StateRow(_Row):
    t_utc_s: float
    frame: int
    x_m: float
    y_m: float
    vx_mps: float
    vy_mps: float
    ax_mps2: float
    ay_mps2: float
    yaw_deg: float
    yawrate_degps: float
    cog_deg: float
    sideslip_deg: float
    sideslip_valid: bool


class MeasurementRow(_Row):
    frame: int
    x_m: float
    y_m: float
    yaw_deg: float
    width_m: float
    length_m: float
    quality: str


class ReferenceRow(_Row):
    t_utc_s: float
    x_m: float
    y_m: float
    v_mps: float
    a_mps2: float
    yaw_deg: float
    sideslip_deg: float
    cog_deg: float


class MappingModel(_Row):
    alpha_m_per_px: float = Field(gt=0)
    theta_offset_deg: float
    linear_offset_m: tuple[float, float]
    source_gcp_ids: tuple[str, str] = ("", "")


class CalibrateRequest(_Row):
    gcps: list[GcpRow]
    config: PipelineConfig = PipelineConfig()


class CalibrateResponse(BaseModel):
    mapping: MappingModel
    budget: dict
    warnings: list[str]


class StabilizeRequest(_Row):
    matches: list[MatchRow]
    config: PipelineConfig = PipelineConfig()
    seed: int | None = None


class StabilizeResponse(BaseModel):
    frames: list[StabRow]


class TrackRequest(_Row):
    detections: list[DetectionRow]
    mapping: MappingModel
    stab: list[StabRow] | None = None
    led_events: list[LedRow] | None = None
    config: PipelineConfig = PipelineConfig()


class TrackResponse(BaseModel):
    states: list[StateRow]
    measurements: list[MeasurementRow]
    timebase: dict | None = None


class ErrorsRequest(_Row):
    config: PipelineConfig = PipelineConfig()


class BenchRequest(_Row):
    states: list[StateRow]
    reference: list[ReferenceRow]


class BenchResponse(BaseModel):
    report: dict
    plotdata: dict[str, list[tuple[float, float]]]


class SimulateRequest(_Row):
    scenario: dict = Field(default_factory=dict)
    seed: int | None = None


class SimulateResponse(BaseModel):
    gcps: list[GcpRow]
    matches: list[MatchRow]
    detections: list[DetectionRow]
    led_events: list[LedRow]
    reference: list[ReferenceRow]
    config: dict


def _rows(header, tuples, model):
    return [model(**dict(zip(header, t))) for t in tuples]


def _fail(e: Exception):
    raise HTTPException(status_code=422, detail=str(e)) from e


@app.get("/health")
def health() -> dict:
    return {"status": "ok", "version": __version__}


@app.post("/calibrate", response_model=CalibrateResponse)
def calibrate(req: CalibrateRequest):
    gcps = [GroundControlPoint(r.id, (r.x_ltp_m, r.y_ltp_m), (r.x_pcf_px, r.y_pcf_px)) for r in req.gcps]
    try:
        cal = pipeline.calibrate(gcps, req.config)
    except (UavStateError, ValueError) as e:
        _fail(e)
    return {"mapping": cal.mapping.to_json(), "budget": cal.budget, "warnings": cal.warnings}


@app.post("/stabilize", response_model=StabilizeResponse)
def stabilize(req: StabilizeRequest):
    by_frame: dict[int, list] = {}
    for r in req.matches:
        by_frame.setdefault(r.frame, []).append((r.x_ref_px, r.y_ref_px, r.x_cur_px, r.y_cur_px))
    m = {f: (np.array(v)[:, :2], np.array(v)[:, 2:]) for f, v in by_frame.items()}
    try:
        frames = pipeline.stabilize_frames(m, req.config, req.seed)
    except UavStateError as e:
        _fail(e)
    return {"frames": _rows(io.STAB_HEADER, [s.row() for s in frames], StabRow)}


@app.post("/track", response_model=TrackResponse)
def track(req: TrackRequest):
    dets = [(r.frame, [[r.x1, r.y1], [r.x2, r.y2], [r.x3, r.y3], [r.x4, r.y4]]) for r in req.detections]
    mapping = FrameMapping.from_json(req.mapping.model_dump())
    stab = None
    if req.stab is not None:
        stab = {
            r.frame: SimilarityTransform(r.scale, math.radians(r.rotation_deg), (r.tx_px, r.ty_px))
            for r in req.stab
        }
    events = [LedEvent(r.frame, r.utc_second) for r in req.led_events] if req.led_events else None
    try:
        res = pipeline.track(dets, mapping, req.config, stab, events)
    except UavStateError as e:
        _fail(e)
    return {
        "states": _rows(io.STATE_HEADER, res.state_rows(), StateRow),
        "measurements": _rows(io.MEASUREMENTS_HEADER, [io.measurement_row(m) for m in res.measurements], MeasurementRow),
        "timebase": res.timebase.to_json() if res.timebase else None,
    }


@app.post("/errors")
def errors(req: ErrorsRequest) -> dict:
    return pipeline.errors_report(req.config)


@app.post("/bench", response_model=BenchResponse)
def bench_route(req: BenchRequest):
    est = pipeline.estimates_from_rows([r.model_dump() for r in req.states])
    ref = [
        bench.ReferenceSample(
            r.t_utc_s, (r.x_m, r.y_m), r.v_mps, r.a_mps2,
            math.radians(r.yaw_deg), math.radians(r.sideslip_deg), math.radians(r.cog_deg),
        )
        for r in req.reference
    ]
    try:
        report = pipeline.run_bench(est, ref)
    except UavStateError as e:
        _fail(e)
    return {
        "report": report.to_json(),
        "plotdata": {k: v.cumulative for k, v in report.stats.items()},
    }


@app.post("/simulate", response_model=SimulateResponse)
def simulate(req: SimulateRequest):
    data = dict(req.scenario)
    if req.seed is not None:
        data["seed"] = req.seed
    try:
        scn = sim.make_scenario(data)
    except (UavStateError, ValidationError) as e:
        _fail(e)
    out = sim.generate(scn)
    k = out
    return {
        "gcps": _rows(io.GCP_HEADER, [(g.id, *g.ltp, *g.pcf) for g in k.gcps], GcpRow),
        "matches": [
            MatchRow(frame=f, x_ref_px=r[0], y_ref_px=r[1], x_cur_px=c[0], y_cur_px=c[1])
            for f, ref, cur in k.matches
            for r, c in zip(ref, cur)
        ],
        "detections": _rows(io.DETECTIONS_HEADER, [(f, *np.ravel(c)) for f, c in k.detections], DetectionRow),
        "led_events": [LedRow(frame=e.frame, utc_second=e.utc_second) for e in k.led_events],
        "reference": [
            ReferenceRow(
                t_utc_s=s.t, x_m=s.pos[0], y_m=s.pos[1], v_mps=s.v_over_ground, a_mps2=s.a_over_ground,
                yaw_deg=math.degrees(s.yaw), sideslip_deg=math.degrees(s.sideslip), cog_deg=math.degrees(s.cog),
            )
            for s in k.reference
        ],
        "config": pipeline.config_for_scenario(scn),
    }
