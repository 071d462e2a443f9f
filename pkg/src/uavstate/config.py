"""Pipeline configuration (JSON). Every key is optional; unknown keys are rejected."""

from __future__ import annotations

import math
from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .errors import SchemaError
from .kalman import FilterConfig
from .measure import CameraGeometry, VehicleDims
from .sim import ALPHA_AT_50M, alpha_for_altitude
from .stabilize import RobustFitConfig


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class CameraSection(_Strict):
    resolution: tuple[float, float] = (1920.0, 1080.0)
    hover_altitude_m: float = Field(50.0, gt=0)
    # Only used where no mapping.json is given; defaults to 0.0334 m/px scaled by altitude.
    alpha_m_per_px: float | None = Field(None, gt=0)

    def geometry(self, alpha: float | None = None) -> CameraGeometry:
        a = alpha or self.alpha_m_per_px or alpha_for_altitude(self.hover_altitude_m, ALPHA_AT_50M)
        return CameraGeometry(self.resolution, self.hover_altitude_m, a)


class VehicleSection(_Strict):
    width_m: float = 1.80
    length_m: float = 4.50
    clearance_m: float = 0.15

    def dims(self) -> VehicleDims:
        return VehicleDims(self.width_m, self.length_m, self.clearance_m)


class FilterSection(_Strict):
    q_jerk: float = Field(5.0, gt=0)
    q_yaw_acc: float = Field(1.0, gt=0)
    r_pos: float | None = Field(None, gt=0)  # default (zeta * alpha)^2
    r_yaw: float = Field(math.radians(2.0) ** 2, gt=0)
    v_min_cog: float = Field(0.5, gt=0)
    init_cov_scale: float = Field(100.0, gt=0)

    def build(self, zeta: float, alpha: float) -> FilterConfig:
        r_pos = self.r_pos if self.r_pos is not None else max(zeta * alpha, 1e-6) ** 2
        return FilterConfig(self.q_jerk, self.q_yaw_acc, r_pos, self.r_yaw, self.v_min_cog, self.init_cov_scale)


class StabilizationSection(_Strict):
    sigma_px: float = Field(1.0, gt=0)
    inlier_sigmas: float = Field(3.0, gt=0)
    gamma: float = Field(0.5, gt=0, lt=1)
    confidence: float = Field(0.99, gt=0, lt=1)
    max_iterations: int = Field(2000, gt=0)
    min_inlier_ratio: float = Field(0.3, ge=0, le=1)
    scale_gate: tuple[float, float] = (0.5, 2.0)
    seed: int = 0
    reference_frame: int | None = None  # default: first frame of matches.csv

    def build(self, resolution, seed: int | None = None) -> RobustFitConfig:
        return RobustFitConfig(
            sigma=self.sigma_px,
            inlier_sigmas=self.inlier_sigmas,
            gamma=self.gamma,
            outlier_area=float(resolution[0] * resolution[1]),
            confidence=self.confidence,
            max_iterations=self.max_iterations,
            min_inlier_ratio=self.min_inlier_ratio,
            scale_gate=self.scale_gate,
            seed=self.seed if seed is None else seed,
        )


class SyncSection(_Strict):
    fps: float = Field(50.0, gt=0)
    epoch_utc_s: float = 0.0  # frame 0 time when no LED events are supplied
    # frames added to LED-fitted times; 0.5 centres the one-frame detection lag
    led_phase_shift: float = Field(0.5, ge=0, lt=1)


class GcpSection(_Strict):
    min_separation_fraction: float = Field(0.25, ge=0, le=1)


class BudgetSection(_Strict):
    speed_mps: float = Field(50.0 / 3.6, ge=0)
    accel_mps2: float = Field(5.0, ge=0)
    h_min_m: float = Field(0.11, ge=0)
    h_max_m: float = Field(1.85, ge=0)


class PathsSection(_Strict):
    gcps: Path | None = None
    matches: Path | None = None
    detections: Path | None = None
    mapping: Path | None = None
    stab: Path | None = None
    led_events: Path | None = None
    reference: Path | None = None
    state: Path | None = None


class PipelineConfig(_Strict):
    camera: CameraSection = CameraSection()
    zeta_px: float = Field(1.0, ge=0)
    vehicle: VehicleSection = VehicleSection()
    filter: FilterSection = FilterSection()
    stabilization: StabilizationSection = StabilizationSection()
    sync: SyncSection = SyncSection()
    gcp: GcpSection = GcpSection()
    budget: BudgetSection = BudgetSection()
    paths: PathsSection = PathsSection()
    pcf_y_down: bool = False  # pixel files hold raw image rows (y grows downward)
    relief_correction: bool = True
    rect_tolerance: float = Field(0.2, gt=0)

    @field_validator("zeta_px")
    @classmethod
    def _finite(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("must be finite")
        return v


def load_config(path=None) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    from .io import read_json

    data = read_json(path)
    try:
        return PipelineConfig.model_validate(data)
    except ValidationError as e:
        err = e.errors()[0]
        loc = ".".join(str(p) for p in err["loc"])
        raise SchemaError(path, None, loc, err["msg"]) from None
