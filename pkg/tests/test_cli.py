import json
import math

import numpy as np
import pytest
from click.testing import CliRunner

from uavstate import io, pipeline, sim
from uavstate.cli import main
from uavstate.config import PipelineConfig
from uavstate.georef import GroundControlPoint


@pytest.fixture(scope="module")
def scene(tmp_path_factory):
    d = tmp_path_factory.mktemp("scene")
    (d / "scn.json").write_text(json.dumps({"duration": 3.0, "maneuver": "circle"}))
    r = CliRunner().invoke(main, ["simulate", str(d / "scn.json"), "--out", str(d), "--seed", "3"])
    assert r.exit_code == 0, r.output
    return d


def run(*args):
    return CliRunner().invoke(main, [str(a) for a in args])


def test_simulate_files(scene):
    for name in ("gcps.csv", "matches.csv", "detections.csv", "led_events.csv", "reference.csv",
                 "truth.csv", "scenario.json", "config.json"):
        assert (scene / name).exists()
    assert (scene / "detections.csv").read_text().splitlines()[0] == ",".join(io.DETECTIONS_HEADER)


def test_full_chain(scene, tmp_path):
    cfg = scene / "config.json"
    assert run("calibrate", scene / "gcps.csv", "--config", cfg, "--out", tmp_path).exit_code == 0
    mapping = json.loads((tmp_path / "mapping.json").read_text())
    assert set(mapping) == {"alpha_m_per_px", "theta_offset_deg", "linear_offset_m", "source_gcp_ids"}
    assert run("stabilize", scene / "matches.csv", "--config", cfg, "--out", tmp_path).exit_code == 0
    r = run("track", scene / "detections.csv", "--mapping", tmp_path / "mapping.json", "--stab", tmp_path / "stab.csv",
            "--led", scene / "led_events.csv", "--config", cfg, "--out", tmp_path)
    assert r.exit_code == 0, r.output
    rows = io.read_state(tmp_path / "state.csv")
    assert len(rows) == 150
    assert set(json.loads((tmp_path / "timebase.json").read_text())) == {
        "slope_s_per_frame", "offset_utc_s", "residual_max_s", "eta_tau_s", "phase_shift_frames"}
    r = run("bench", tmp_path / "state.csv", scene / "reference.csv", "--out", tmp_path)
    assert r.exit_code == 0, r.output
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["position"]["mean_abs"] < 0.3
    assert (tmp_path / "position.dat").read_text().startswith("error percent\n")


def test_idempotent(scene, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert run("stabilize", scene / "matches.csv", "--out", d, "--seed", 9).exit_code == 0
        assert run("simulate", scene / "scn.json", "--out", d / "sim", "--seed", 5).exit_code == 0
    assert (a / "stab.csv").read_bytes() == (b / "stab.csv").read_bytes()
    for name in ("detections.csv", "matches.csv", "reference.csv"):
        assert (a / "sim" / name).read_bytes() == (b / "sim" / name).read_bytes()


def test_errors_command_reproduces_worked_examples():
    r = run("errors")
    assert r.exit_code == 0
    rep = json.loads(r.output)
    near = rep["mapping"]["gcps_one_pixel_apart"]
    far = rep["mapping"]["gcps_on_image_diagonal"]
    assert near["eta_alpha"] == pytest.approx(0.2612, abs=5e-4)
    assert near["eta_theta_deg"] == pytest.approx(116.57, abs=0.1)
    assert far["eta_alpha"] == pytest.approx(0.99872, abs=1e-4)
    assert rep["bounding_box"]["scale_error_m_at_image_corner"] == pytest.approx(0.64, abs=0.02)
    assert rep["sync"]["eta_tau_s"] == 0.02
    assert "0.25" in rep["sync"]["note"]


def test_two_gcp_calibration(tmp_path):
    io.write_gcps(tmp_path / "g.csv", [GroundControlPoint("a", (0, 0), (100, 100)), GroundControlPoint("b", (50, 0), (1600, 100))])
    r = run("calibrate", tmp_path / "g.csv", "--out", tmp_path)
    assert r.exit_code == 0
    m = json.loads((tmp_path / "mapping.json").read_text())
    assert m["alpha_m_per_px"] == pytest.approx(50 / 1500)
    assert m["source_gcp_ids"] == ["a", "b"]


def test_near_gcps_warn(tmp_path):
    io.write_gcps(tmp_path / "g.csv", [GroundControlPoint("a", (0, 0), (100, 100)), GroundControlPoint("b", (5, 0), (250, 100))])
    r = run("calibrate", tmp_path / "g.csv", "--out", tmp_path)
    assert r.exit_code == 0 and "warning" in r.stderr
    assert run("calibrate", tmp_path / "g.csv", "--out", tmp_path, "--strict").exit_code == 3


def test_empty_detections_with_mapping(scene, tmp_path):
    run("calibrate", scene / "gcps.csv", "--out", tmp_path)
    (tmp_path / "d.csv").write_text(",".join(io.DETECTIONS_HEADER) + "\n")
    r = run("track", tmp_path / "d.csv", "--mapping", tmp_path / "mapping.json", "--out", tmp_path)
    assert r.exit_code == 1
    assert "no detections" in r.stderr


def test_schema_error_message(tmp_path):
    (tmp_path / "g.csv").write_text("id,x_ltp_m,y_ltp_m,x_pcf_px,y_pcf_px\nA,1,2,3,4\nB,1,oops,3,4\n")
    r = run("calibrate", tmp_path / "g.csv")
    assert r.exit_code == 1
    assert "g.csv:3" in r.stderr and "y_ltp_m" in r.stderr


def test_unknown_config_key(tmp_path):
    (tmp_path / "c.json").write_text(json.dumps({"foo": 1}))
    r = run("errors", "--config", tmp_path / "c.json")
    assert r.exit_code == 1 and "foo" in r.stderr


def test_module_error_has_frame_context(scene, tmp_path):
    run("calibrate", scene / "gcps.csv", "--out", tmp_path)
    (tmp_path / "d.csv").write_text(",".join(io.DETECTIONS_HEADER) + "\n4,0,0,0,0,1,1,2,2\n")
    r = run("track", tmp_path / "d.csv", "--mapping", tmp_path / "mapping.json", "--out", tmp_path)
    assert r.exit_code == 1 and "frame 4" in r.stderr


def test_missing_input_is_usage_error():
    assert run("calibrate").exit_code == 2


class TestPipeline:
    def test_gap_frames_filled(self):
        out = sim.generate(sim.make_scenario(duration=2.0, dropped_frames=[20, 21, 22, 23, 24]))
        cfg = PipelineConfig.model_validate(pipeline.config_for_scenario(out.scenario))
        cal = pipeline.calibrate(out.gcps, cfg)
        tr = pipeline.track(out.detections, cal.mapping, cfg)
        frames = [s.frame for s, _ in tr.states]
        assert frames == list(range(100))
        tr_full = pipeline.track(
            sim.generate(sim.make_scenario(duration=2.0)).detections, cal.mapping, cfg)
        assert np.trace(tr.states[24][0].cov) > np.trace(tr_full.states[24][0].cov)

    def test_y_down_flip_is_equivalent(self):
        out = sim.generate(sim.make_scenario(duration=1.0))
        cfg = PipelineConfig.model_validate(pipeline.config_for_scenario(out.scenario))
        down = cfg.model_copy(update={"pcf_y_down": True})
        flip = lambda p: pipeline.flip_rows(p, 1080.0)
        g2 = [GroundControlPoint(g.id, g.ltp, tuple(flip(g.pcf))) for g in out.gcps]
        d2 = [(f, flip(c)) for f, c in out.detections]
        a = pipeline.track(out.detections, pipeline.calibrate(out.gcps, cfg).mapping, cfg)
        b = pipeline.track(d2, pipeline.calibrate(g2, down).mapping, down)
        assert np.allclose([s.x for s, _ in a.states], [s.x for s, _ in b.states])

    def test_reference_frame_override(self):
        out = sim.generate(sim.make_scenario(duration=0.5))
        m = {f: (r, c) for f, r, c in out.matches}
        cfg = PipelineConfig.model_validate({"stabilization": {"reference_frame": 10}})
        st = {s.frame: s.transform for s in pipeline.stabilize_frames(m, cfg)}
        assert st[10].scale == pytest.approx(1.0, abs=1e-12)
        assert st[10].rotation == pytest.approx(0.0, abs=1e-12)
        assert st[10].translation == pytest.approx((0, 0), abs=1e-9)
