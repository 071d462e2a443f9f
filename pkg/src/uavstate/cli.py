"""Command-line front end: ``uavstate <subcommand>``."""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from . import bench, io, pipeline, sim
from .config import PipelineConfig, load_config
from .errors import UavStateError
from .georef import FrameMapping

EXIT_ERROR = 1
EXIT_GATE = 3


def _common(f):
    f = click.option("--config", "config_path", type=click.Path(dir_okay=False), help="Pipeline config JSON.")(f)
    f = click.option("--out", "out_dir", type=click.Path(file_okay=False), default=".", show_default=True,
                     help="Output directory.")(f)
    f = click.option("--seed", type=click.IntRange(min=0), default=None, help="RNG seed override.")(f)
    return f


def _cfg(config_path) -> PipelineConfig:
    return load_config(config_path)


def _path(arg, fallback, name: str) -> Path:
    p = arg or fallback
    if p is None:
        raise click.UsageError(f"missing {name} (argument or config paths.{name})")
    return Path(p)


def _echo_json(obj) -> None:
    click.echo(json.dumps(obj, indent=2, sort_keys=True))


class _Cli(click.Group):
    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except UavStateError as e:
            click.echo(f"error: {e}", err=True)
            ctx.exit(EXIT_ERROR)


@click.group(cls=_Cli)
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def main(verbose: bool) -> None:
    """Vehicle state estimation from hovering-UAV nadir video detections."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(message)s")


@main.command()
@click.argument("gcps", required=False, type=click.Path(dir_okay=False))
@click.option("--strict", is_flag=True, help="Exit non-zero when the GCP separation warning fires.")
@_common
def calibrate(gcps, strict, config_path, out_dir, seed):
    """Fit the pixel->ground mapping from gcps.csv; write mapping.json and budget.json."""
    cfg = _cfg(config_path)
    gcp_list = io.read_gcps(_path(gcps, cfg.paths.gcps, "gcps"))
    cal = pipeline.calibrate(gcp_list, cfg)
    out = Path(out_dir)
    io.write_json(out / "mapping.json", cal.mapping.to_json())
    io.write_json(out / "budget.json", cal.budget)
    for w in cal.warnings:
        click.echo(f"warning: {w}", err=True)
    _echo_json(cal.budget)
    if strict and cal.warnings:
        sys.exit(EXIT_GATE)


@main.command()
@click.argument("matches", required=False, type=click.Path(dir_okay=False))
@_common
def stabilize(matches, config_path, out_dir, seed):
    """Per-frame drift transforms from matches.csv; write stab.csv."""
    cfg = _cfg(config_path)
    m = io.read_matches(_path(matches, cfg.paths.matches, "matches"))
    frames = pipeline.stabilize_frames(m, cfg, seed)
    path = io.write_table(Path(out_dir) / "stab.csv", io.STAB_HEADER, [s.row() for s in frames])
    click.echo(str(path))


@main.command()
@click.argument("detections", required=False, type=click.Path(dir_okay=False))
@click.option("--mapping", "mapping_path", type=click.Path(dir_okay=False), help="mapping.json from calibrate.")
@click.option("--stab", "stab_path", type=click.Path(dir_okay=False), help="stab.csv (omit for a stable camera).")
@click.option("--led", "led_path", type=click.Path(dir_okay=False), help="led_events.csv (omit to use fps and epoch).")
@_common
def track(detections, mapping_path, stab_path, led_path, config_path, out_dir, seed):
    """Filter detections.csv into state.csv (and measurements.csv)."""
    cfg = _cfg(config_path)
    dets = io.read_detections(_path(detections, cfg.paths.detections, "detections"))
    mapping = FrameMapping.from_json(io.read_json(_path(mapping_path, cfg.paths.mapping, "mapping")))
    stab_p = stab_path or cfg.paths.stab
    led_p = led_path or cfg.paths.led_events
    stab = io.read_stab(stab_p) if stab_p else None
    events = io.read_led_events(led_p) if led_p else None
    result = pipeline.track(dets, mapping, cfg, stab, events)
    out = Path(out_dir)
    io.write_table(out / "measurements.csv", io.MEASUREMENTS_HEADER, [io.measurement_row(m) for m in result.measurements])
    path = io.write_table(out / "state.csv", io.STATE_HEADER, result.state_rows())
    if result.timebase is not None:
        io.write_json(out / "timebase.json", result.timebase.to_json())
    click.echo(str(path))


@main.command()
@click.option("--config", "config_path", type=click.Path(dir_okay=False), help="Pipeline config JSON.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None, help="Also write errors.json here.")
def errors(config_path, out_dir):
    """Print every closed-form error bound for the configured geometry."""
    report = pipeline.errors_report(_cfg(config_path))
    if out_dir:
        io.write_json(Path(out_dir) / "errors.json", report)
    _echo_json(report)


@main.command("bench")
@click.argument("state", required=False, type=click.Path(dir_okay=False))
@click.argument("reference", required=False, type=click.Path(dir_okay=False))
@_common
def bench_cmd(state, reference, config_path, out_dir, seed):
    """Compare state.csv with reference.csv; write report.json and the .dat plot files."""
    cfg = _cfg(config_path)
    rows = io.read_state(_path(state, cfg.paths.state, "state"))
    ref = io.read_reference(_path(reference, cfg.paths.reference, "reference"))
    report = pipeline.run_bench(pipeline.estimates_from_rows(rows), ref)
    io.write_json(Path(out_dir) / "report.json", report.to_json())
    bench.emit_plotdata(report, out_dir)
    _echo_json(report.to_json())


@main.command()
@click.argument("scenario", required=False, type=click.Path(dir_okay=False))
@_common
def simulate(scenario, config_path, out_dir, seed):
    """Generate a synthetic scene (all input files plus ground truth)."""
    data = io.read_json(scenario) if scenario else {}
    if seed is not None:
        data["seed"] = seed
    scn = sim.make_scenario(data)
    paths = pipeline.write_simulation(sim.generate(scn), out_dir)
    for p in paths.values():
        click.echo(str(p))


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    uvicorn.run("uavstate.service:app", host=host, port=port)


if __name__ == "__main__":
    main()
