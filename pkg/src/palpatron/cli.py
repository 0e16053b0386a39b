"""Command-line entry points: simulate, assess, replay, serve.

Exit codes: 0 success, 1 replay divergence, 2 usage/missing file,
3 corrupt or schema-invalid session data.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .assess import (ForceBand, band_for_scenario, build_report, episodes_csv,
                     explore_phase_ticks, segment_taps)
from .config import Config, ConfigError, build_config
from .recording import RecordError, RecordReader
from .runner import ScriptError, replay as run_replay, simulate_to_file
from .tissue import Scenario, build_scenario

CONFIG_HELP = "Config file path or inline key=value override (repeatable)."


def _resolve_config(config: tuple[str, ...]) -> Config:
    try:
        return build_config(config)
    except ConfigError as exc:
        raise click.exceptions.UsageError(str(exc))


@click.group()
def main() -> None:
    """Liver palpation trainer: scripted simulation, assessment, serving."""


@main.command()
@click.option("--scenario", type=click.Choice([s.value for s in Scenario]),
              required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--script", "script_path", required=True,
              help="Input-sample JSONL script.")
@click.option("--out", "out_path", required=True, help="Session JSONL output.")
@click.option("--config", multiple=True, help=CONFIG_HELP)
@click.option("--mesh", "mesh_path", default=None,
              help="External shell mesh (palpmesh v1).")
def simulate(scenario, seed, script_path, out_path, config, mesh_path):
    """Run a scripted session in virtual time and record it."""
    if not Path(script_path).exists():
        click.echo(f"error: script file not found: {script_path}", err=True)
        sys.exit(2)
    cfg = _resolve_config(config)
    try:
        result = simulate_to_file(scenario, seed, cfg, script_path, out_path,
                                  mesh_path=mesh_path)
    except (ScriptError, ConfigError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    click.echo(f"wrote {out_path}: {result.tick_count} ticks, "
               f"{result.event_count} events over {result.duration_ms} ms")


def _parse_band(text: str | None, cfg: Config, scenario: str) -> ForceBand:
    if text is None:
        return band_for_scenario(cfg, scenario)
    try:
        low, high = (float(x) for x in text.split(","))
        return ForceBand(low, high, scenario)
    except ValueError as exc:
        raise click.exceptions.UsageError(f"bad --band {text!r}: {exc}")


@main.command()
@click.argument("session_path")
@click.option("--band", default=None, help="Override band as 'low,high' (N).")
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]),
              default="json", show_default=True)
@click.option("--out", "out_path", default=None,
              help="Write to file instead of stdout.")
@click.option("--config", multiple=True, help=CONFIG_HELP)
def assess(session_path, band, fmt, out_path, config):
    """Compute the assessment report for a recorded session."""
    if not Path(session_path).exists():
        click.echo(f"error: session file not found: {session_path}", err=True)
        sys.exit(2)
    try:
        reader = RecordReader(session_path)
        cfg = reader.verify_config_hash()
    except RecordError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(3)
    # header config is authoritative; inline key=value flags tweak assessment
    for source in config:
        if "=" in source:
            from .config import parse_override
            key, value = parse_override(source)
            cfg = cfg.with_overrides({key: value})
    header = reader.header
    model = build_scenario(Scenario(header["scenario"]), header["seed"], cfg)
    band_obj = _parse_band(band, cfg, header["scenario"])
    events = [r.obj for r in reader.events()]
    report = build_report(reader.ticks(), model, cfg, band_obj, events)
    if fmt == "csv":
        episodes = segment_taps(
            explore_phase_ticks(reader.ticks(), events),
            cfg.get("assess.tap_threshold"), cfg.get_int("assess.min_gap"))
        text = episodes_csv(episodes, band_obj)
    else:
        text = json.dumps(report, indent=2, allow_nan=False) + "\n"
    if out_path:
        Path(out_path).write_text(text, encoding="utf-8")
        click.echo(f"wrote {out_path}")
    else:
        click.echo(text, nl=False)


@main.command()
@click.argument("session_path")
@click.option("--verify", is_flag=True,
              help="Re-simulate from recorded inputs and diff every tick.")
def replay(session_path, verify):
    """Play back or verify a recorded session."""
    if not Path(session_path).exists():
        click.echo(f"error: session file not found: {session_path}", err=True)
        sys.exit(2)
    try:
        report = run_replay(session_path, verify=verify)
    except RecordError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(3)
    if verify:
        if report.ok:
            click.echo(f"verified: {report.tick_count} ticks identical")
        else:
            click.echo(f"divergence at tick index {report.divergence_index}"
                       f" (file line {report.divergence_line})", err=True)
            sys.exit(1)
    else:
        click.echo(f"playback ok: {report.tick_count} ticks, "
                   f"{report.event_count} events")


@main.command()
@click.option("--port", type=int, default=8765, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--scenario", type=click.Choice([s.value for s in Scenario]),
              default=None, help="Default scenario when the client omits one.")
@click.option("--config", multiple=True, help=CONFIG_HELP)
def serve(port, host, scenario, config):
    """Serve the streaming session service for the web client."""
    cfg = _resolve_config(config)
    from .server import serve_forever
    serve_forever(host=host, port=port, cfg=cfg, default_scenario=scenario)


if __name__ == "__main__":
    main()
