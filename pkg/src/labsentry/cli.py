"""Command line interface.

Subcommands mirror the harness surfaces: ``replay`` runs a recorded
scenario, ``trials`` runs randomized reposition trials, ``serve`` starts
the HTTP gateway, ``render`` writes a one-off map snapshot. Passing
``demo`` as a map or scenario uses the bundled demo lab.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .coordinator import PolicyConfig
from .harness import load_scenario, replay, run_reposition_trials
from .model import HazardKind, initial_state, load_map
from .notify import Notifier
from .render import render_2d
from .report import render_table, write_report
from .safety import SafetyPolicy
from .vlm import Condition, LiveBackend, MockBackend

DATA_DIR = Path(__file__).parent / "data"


def _resolve_map(ref: str) -> Path:
    return DATA_DIR / "demo_map.json" if ref == "demo" else Path(ref)


def _resolve_scenario(ref: str) -> Path:
    return DATA_DIR / "demo_scenario.json" if ref == "demo" else Path(ref)


@click.group()
def main():
    """Lab safety orchestration engine and scenario simulator."""


@main.command("replay")
@click.option("--scenario", "-s", required=True, help="scenario manifest (or 'demo')")
@click.option("--map", "map_ref", default=None, help="override the scenario's map")
@click.option("--speed", default=0.0, show_default=True,
              help="simulated seconds per wall second; 0 runs flat out")
@click.option("--seed", default=0, show_default=True)
@click.option("--report", "report_dir", type=click.Path(), default=None,
              help="directory for report.json/.csv and figures")
@click.option("--webhook", default=None, help="notification webhook URL")
@click.option("--log", "log_path", type=click.Path(), default=None,
              help="write the action log (JSON lines) here")
def replay_cmd(scenario, map_ref, speed, seed, report_dir, webhook, log_path):
    """Replay a recorded scenario and print its metrics."""
    sc = load_scenario(_resolve_scenario(scenario))
    if map_ref:
        sc = sc.__class__(**{**sc.__dict__, "lab_map": load_map(_resolve_map(map_ref))})
    result = replay(sc, speed=speed, seed=seed, notifier=Notifier(webhook_url=webhook))
    if log_path:
        Path(log_path).write_text("\n".join(result.log_lines) + "\n")
    click.echo(f"replayed {len(sc.events)} events, "
               f"{len(result.log_lines)} actions logged")
    click.echo(render_table(result.metrics))
    if report_dir:
        written = write_report(result.metrics, Path(report_dir))
        snapshot = render_2d(result.coordinator.state)
        map_path = Path(report_dir) / "map.png"
        map_path.write_bytes(snapshot.image)
        written["map"] = map_path
        click.echo("report: " + ", ".join(str(p) for p in written.values()))


@main.command("trials")
@click.option("--map", "map_ref", default="demo", show_default=True)
@click.option("--condition", type=click.Choice(["c1", "c2", "c3"]), default="c3",
              show_default=True)
@click.option("--hazard", type=click.Choice(["fire", "accident"]), default="fire",
              show_default=True)
@click.option("--n", default=10, show_default=True)
@click.option("--backend", "backend_kind", type=click.Choice(["mock", "live"]),
              default="mock", show_default=True)
@click.option("--script", default=None, help="mock backend script file")
@click.option("--endpoint", default=None, help="live backend URL")
@click.option("--model", default="llava-phi3", show_default=True)
@click.option("--timeout", default=60.0, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--strict-parse", is_flag=True, default=False,
              help="require the exact canonical reply format")
@click.option("--hazard-radius", default=2.0, show_default=True)
@click.option("--report", "report_dir", type=click.Path(), default=None)
def trials_cmd(map_ref, condition, hazard, n, backend_kind, script, endpoint,
               model, timeout, seed, strict_parse, hazard_radius, report_dir):
    """Run randomized reposition trials and tally e1/e2/e3/success."""
    lab_map = load_map(_resolve_map(map_ref))
    if backend_kind == "mock":
        script_path = script or (DATA_DIR / "demo_script.json")
        backend = MockBackend(script_path)
    else:
        if not endpoint:
            raise click.UsageError("--backend live requires --endpoint")
        backend = LiveBackend(endpoint=endpoint, model=model, timeout=timeout)
    report = run_reposition_trials(
        lab_map,
        condition=Condition(condition),
        hazard_kind=HazardKind(hazard),
        n=n,
        backend=backend,
        policy=SafetyPolicy(hazard_radius=hazard_radius),
        seed=seed,
        strict_parse=strict_parse,
    )
    click.echo(render_table(report))
    if report_dir:
        written = write_report(report, Path(report_dir))
        click.echo("report: " + ", ".join(str(p) for p in written.values()))
    if backend_kind == "live":
        click.echo("(live backend numbers are informational)")


@main.command("serve")
@click.option("--map", "map_ref", default="demo", show_default=True)
@click.option("--bind", default="127.0.0.1", show_default=True)
@click.option("--port", default=8787, show_default=True)
@click.option("--script", default=None, help="mock backend script file")
@click.option("--webhook", default=None, help="notification webhook URL")
@click.option("--clock-scale", default=1.0, show_default=True,
              help="real seconds per simulated second")
@click.option("--countdown", default=600.0, show_default=True)
@click.option("--condition", type=click.Choice(["c1", "c2", "c3"]), default="c3",
              show_default=True)
@click.option("--frontend", type=click.Path(), default=None,
              help="serve a built operator UI from this directory at /ui")
def serve_cmd(map_ref, bind, port, script, webhook, clock_scale, countdown,
              condition, frontend):
    """Start the HTTP gateway (state, events, injection, config)."""
    import uvicorn

    from .gateway import LiveEngine, create_app

    lab_map = load_map(_resolve_map(map_ref))
    policy = PolicyConfig(
        clock_scale=clock_scale,
        countdown=countdown,
        prompt_condition=Condition(condition),
    )
    backend = MockBackend(script or (DATA_DIR / "demo_script.json"))
    engine = LiveEngine(
        lab_map, policy=policy, backend=backend, notifier=Notifier(webhook_url=webhook)
    ).start()
    app = create_app(engine, frontend_dir=Path(frontend) if frontend else None)
    try:
        uvicorn.run(app, host=bind, port=port, log_level="warning")
    finally:
        engine.stop()


@main.command("render")
@click.option("--map", "map_ref", default="demo", show_default=True)
@click.option("--out", "-o", type=click.Path(), default="map.png", show_default=True)
def render_cmd(map_ref, out):
    """Render the empty lab map to a PNG."""
    lab_map = load_map(_resolve_map(map_ref))
    snapshot = render_2d(initial_state(lab_map))
    Path(out).write_bytes(snapshot.image)
    click.echo(f"wrote {out}")


if __name__ == "__main__":
    main()
