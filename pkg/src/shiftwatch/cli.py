"""Command-line entry points."""

from __future__ import annotations

import sys
from pathlib import Path

import click

from . import __version__
from .config import AppConfig, ConfigError, load_config
from .pipeline import ShiftInputs, build_client, run_shift, write_audit
from .reporting import ShiftStore, StoreError, generate_report, render_text
from .service import create_app


@click.group()
@click.version_option(__version__)
def main() -> None:
    """End-of-shift construction site compliance processing."""


def _resolve_config(
    config: str | None,
    conf_gate: float | None = None,
    stride: int | None = None,
    store: str | None = None,
) -> AppConfig:
    try:
        cfg = load_config(config) if config else AppConfig()
    except ConfigError as exc:
        raise click.ClickException(f"config: {exc}") from exc
    if conf_gate is None and stride is None and store is None:
        return cfg
    data = cfg.model_dump()
    if conf_gate is not None:
        data["ingest"]["conf_gate"] = conf_gate
    if stride is not None:
        data["ingest"]["wall_frame_stride"] = stride
    if store is not None:
        data["store_path"] = store
    try:
        return AppConfig.model_validate(data)
    except Exception as exc:
        raise click.ClickException(f"config: {exc}") from exc


@main.command()
@click.option("--wall", type=click.Path(exists=True, dir_okay=False), help="Wall-camera detection stream (JSONL).")
@click.option("--pov", type=click.Path(exists=True, dir_okay=False), help="Body-worn camera detection stream (JSONL).")
@click.option("--shift", "shift_id", required=True, help="Shift identifier.")
@click.option("--site", "site_id", required=True, help="Site identifier.")
@click.option("--site-name", default="", help="Human-readable site name.")
@click.option("--start", "start_utc", required=True, help="Shift start, ISO 8601 UTC.")
@click.option("--end", "end_utc", required=True, help="Shift end, ISO 8601 UTC.")
@click.option("--store", type=click.Path(dir_okay=False), help="Database path (overrides config).")
@click.option("--roster", type=click.Path(exists=True, dir_okay=False), help="Worker roster CSV for training checks.")
@click.option("--conf-gate", type=float, help="Detection confidence gate override.")
@click.option("--stride", type=int, help="Wall-camera frame stride override.")
@click.option("--config", type=click.Path(exists=True, dir_okay=False), help="YAML or JSON config file.")
@click.option("--vlm-script", type=click.Path(exists=True, dir_okay=False), help="Scripted verifier responses (JSON) instead of a live endpoint.")
@click.option("--wall-video-uri", help="Source video URI for wall chunk references.")
@click.option("--pov-video-uri", help="Source video URI for POV chunk references.")
@click.option("--out", type=click.Path(file_okay=False), default=".", help="Directory for report.json, report.txt, audit.jsonl.")
def process(
    wall, pov, shift_id, site_id, site_name, start_utc, end_utc, store, roster,
    conf_gate, stride, config, vlm_script, wall_video_uri, pov_video_uri, out,
) -> None:
    """Process a shift's detection streams and write its report."""
    if wall is None and pov is None:
        raise click.UsageError("supply --wall and/or --pov")
    cfg = _resolve_config(config, conf_gate, stride, store)
    client = build_client(cfg.client, vlm_script)
    inputs = ShiftInputs(
        shift_id=shift_id,
        site_id=site_id,
        site_name=site_name,
        start_utc=start_utc,
        end_utc=end_utc,
        wall_stream=wall,
        pov_stream=pov,
        wall_video_uri=wall_video_uri,
        pov_video_uri=pov_video_uri,
        roster=roster,
    )
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        with ShiftStore(cfg.store_path) as shift_store:
            result = run_shift(inputs, cfg, shift_store, client)
    except Exception as exc:
        raise click.ClickException(f"{type(exc).__name__}: {exc}") from exc

    (out_dir / "report.json").write_bytes(result.report_json)
    (out_dir / "report.txt").write_text(result.report_text)
    with open(out_dir / "audit.jsonl", "a") as sink:
        write_audit(result.audit_records, sink)
    skipped = sum(result.malformed_lines.values())
    click.echo(f"shift {shift_id}: {result.event_count} event(s), "
               f"{len(result.chunk_outcomes)} chunk(s), {skipped} malformed line(s) skipped")
    if not result.reprocessed:
        click.echo("shift was already finalized; report regenerated without reprocessing")
    click.echo(f"report written to {out_dir / 'report.json'}")


@main.command()
@click.option("--store", required=True, type=click.Path(exists=True, dir_okay=False), help="Database path.")
@click.option("--shift", "shift_id", required=True, help="Shift identifier.")
@click.option("--format", "fmt", type=click.Choice(["text", "json"]), default="text")
def report(store, shift_id, fmt) -> None:
    """Regenerate and print a stored shift's report."""
    try:
        with ShiftStore(store) as shift_store:
            doc = generate_report(shift_store, shift_id)
            if fmt == "json":
                sys.stdout.buffer.write(doc.to_json_bytes())
            else:
                click.echo(render_text(doc), nl=False)
    except StoreError as exc:
        raise click.ClickException(f"{type(exc).__name__}: {exc}") from exc


@main.command()
@click.option("--config", type=click.Path(exists=True, dir_okay=False), help="YAML or JSON config file.")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
def serve(config, host, port) -> None:
    """Run the HTTP service."""
    import uvicorn

    cfg = _resolve_config(config)
    uvicorn.run(create_app(cfg), host=host, port=port)


@main.command("validate-config")
@click.option("--config", required=True, type=click.Path(exists=True, dir_okay=False))
def validate_config(config) -> None:
    """Validate a config file and exit."""
    try:
        load_config(config)
    except ConfigError as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo("configuration OK")


if __name__ == "__main__":
    main()
