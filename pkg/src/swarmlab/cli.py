"""Command-line entry point: evolution, studies, replay, merging, serving.

Config precedence: command-line flags > --config file (JSON with "world",
"geo" and "evolution" sections) > built-in defaults. The resolved
configuration is printed to stderr at startup for provenance.
"""
from __future__ import annotations

import json
import os
from pathlib import Path

import click

from .analysis import (AXIS_NAMES, ablation_study, parameter_heatmap, reevaluate,
                       run_transition, uncertainty_ellipse, write_ablation_report,
                       write_ellipse_report, write_heatmap, write_reeval_report,
                       write_transition_record)
from .archive import load_archive, merge, save_archive
from .config import LabConfig, config_hash
from .controller import N_INPUTS
from .evolution import evolve
from .world import run_episode


def _fail(message: str) -> "click.ClickException":
    return click.ClickException(message)


def _load_lab(ctx: click.Context) -> LabConfig:
    cfg_path = ctx.obj.get("config")
    if cfg_path is None:
        return LabConfig()
    try:
        data = json.loads(Path(cfg_path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise _fail(f"cannot read config {cfg_path}: {exc}")
    try:
        return LabConfig.from_dict(data)
    except (TypeError, ValueError, KeyError) as exc:
        raise _fail(f"malformed config {cfg_path}: {exc}")


def _resolve(ctx: click.Context, world: dict | None = None,
             evolution: dict | None = None, geo: dict | None = None) -> LabConfig:
    lab = _load_lab(ctx)
    sections = {}
    if world:
        sections["world"] = world
    if evolution:
        sections["evolution"] = evolution
    if geo:
        sections["geo"] = geo
    if sections:
        lab = lab.replace(**sections)
    click.echo(f"config[{config_hash(lab)}]: {json.dumps(lab.to_dict(), sort_keys=True)}",
               err=True)
    return lab


def _seed(ctx: click.Context, default: int = 0) -> int:
    return default if ctx.obj.get("seed") is None else int(ctx.obj["seed"])


def _workers(ctx: click.Context) -> int:
    w = ctx.obj.get("workers")
    return int(w) if w else (os.cpu_count() or 1)


def _parse_mask(text: str) -> list[int]:
    text = text.strip()
    if len(text) != N_INPUTS or any(c not in "01" for c in text):
        raise _fail(f"mask must be {N_INPUTS} characters of 0/1, got {text!r}")
    return [int(c) for c in text]


def _archive(path: str):
    try:
        return load_archive(path)
    except FileNotFoundError:
        raise _fail(f"archive not found: {path}")
    except ValueError as exc:
        raise _fail(f"bad archive {path}: {exc}")


def _cell(rep, bins):
    try:
        key = rep.validate_bins(bins)
    except ValueError as exc:
        raise _fail(str(exc))
    cell = rep.cells.get(key)
    if cell is None:
        raise _fail(f"bin {key} is empty")
    return key, cell


@click.group()
@click.option("--config", type=click.Path(), default=None,
              help="JSON config file with world/geo/evolution sections.")
@click.option("--seed", type=int, default=None, help="Master seed.")
@click.option("--workers", type=int, default=None,
              help="Worker processes (default: CPU count).")
@click.pass_context
def main(ctx, config, seed, workers):
    """Swarm behavior laboratory."""
    ctx.ensure_object(dict)
    ctx.obj.update(config=config, seed=seed, workers=workers)


@main.command("evolve")
@click.option("--generations", type=int, default=None)
@click.option("--batch", type=int, default=None)
@click.option("--evals", type=int, default=None, help="Episodes per individual.")
@click.option("--duration", type=float, default=None, help="Episode length (s).")
@click.option("--agents", type=int, default=None)
@click.option("--mask", type=str, default=None, help="Input mask, e.g. 01111111.")
@click.option("--out", type=click.Path(), required=True)
@click.option("--snapshot-dir", type=click.Path(), default=None,
              help="Write an archive snapshot every 10 generations.")
@click.pass_context
def evolve_cmd(ctx, generations, batch, evals, duration, agents, mask, out, snapshot_dir):
    """Evolve a behavior repertoire and write it as an archive file."""
    evo = {k: v for k, v in {"generations": generations, "batch": batch,
                             "evals_per_individual": evals}.items() if v is not None}
    if mask is not None:
        evo["mask"] = _parse_mask(mask)
    world = {k: v for k, v in {"duration": duration, "n_agents": agents}.items()
             if v is not None}
    lab = _resolve(ctx, world=world, evolution=evo)
    seed = _seed(ctx)

    snapshot_fn = None
    if snapshot_dir is not None:
        snap_dir = Path(snapshot_dir)
        snap_dir.mkdir(parents=True, exist_ok=True)

        def snapshot_fn(gen, rep):
            save_archive(rep, snap_dir / f"gen{gen:04d}.jsonl")

    latest = {}

    def progress(gen, rep):
        latest["rep"] = rep
        click.echo(f"generation {gen + 1}/{lab.evolution.generations}: "
                   f"{rep.size} bins filled", err=True)

    try:
        rep = evolve(lab, master_seed=seed, workers=_workers(ctx),
                     snapshot_fn=snapshot_fn, progress=progress)
    except KeyboardInterrupt:
        if "rep" in latest:
            save_archive(latest["rep"], out)
            click.echo(f"interrupted; snapshot with {latest['rep'].size} cells "
                       f"written to {out}", err=True)
        raise SystemExit(130)
    save_archive(rep, out)
    click.echo(f"{rep.size} cells -> {out}")


@main.command("reevaluate")
@click.argument("archive", type=click.Path())
@click.option("--evals", type=int, default=20, show_default=True)
@click.option("--out", type=click.Path(), required=True, help="Re-evaluated archive.")
@click.option("--report", type=click.Path(), default=None, help="Report file stem.")
@click.pass_context
def reevaluate_cmd(ctx, archive, evals, out, report):
    """Re-evaluate every elite with fresh seeds and re-bin it."""
    rep = _archive(archive)
    if rep.lab is None:
        raise _fail("archive has no embedded config; cannot re-evaluate")
    result, new_rep = reevaluate(rep, evals, seed=_seed(ctx), workers=_workers(ctx))
    save_archive(new_rep, out)
    if report:
        write_reeval_report(result, report)
    click.echo(f"retained {result.retained_size}/{result.original_size} "
               f"({result.retention:.1%}) at {evals} evals; {new_rep.size} cells -> {out}")


@main.command("merge")
@click.argument("archives", nargs=-1, required=True, type=click.Path())
@click.option("--out", type=click.Path(), required=True)
def merge_cmd(archives, out):
    """Combine archives, keeping the best elite per bin."""
    reps = [_archive(p) for p in archives]
    try:
        merged = merge(reps)
    except ValueError as exc:
        raise _fail(str(exc))
    save_archive(merged, out)
    click.echo(f"{merged.size} cells -> {out}")


@main.command("replay")
@click.argument("archive", type=click.Path())
@click.option("--bin", "bins", type=int, nargs=3, required=True,
              help="Bin coordinates i j k.")
@click.option("--out", type=click.Path(), required=True, help="Trace file (JSONL).")
@click.pass_context
def replay_cmd(ctx, archive, bins, out):
    """Re-run an archived behavior and export its step-by-step trace."""
    rep = _archive(archive)
    key, cell = _cell(rep, bins)
    if rep.lab is None:
        raise _fail("archive has no embedded config; cannot replay")
    seed = ctx.obj.get("seed")
    seed = cell.seeds[0] if seed is None else int(seed)
    with open(out, "w") as fp:
        record = run_episode(rep.lab.world, cell.genome, seed, geo=rep.lab.geo, trace=fp)
    e, n, v = record.raw
    click.echo(f"bin {key} seed {seed}: exploration {e:.2f}, network {n:.3f}, "
               f"loc variance {v:.1f} -> {out}")


@main.command("transition")
@click.argument("archive", type=click.Path())
@click.option("--from", "bins_a", type=int, nargs=3, required=True)
@click.option("--to", "bins_b", type=int, nargs=3, required=True)
@click.option("--reps", type=int, default=100, show_default=True)
@click.option("--out", type=click.Path(), required=True, help="Report file stem.")
@click.pass_context
def transition_cmd(ctx, archive, bins_a, bins_b, reps, out):
    """Switch between two archived behaviors mid-run and record the metrics."""
    rep = _archive(archive)
    key_a, cell_a = _cell(rep, bins_a)
    key_b, cell_b = _cell(rep, bins_b)
    if rep.lab is None:
        raise _fail("archive has no embedded config")
    record = run_transition(cell_a.genome, cell_b.genome, rep.lab, repetitions=reps,
                            master_seed=_seed(ctx), workers=_workers(ctx),
                            labels=(str(key_a), str(key_b)))
    paths = write_transition_record(record, out)
    inside = {k: record.within_band(k) for k in record.final_window}
    click.echo(f"{key_a} -> {key_b}, {reps} repetitions; final window inside "
               f"baseline band: {inside}; wrote {', '.join(str(p) for p in paths)}")


@main.command("ellipse")
@click.argument("archive", type=click.Path())
@click.option("--bin", "bins", type=int, nargs=3, required=True)
@click.option("--reps", type=int, default=100, show_default=True)
@click.option("--out", type=click.Path(), required=True, help="Report file stem.")
@click.pass_context
def ellipse_cmd(ctx, archive, bins, reps, out):
    """Estimate the characteristic uncertainty of one archived behavior."""
    rep = _archive(archive)
    key, cell = _cell(rep, bins)
    if rep.lab is None:
        raise _fail("archive has no embedded config")
    report = uncertainty_ellipse(cell.genome, rep.lab, repetitions=reps,
                                 master_seed=_seed(ctx), workers=_workers(ctx))
    write_ellipse_report(report, out)
    click.echo(f"bin {key}: mean {np_fmt(report.mean)}; wrote {out}.json")


def np_fmt(arr):
    return "[" + ", ".join(f"{v:.4g}" for v in arr) + "]"


@main.command("heatmap")
@click.argument("archive", type=click.Path())
@click.option("--axis", type=click.Choice(list(AXIS_NAMES)), default="network",
              show_default=True)
@click.option("--out", type=click.Path(), required=True, help="Report file stem.")
def heatmap_cmd(archive, axis, out):
    """Average controller parameters per repertoire slice."""
    rep = _archive(archive)
    try:
        table = parameter_heatmap(rep, axis)
    except ValueError as exc:
        raise _fail(str(exc))
    write_heatmap(table, out)
    click.echo(f"{axis} heatmap ({int(table.occupancy.sum())} members) -> {out}.tsv")


@main.command("ablate")
@click.option("--runs", type=int, default=8, show_default=True)
@click.option("--disable", "disable", type=int, multiple=True,
              help="Input number (1-8) to disable; repeatable. Default: each in turn.")
@click.option("--out", type=click.Path(), required=True, help="Report file stem.")
@click.pass_context
def ablate_cmd(ctx, runs, disable, out):
    """Evolve repertoires with inputs disabled and test the size difference."""
    lab = _resolve(ctx)
    inputs = list(disable) if disable else list(range(1, N_INPUTS + 1))
    for i in inputs:
        if not 1 <= i <= N_INPUTS:
            raise _fail(f"--disable takes input numbers 1..{N_INPUTS}, got {i}")
    masks = [tuple(True for _ in range(N_INPUTS))]
    masks += [tuple(j != i - 1 for j in range(N_INPUTS)) for i in inputs]
    try:
        report = ablation_study(masks, runs_per_mask=runs, lab=lab,
                                master_seed=_seed(ctx), workers=_workers(ctx))
    except ValueError as exc:
        raise _fail(str(exc))
    write_ablation_report(report, out)
    for r in report.results:
        stat = "" if r.p_value is None else f" p={r.p_value:.4g} (corrected {r.p_corrected:.4g})"
        click.echo(f"{r.label}: sizes {r.sizes}{stat}")


@main.command("serve")
@click.option("--archive-dir", type=click.Path(), default=".", show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--ui", type=click.Path(), default=None,
              help="Directory with the built operator console.")
def serve_cmd(archive_dir, host, port, ui):
    """Start the steering service (REST + WebSocket stream)."""
    import uvicorn

    from .service import create_app

    app = create_app(Path(archive_dir), ui_dir=Path(ui) if ui else None)
    uvicorn.run(app, host=host, port=port, log_level="info")


if __name__ == "__main__":
    main()
