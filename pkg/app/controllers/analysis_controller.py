import logging
import time
from pathlib import Path
from typing import List, Optional, Tuple
import click
import numpy as np
from app.core.config import settings
from app.models.schemas import ScanConfig
from app.controllers.common import (
    AXES, model_option, out_option, threads_option, handle_errors,
    parse_momentum, parse_waypoints, parse_fixed, build_manifest,
)
from app.services.finder_service import finder_service
from app.services.model_service import model_service
from app.services.spectral_service import spectral_service
from app.utils.output_writer import output_writer

logger = logging.getLogger(__name__)

router = click.Group("analysis", help="Band structures, degeneracy scans and slab spectra")


def _scan_config(grid: Optional[int], tol: Optional[float], threads: int, n: int) -> ScanConfig:
    if grid is None:
        grid = settings.SCAN_GRID if n < 4 else settings.SCAN_GRID_4B
    values = {"grid": grid, "threads": threads}
    if tol is not None:
        values["refine_tol"] = tol
    return ScanConfig(**values)


@router.command("bands", help="Complex band energies along a path of waypoints given in units of π")
@model_option
@click.option("--path", "path_spec", required=True, help='Waypoints, e.g. "0,0,0.5;1,1,0.5"')
@click.option("--samples", type=click.IntRange(min=1), default=50, show_default=True,
              help="Points per path segment")
@out_option
@click.pass_context
@handle_errors
def bands(ctx: click.Context, model_ref: str, path_spec: str, samples: int, out: Optional[Path]):
    started = time.perf_counter()
    waypoints = parse_waypoints(path_spec)
    model = model_service.load(model_ref)

    segments = [
        np.linspace(a, b, samples, endpoint=False) for a, b in zip(waypoints[:-1], waypoints[1:])
    ]
    momenta = np.vstack(segments + [waypoints[-1:]])
    eigs = spectral_service.eigenvalues(model_service.eval_bloch(model, momenta))

    rows: List[Tuple] = []
    for arc_index, (k, values) in enumerate(zip(momenta, eigs)):
        values = values[spectral_service.sort_eigenvalues(values)]
        for band_index, energy in enumerate(values):
            rows.append((arc_index, *k, band_index, energy.real, energy.imag))

    manifest = build_manifest(ctx, model, started, {"points": len(momenta), "rows": len(rows)})
    output_writer.write_csv(
        ["arc_index", "kx", "ky", "kz", "band_index", "re_E", "im_E"], rows, manifest, out
    )


@router.command("scan", help="Locate and classify every degeneracy in the Brillouin zone")
@model_option
@click.option("--grid", type=click.IntRange(min=3), default=None,
              help=f"Points per axis [default: {settings.SCAN_GRID}, {settings.SCAN_GRID_4B} for 4 bands]")
@click.option("--order", type=int, default=None, help="Degeneracy order to look for [default: band count]")
@click.option("--tol", type=click.FloatRange(min=0, min_open=True), default=None,
              help="Refinement tolerance on the objective")
@threads_option
@out_option
@click.pass_context
@handle_errors
def scan(ctx: click.Context, model_ref: str, grid: Optional[int], order: Optional[int],
         tol: Optional[float], threads: int, out: Optional[Path]):
    started = time.perf_counter()
    model = model_service.load(model_ref)
    config = _scan_config(grid, tol, threads, model.n)
    result = finder_service.scan_degeneracies(model, config, order)
    counts = {"records": len(result.records), "seeds": result.seeds, "dropped_seeds": result.dropped_seeds}
    for record in result.records:
        counts[record.kind.value] = counts.get(record.kind.value, 0) + 1
    output_writer.write_json(result.records, build_manifest(ctx, model, started, counts), out)


@router.command("classify", help="Classify the degeneracy at one momentum given in units of π")
@model_option
@click.option("--k", "k_text", required=True, help='Momentum, e.g. "0,0.5,0.5"')
@click.option("--order", type=int, default=None, help="Cap on the degeneracy order")
@out_option
@click.pass_context
@handle_errors
def classify(ctx: click.Context, model_ref: str, k_text: str, order: Optional[int], out: Optional[Path]):
    started = time.perf_counter()
    k = parse_momentum(k_text, "--k")
    model = model_service.load(model_ref)
    record = finder_service.classify_degeneracy(model, k, order_target=order)
    output_writer.write_json(record, build_manifest(ctx, model, started, {"records": 1}), out)


@router.command("surfaces", help="Zero crossings of d-components, discriminant parts or gaps on a grid")
@model_option
@click.option("--field", "fields", multiple=True, required=True, help="Field name; repeat for several")
@click.option("--grid", type=click.IntRange(min=2), default=settings.SCAN_GRID, show_default=True,
              help="Points per axis over [-π, π]")
@click.option("--fix", "fixed", multiple=True, help="Pin an axis, e.g. x=0 (units of π)")
@click.option("--joint", is_flag=True, help="Report cells where every field changes sign together")
@out_option
@click.pass_context
@handle_errors
def surfaces(ctx: click.Context, model_ref: str, fields: Tuple[str, ...], grid: int,
             fixed: Tuple[str, ...], joint: bool, out: Optional[Path]):
    started = time.perf_counter()
    pinned = parse_fixed(list(fixed))
    model = model_service.load(model_ref)
    axis = np.linspace(-np.pi, np.pi, grid)
    axes = [np.array([pinned[a]]) if a in pinned else axis for a in AXES]

    samples = (
        [finder_service.zero_set_sample(model, list(fields), axes)]
        if joint else [finder_service.zero_set_sample(model, name, axes) for name in fields]
    )
    rows: List[Tuple] = []
    counts = {}
    for sample in samples:
        label = "&".join(sample.fields)
        counts[label] = len(sample.points)
        rows.extend((*point, label) for point in sample.points)

    output_writer.write_csv(["kx", "ky", "kz", "field"], rows, build_manifest(ctx, model, started, counts), out)


@router.command("obc", help="Slab spectrum with one open axis, swept along another")
@model_option
@click.option("--axis", "open_axis", type=click.Choice(AXES), default="y", show_default=True,
              help="Open direction")
@click.option("--sites", type=click.IntRange(min=2), default=settings.SLAB_SITES, show_default=True)
@click.option("--sweep-axis", type=click.Choice(AXES), default="z", show_default=True)
@click.option("--start", type=float, default=-1.0, show_default=True, help="Sweep start (units of π)")
@click.option("--stop", type=float, default=1.0, show_default=True, help="Sweep stop (units of π)")
@click.option("--steps", type=click.IntRange(min=1), default=41, show_default=True)
@click.option("--fix", "fixed", multiple=True, help="Remaining momentum, e.g. x=0 (units of π)")
@click.option("--width", type=click.IntRange(min=1), default=settings.EDGE_WIDTH, show_default=True,
              help="Boundary layer width in sites")
@click.option("--threshold", type=float, default=settings.EDGE_THRESHOLD, show_default=True,
              help="Edge weight above which a state is flagged as a boundary state")
@out_option
@click.pass_context
@handle_errors
def obc(ctx: click.Context, model_ref: str, open_axis: str, sites: int, sweep_axis: str,
        start: float, stop: float, steps: int, fixed: Tuple[str, ...], width: int,
        threshold: float, out: Optional[Path]):
    started = time.perf_counter()
    if sweep_axis == open_axis:
        raise click.BadParameter("sweep axis must differ from the open axis", param_hint="--sweep-axis")
    pinned = parse_fixed(list(fixed))
    remaining = [a for a in AXES if a not in (open_axis, sweep_axis)]
    if set(pinned) != set(remaining):
        raise click.BadParameter(f"give exactly --fix {remaining[0]}=VALUE", param_hint="--fix")
    model = model_service.load(model_ref)

    rows: List[Tuple] = []
    flagged = 0
    for value in np.pi * np.linspace(start, stop, steps):
        k_perp = {**pinned, sweep_axis: float(value)}
        energies, weights = model_service.slab_spectrum(model, open_axis, sites, k_perp, width)
        for state_index, (energy, weight) in enumerate(zip(energies, weights)):
            boundary = bool(weight > threshold)
            flagged += boundary
            rows.append((value, state_index, energy.real, energy.imag, weight, boundary))
    logger.info(f"Slab of {model.name}: {flagged} boundary-flagged states over {steps} sweep values")

    manifest = build_manifest(ctx, model, started, {"rows": len(rows), "boundary": flagged})
    output_writer.write_csv(
        ["sweep", "state_index", "re_E", "im_E", "edge_weight", "boundary"], rows, manifest, out
    )
