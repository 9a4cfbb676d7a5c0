import functools
import logging
import time
from pathlib import Path
from typing import Dict, List, Optional
import click
import numpy as np
from app.core.config import settings
from app.models.schemas import ModelSpec, RunManifest
from app.utils.exceptions import DegeneracyToolException
from app.utils.output_writer import dumps, to_jsonable

logger = logging.getLogger(__name__)

AXES = ("x", "y", "z")


def model_option(func):
    return click.option(
        "--model", "model_ref", required=True,
        help="zoo:NAME?param=value&... or a model JSON file",
    )(func)


def out_option(func):
    return click.option(
        "--out", type=click.Path(dir_okay=False, path_type=Path), default=None,
        help="Output file; stdout when omitted",
    )(func)


def threads_option(func):
    return click.option(
        "--threads", type=click.IntRange(min=1), default=1, show_default=True,
        help=f"Worker threads for refinement (at most {settings.MAX_THREADS} recommended)",
    )(func)


def handle_errors(func):
    """Turn tool errors into a JSON payload on stderr and the matching exit code."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except DegeneracyToolException as e:
            logger.error(f"{type(e).__name__}: {e}")
            click.echo(dumps(e.payload()), err=True)
            raise click.exceptions.Exit(e.exit_code)

    return wrapper


def parse_momentum(text: str, param: str = "k") -> np.ndarray:
    """``kx,ky,kz`` in units of π, returned in radians."""
    parts = [p.strip() for p in text.split(",")]
    try:
        values = [float(p) for p in parts]
    except ValueError:
        raise click.BadParameter(f"{text!r} is not a comma-separated triple of numbers", param_hint=param)
    if len(values) != 3 or not np.all(np.isfinite(values)):
        raise click.BadParameter(f"{text!r} must give three finite components", param_hint=param)
    return np.pi * np.asarray(values)


def parse_waypoints(text: str) -> np.ndarray:
    points = [parse_momentum(chunk, "--path") for chunk in text.split(";") if chunk.strip()]
    if len(points) < 2:
        raise click.BadParameter("a path needs at least two waypoints", param_hint="--path")
    return np.vstack(points)


def parse_fixed(values: List[str]) -> Dict[str, float]:
    """``axis=value`` pairs, value in units of π."""
    fixed: Dict[str, float] = {}
    for item in values:
        axis, sep, raw = item.partition("=")
        axis = axis.strip()
        if not sep or axis not in AXES or axis in fixed:
            raise click.BadParameter(f"{item!r} must look like x=0.5 with a distinct axis", param_hint="--fix")
        try:
            fixed[axis] = float(raw) * np.pi
        except ValueError:
            raise click.BadParameter(f"{raw!r} is not a number", param_hint="--fix")
    return fixed


def replay_args(ctx: click.Context) -> List[str]:
    """Command line that reproduces this invocation."""
    args = [ctx.command.name]
    for param in ctx.command.params:
        if not isinstance(param, click.Option) or param.name not in ctx.params:
            continue
        value = ctx.params[param.name]
        flag = max(param.opts, key=len)
        if param.is_flag:
            if value:
                args.append(flag)
        elif param.multiple:
            for item in value:
                args.extend([flag, str(item)])
        elif value is not None:
            args.extend([flag, str(value)])
    return args


def build_manifest(
    ctx: click.Context,
    model: Optional[ModelSpec],
    started: float,
    counts: Dict[str, int],
) -> RunManifest:
    return RunManifest(
        command=ctx.command.name,
        model=ctx.params.get("model_ref") or "",
        params=dict(model.params) if model is not None else {},
        config={"options": to_jsonable(ctx.params), "args": replay_args(ctx)},
        wall_time_seconds=time.perf_counter() - started,
        record_counts=counts,
    )
