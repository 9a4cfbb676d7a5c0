import logging
import time
from pathlib import Path
from typing import Optional
import click
from app.core.config import settings
from app.models.enums import SymmetryKind
from app.models.schemas import SymmetrySpec
from app.controllers.common import model_option, out_option, handle_errors, build_manifest
from app.repositories.zoo_repository import zoo_repository
from app.services.model_service import model_service, ZOO_PREFIX
from app.services.symmetry_service import symmetry_service
from app.utils.exceptions import InvalidArgumentException
from app.utils.model_validator import ModelValidator
from app.utils.output_writer import output_writer

logger = logging.getLogger(__name__)

router = click.Group("symmetry", help="Symmetry checks and the model zoo")

SYMMETRY_CHOICES = [kind.value for kind in SymmetryKind]


def _declared_symmetry(model_ref: str) -> Optional[SymmetryKind]:
    if not model_ref.startswith(ZOO_PREFIX):
        return None
    entry = zoo_repository.get(model_ref[len(ZOO_PREFIX):].partition("?")[0])
    return entry.symmetry if entry else None


@router.command("symcheck", help="Check a model against PT, CP, psH or TRS† on quasi-random momenta")
@model_option
@click.option("--symmetry", type=click.Choice(SYMMETRY_CHOICES), default=None,
              help="Symmetry kind [default: the zoo entry's declared symmetry]")
@click.option("--generator", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="JSON file with the unitary generator [default: the tabulated one]")
@click.option("--samples", type=click.IntRange(min=1), default=settings.SYMMETRY_SAMPLES, show_default=True)
@click.option("--tol", type=click.FloatRange(min=0), default=settings.SYMMETRY_TOL, show_default=True)
@click.option("--seed", type=int, default=settings.HALTON_SEED, show_default=True, help="Halton scramble seed")
@out_option
@click.pass_context
@handle_errors
def symcheck(ctx: click.Context, model_ref: str, symmetry: Optional[str], generator: Optional[Path],
             samples: int, tol: float, seed: int, out: Optional[Path]):
    started = time.perf_counter()
    model = model_service.load(model_ref)
    kind = SymmetryKind(symmetry) if symmetry else _declared_symmetry(model_ref)
    if kind is None:
        raise InvalidArgumentException.single(
            ["symmetry"], "model declares no symmetry; pass --symmetry", "missing_symmetry"
        )
    if generator is not None:
        spec = SymmetrySpec(kind=kind, generator=ModelValidator.validate_generator_file(generator, model.n))
    else:
        spec = symmetry_service.default_spec(kind, model.n)

    result = symmetry_service.verify_symmetry(model, spec, samples, tol, seed)
    manifest = build_manifest(ctx, model, started, {"samples": result.samples})
    output_writer.write_json(result, manifest, out)
    if not result.passed:
        logger.warning(f"{kind.value} check failed: max residual {result.max_residual:.3e} > {tol:.1e}")
        raise click.exceptions.Exit(1)


@router.command("zoo-list", help="List the built-in models with their defaults and declared symmetry")
@out_option
@click.pass_context
@handle_errors
def zoo_list(ctx: click.Context, out: Optional[Path]):
    started = time.perf_counter()
    entries = []
    for entry in zoo_repository.all():
        generator = None
        if entry.symmetry is not None:
            generator = symmetry_service.default_spec(entry.symmetry, entry.n).generator
        entries.append({
            "name": entry.name,
            "bands": entry.n,
            "defaults": entry.defaults,
            "symmetry": entry.symmetry,
            "generator": generator,
            "published": entry.published,
            "description": entry.description,
        })
    output_writer.write_json(entries, build_manifest(ctx, None, started, {"models": len(entries)}), out)
