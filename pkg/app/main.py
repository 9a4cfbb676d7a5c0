import logging
import sys
import click
from app.core.config import settings
from app.controllers import analysis_controller, symmetry_controller

# Collect the controller groups into one flat command set
cli = click.CommandCollection(
    name="epfinder",
    sources=[analysis_controller.router, symmetry_controller.router],
    help=settings.APP_DESCRIPTION,
)


def configure_logging(level: str = settings.LOG_LEVEL) -> None:
    logging.basicConfig(
        level=level.upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def main() -> None:
    configure_logging()
    cli(prog_name="epfinder")


if __name__ == "__main__":
    main()
