import logging
import sys
from typing import Annotated, Sequence

import click
import typer
from pydantic import ValidationError

from app.cli import all_commands
from app.utils import ReidException, setup_logging


logger = logging.getLogger(__name__)

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")

app = typer.Typer(
    add_completion=False,
    no_args_is_help=True,
    help="Selective contrastive learning for unsupervised person re-identification.",
)


@app.callback()
def main(
        log_level: Annotated[str, typer.Option("--log-level", help="DEBUG, INFO, WARNING or ERROR")] = "INFO",
):
    level = log_level.upper()
    if level not in LOG_LEVELS:
        raise typer.BadParameter(f"unknown log level '{log_level}'", param_hint="--log-level")
    setup_logging(level)


for name, command in all_commands:
    app.command(name)(command)


def run_cli(argv: Sequence[str] | None = None) -> int:
    """Run one command and map failures onto exit codes (1 usage, 2 config, 3 data, 4 numerical)."""
    command = typer.main.get_command(app)
    try:
        result = command.main(args=list(argv) if argv is not None else None, prog_name="screid", standalone_mode=False)
    except click.UsageError as e:
        e.show()
        return 1
    except click.Abort:
        return 1
    except ValidationError as e:
        logger.error("Invalid configuration:\n%s", e)
        return 2
    except ReidException as e:
        logger.error("%s", e)
        return e.exit_code
    return result if isinstance(result, int) else 0


if __name__ == "__main__":
    sys.exit(run_cli())
