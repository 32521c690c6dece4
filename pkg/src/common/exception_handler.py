import functools

import typer

from src.common.exceptions import (
    ConfigException,
    ConstantRankViolationException,
    InvalidInputException,
    InvalidWitnessException,
    LiftException,
    NoDataException,
    NoDegeneracyException,
    NoPathologyException,
    NotConvergedException,
    RetractionFailureException,
    SamplerExhaustedException,
    WitnessSearchFailedException,
)
from src.common.logger import get_logger

logger = get_logger(__name__)

EXIT_UNEXPECTED = 1
EXIT_BAD_INPUT = 2
EXIT_NO_DATA = 3
EXIT_NUMERICAL = 4

EXIT_CODES: dict[type[LiftException], int] = {
    ConfigException: EXIT_BAD_INPUT,
    InvalidInputException: EXIT_BAD_INPUT,
    InvalidWitnessException: EXIT_BAD_INPUT,
    NoDegeneracyException: EXIT_BAD_INPUT,
    NoPathologyException: EXIT_BAD_INPUT,
    NoDataException: EXIT_NO_DATA,
    ConstantRankViolationException: EXIT_NUMERICAL,
    RetractionFailureException: EXIT_NUMERICAL,
    SamplerExhaustedException: EXIT_NUMERICAL,
    WitnessSearchFailedException: EXIT_NUMERICAL,
    NotConvergedException: EXIT_NUMERICAL,
}


def exit_code_for(exc: LiftException) -> int:
    for exc_type in type(exc).__mro__:
        if exc_type in EXIT_CODES:
            return EXIT_CODES[exc_type]
    return EXIT_NUMERICAL


def handle_cli_errors(command):
    """Map domain errors raised by a command onto exit codes."""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except typer.Exit:
            raise
        except LiftException as exc:
            code = exit_code_for(exc)
            logger.error(f"{type(exc).__name__}: {exc.detail}")
            typer.echo(f"Error: {exc.detail}", err=True)
            raise typer.Exit(code=code)
        except Exception:
            logger.exception("Unexpected error occurred.")
            typer.echo("Something went wrong. Check the logs for more details.", err=True)
            raise typer.Exit(code=EXIT_UNEXPECTED)

    return wrapper
