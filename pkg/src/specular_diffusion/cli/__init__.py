"""Code common to modules in this package."""

from collections.abc import Iterator
from contextlib import contextmanager
from sys import exit
from typing import Any, NoReturn

import rich_click as click
from rich import print

USAGE_EXIT_CODE = 1
"""Exit code for malformed command lines."""

FAILURE_EXIT_CODE = 2
"""Exit code for violated contracts and failed verdicts."""


def fail(message: str) -> NoReturn:
    """Print `message` and exit with FAILURE_EXIT_CODE."""
    print(f":thumbs_down: [red]{message}[/]")
    exit(FAILURE_EXIT_CODE)


@contextmanager
def usage_exit_code() -> Iterator[None]:
    """Re-raise click usage errors with USAGE_EXIT_CODE."""
    try:
        yield
    except click.UsageError as error:
        error.exit_code = USAGE_EXIT_CODE
        raise


class Command(click.RichCommand):
    """click.Command subclass exiting with USAGE_EXIT_CODE on bad arguments."""

    def parse_args(self, context: click.Context, args: list[str]) -> list[str]:
        with usage_exit_code():
            return super().parse_args(context, args)


class Group(click.RichGroup):
    """click.Group subclass listing commands in declaration order."""

    command_class = Command

    def list_commands(self, context: click.Context) -> list[str]:
        """List commands in declaration order."""
        return list(self.commands)

    def parse_args(self, context: click.Context, args: list[str]) -> list[str]:
        with usage_exit_code():
            return super().parse_args(context, args)

    def resolve_command(self, context: click.Context, args: list[str]) -> Any:
        with usage_exit_code():
            return super().resolve_command(context, args)
