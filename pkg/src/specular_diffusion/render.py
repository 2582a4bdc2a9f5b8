"""Rich tables for study reports and per-snapshot diagnostics."""

from collections.abc import Callable, Iterable
from datetime import timedelta
from typing import Any, Protocol, TypeAlias, cast

from humanize import naturaldelta
from rich.console import RenderableType
from rich.protocol import is_renderable
from rich.table import Table

TableFieldGetter: TypeAlias = Callable[[Any], Any]
TableField: TypeAlias = tuple[str, TableFieldGetter]
TableFields: TypeAlias = Iterable[TableField]


class TableRenderable(Protocol):
    """Report rows that know their own columns."""

    @classmethod
    def __table_fields__(cls) -> TableFields:
        """(column label, getter) pairs; each getter maps a row to its cell."""
        ...


def to_table(
    row_type: type[TableRenderable],
    rows: Iterable[TableRenderable],
    title: str | None = None,
) -> Table:
    """One table row per element of `rows`, all of type `row_type`.

    Numeric cells are right-justified so that columns of estimates line up.
    """
    labels, getters = zip(*row_type.__table_fields__())
    table = Table(title=title)
    for label in labels:
        justify = "left" if label in ("ψ", "#") else "right"
        table.add_column(label, overflow="fold", justify=justify)
    for row in rows:
        table.add_row(*(_to_renderable(getter(row)) for getter in getters))
    return table


def pretty_duration(seconds: float) -> str:
    """Wall time in seconds alongside its human-readable form."""
    natural = naturaldelta(timedelta(seconds=seconds), minimum_unit="milliseconds")
    return f"{seconds:.2f}s ({natural})"


def _to_renderable(value: Any) -> RenderableType:
    if is_renderable(value):
        return cast(RenderableType, value)
    return str(value)
