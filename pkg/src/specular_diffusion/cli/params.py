"""Custom `click` parameters."""

from typing import Any

from click import Context, Parameter, ParamType
from click.shell_completion import CompletionItem

from ..geometry import Domain


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(part) for part in text.replace(" ", "").split(",") if part)


class FloatListParam(ParamType):
    """Comma-separated list of floats, e.g. ``0.4,0.2,0.1``."""

    name = "floats"

    def convert(
        self,
        value: str | tuple[float, ...] | None,
        param: Parameter | None,
        context: Context | None,
    ) -> tuple[float, ...] | None:
        if value is None or isinstance(value, tuple):
            return value
        try:
            values = _floats(value)
        except ValueError:
            self.fail(
                f"Expected comma-separated numbers, got '{value}'", param, context
            )
        if not values:
            self.fail("Expected at least one number", param, context)
        return values


class IntListParam(ParamType):
    """Comma-separated list of integers, e.g. ``100000,300000``."""

    name = "ints"

    def convert(
        self,
        value: str | tuple[int, ...] | None,
        param: Parameter | None,
        context: Context | None,
    ) -> tuple[int, ...] | None:
        if value is None or isinstance(value, tuple):
            return value
        try:
            values = tuple(int(number) for number in _floats(value))
        except ValueError:
            self.fail(
                f"Expected comma-separated integers, got '{value}'", param, context
            )
        if not values:
            self.fail("Expected at least one integer", param, context)
        return values


class VectorParam(ParamType):
    """A point or velocity written as comma-separated components, e.g. ``0.5,0``."""

    name = "vector"

    def convert(
        self,
        value: str | tuple[float, ...] | None,
        param: Parameter | None,
        context: Context | None,
    ) -> tuple[float, ...] | None:
        if value is None or isinstance(value, tuple):
            return value
        try:
            vector = _floats(value)
        except ValueError:
            self.fail(f"Invalid vector: '{value}'", param, context)
        if len(vector) not in (2, 3):
            self.fail(
                f"Vectors need 2 or 3 components, got '{value}'", param, context
            )
        return vector


DOMAIN_NAMES = ("unit-ball", "ball", "ellipse", "ellipsoid")
DOMAIN_FORMS = "unit-ball, ball:<r>, ellipse:<a>,<b>[,<c>]"


class DomainParam(ParamType):
    """Domain description: ``unit-ball``, ``ball:<radius>`` or ``ellipse:<a>,<b>``.

    A third semi-axis makes an ellipsoid. Converts to a config table; the
    dimension is supplied separately.
    """

    name = "domain"

    def convert(
        self,
        value: str | dict[str, Any] | None,
        param: Parameter | None,
        context: Context | None,
    ) -> dict[str, Any] | None:
        if value is None or isinstance(value, dict):
            return value
        name, _, arguments = value.partition(":")
        try:
            numbers = _floats(arguments)
        except ValueError:
            self.fail(f"Invalid domain parameters in '{value}'", param, context)
        match name:
            case "unit-ball" if not numbers:
                config: dict[str, Any] = {"kind": "unit-ball"}
            case "ball" if len(numbers) <= 1:
                config = {
                    "kind": "level-set",
                    "builtin": "ball",
                    "radius": numbers[0] if numbers else 1.0,
                }
            case "ellipse" | "ellipsoid" if len(numbers) in (2, 3):
                config = {
                    "kind": "level-set",
                    "builtin": name,
                    "semi_axes": list(numbers),
                }
            case _:
                self.fail(
                    f"Invalid domain: '{value}'. Valid forms: {DOMAIN_FORMS}",
                    param,
                    context,
                )
        dim = len(config.get("semi_axes", ())) or 2
        try:
            Domain.from_config({"dim": dim, **config})
        except ValueError as error:
            self.fail(str(error), param, context)
        return config

    def shell_complete(
        self, context: Context, param: Parameter, incomplete: str
    ) -> list[CompletionItem]:
        return [
            CompletionItem(name) for name in DOMAIN_NAMES if name.startswith(incomplete)
        ]
