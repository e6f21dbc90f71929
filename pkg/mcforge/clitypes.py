"""Implements custom click command line types"""

from typing import List

import click


class FloatList(click.ParamType):
    """comma-separated reals, e.g. 3.3,4.4"""

    name = "floats"

    def convert(self, value, param, ctx) -> List[float]:
        if isinstance(value, (list, tuple)):
            return [float(v) for v in value]
        text = str(value).strip()
        if text == "":
            return []
        try:
            return [float(v) for v in text.split(",")]
        except ValueError as e:
            self.fail("{} is not a comma-separated list of numbers: {}".format(value, str(e)))


class PositiveFloat(click.ParamType):
    name = "positive-float"

    def convert(self, value, param, ctx) -> float:
        try:
            number = float(value)
        except (TypeError, ValueError):
            self.fail("{} is not a number".format(value))
        if not number > 0:
            self.fail("{} must be positive".format(value))
        return number


class Probability(click.ParamType):
    """a real in (0, 1]"""

    name = "probability"

    def convert(self, value, param, ctx) -> float:
        try:
            number = float(value)
        except (TypeError, ValueError):
            self.fail("{} is not a number".format(value))
        if not 0 < number <= 1:
            self.fail("{} must lie in (0, 1]".format(value))
        return number


class ExperimentName(click.ParamType):
    name = "experiment"

    def __init__(self, names: List[str]):
        self.names = list(names)

    def convert(self, value, param, ctx) -> str:
        if value not in self.names:
            self.fail(
                "unknown experiment {!r}; known experiments: {}".format(
                    value, ", ".join(self.names)
                )
            )
        return value
