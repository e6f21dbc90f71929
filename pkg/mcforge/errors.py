"""Exception types raised by the samplers, estimators and experiment runner"""
from typing import Any


class ErrorMcforge(Exception):
    pass


class ErrorParameter(ErrorMcforge, ValueError):
    pass


class ErrorShape(ErrorMcforge, ValueError):
    pass


class ErrorLookup(ErrorMcforge, LookupError):
    pass


class ErrorCapability(ErrorMcforge):
    """the operation needs something the object does not provide (e.g. a gradient)"""


class ErrorDomain(ErrorMcforge, ValueError):
    """a point lies outside the support where the operation is defined"""


class ErrorEnvelopeViolation(ErrorMcforge):
    """p(y) > M g(y) was observed for a proposal y"""

    def __init__(self, point: Any, log_ratio: float):
        self.point = point
        self.log_ratio = log_ratio
        super().__init__(
            "envelope violated at y={}: log p(y) - log M g(y) = {}".format(point, log_ratio)
        )


class ErrorDegenerateSample(ErrorMcforge):
    pass


class ErrorNumeric(ErrorMcforge):
    pass


class ErrorInitialization(ErrorMcforge):
    pass


class ErrorBudgetExhausted(ErrorMcforge):
    pass


class ErrorUndefinedEstimate(ErrorMcforge):
    pass


class ErrorDegenerateSeries(ErrorMcforge):
    pass


class ErrorStreamExhausted(ErrorMcforge):
    pass
