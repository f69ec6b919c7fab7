"""Exception types shared across the package."""

from __future__ import annotations


class WarpflowError(Exception):
    """Base class for all package errors."""


class OutOfBand(WarpflowError, ValueError):
    """A radial value left the admissible band ``[r0, r_bar]``."""

    def __init__(self, value, r0, r_bar):
        self.value = float(value)
        self.r0 = float(r0)
        self.r_bar = float(r_bar)
        super().__init__(f"r = {self.value!r} outside band [{self.r0!r}, {self.r_bar!r}]")


class OutOfRange(WarpflowError, ValueError):
    """A volume argument lies outside ``[0, V(r_bar)]``."""


class NonFinite(WarpflowError, ArithmeticError):
    """NaN or Inf encountered in a field."""


class Unsupported(WarpflowError, NotImplementedError):
    """Operation not available for this kind of object."""


class InsufficientWindow(WarpflowError, ValueError):
    """Fewer than three states were supplied to a time-difference residual."""


class InsufficientData(WarpflowError, ValueError):
    """Not enough usable records for a fit."""


class ConditionsViolated(WarpflowError):
    """The warping profile fails the admissibility conditions for the declared K."""

    def __init__(self, report):
        self.report = report
        super().__init__(
            f"conditions violated for K={report.K!r}: "
            f"min Q={report.min_Q!r}, max Q={report.max_Q!r}"
        )


class ParseError(WarpflowError):
    """Malformed config line."""

    def __init__(self, line: int, message: str):
        self.line = line
        self.message = message
        super().__init__(f"line {line}: {message}")


class ValidationError(WarpflowError):
    """Config value rejected for a named key."""

    def __init__(self, key: str, message: str):
        self.key = key
        self.message = message
        super().__init__(f"{key}: {message}")


class ConfigError(WarpflowError):
    """Aggregate of every parse and validation problem found in a config."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(str(e) for e in self.errors))
