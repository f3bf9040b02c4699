"""Exception types shared across the package."""

from __future__ import annotations

from typing import Any


class RatingError(ValueError):
    """Invalid input to a rating computation."""


class RangeViolation(RatingError):
    """A value falls outside the range where a formula is valid."""


class ParseError(RatingError):
    """A record or priors file could not be parsed.

    Attributes:
        line: 1-based line number of the offending line, when known.
    """

    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConvergenceError(RuntimeError):
    """An iterative solver hit its iteration cap.

    Attributes:
        last: the last iterate (a rating, a mapping, or a result object).
        iterations: number of iterations performed.
    """

    def __init__(self, message: str, last: Any, iterations: int) -> None:
        super().__init__(message)
        self.last = last
        self.iterations = iterations
