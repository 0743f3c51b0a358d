"""Exception types raised across the package."""

from __future__ import annotations


class ParameterError(ValueError):
    """A constructor or operation received an invalid parameter."""


class DomainError(ValueError):
    """An input element lies outside the declared domain."""


class IncompatibleSketchError(ValueError):
    """Two sketches built from different parameters or seeds were combined."""


class StrictTurnstileError(ValueError):
    """A stream prefix drove some edge multiplicity below zero."""

    def __init__(self, position: int, edge: tuple[int, int], multiplicity: int) -> None:
        self.position = position
        self.edge = edge
        self.multiplicity = multiplicity
        super().__init__(
            f"update {position} drives edge {edge} to multiplicity {multiplicity}"
        )


class StreamParseError(ValueError):
    """A stream file line could not be parsed."""

    def __init__(self, line_number: int, line: str, reason: str) -> None:
        self.line_number = line_number
        self.line = line
        super().__init__(f"line {line_number}: {reason}: {line!r}")


class BudgetError(RuntimeError):
    """An exhaustive search exceeded its size or node budget."""
