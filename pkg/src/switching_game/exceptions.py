"""Errors raised by the switching-game solver."""

from __future__ import annotations

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from switching_game.model import ValidationReport


class SwitchingGameError(ValueError):
    """Base class for every error raised by this package."""


class SpecValidationError(SwitchingGameError):
    """A game specification violates the standing assumptions."""

    def __init__(self, message: str, report: ValidationReport | None = None) -> None:
        super().__init__(message)
        self.report = report


class ClassificationError(SwitchingGameError):
    """The cost pattern or the K ordering has no explicit solution."""


class ThresholdSolveError(SwitchingGameError):
    """A free-boundary equation could not be solved."""


class BreakpointError(SwitchingGameError):
    """A derivative was requested too close to a piece boundary."""


class HittingError(SwitchingGameError):
    """Invalid barriers, a singular recursion or an empty search grid."""
