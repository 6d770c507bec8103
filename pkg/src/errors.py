"""
Custom exceptions raised by the flying hand simulator.

Every error derives from FlyingHandError so the command line can catch the
whole family in one place and map it to an exit code.
"""

from typing import List, Optional


class FlyingHandError(Exception):
    """Base class for all simulator errors."""


class ScenarioParseError(FlyingHandError):
    """
    The scenario text is not valid TOML.

    :param message: Parser message.
    :param line: 1-based line of the offending token, if known.
    :param column: 1-based column of the offending token, if known.
    """

    def __init__(
        self, message: str, line: Optional[int] = None, column: Optional[int] = None
    ):
        self.line = line
        self.column = column
        location = ""
        if line is not None:
            location = f" (line {line}, column {column})"
        super().__init__(f"{message}{location}")


class ScenarioValidationError(FlyingHandError):
    """The scenario parsed but one or more values are invalid."""

    def __init__(self, problems: List[str]):
        self.problems = list(problems)
        joined = "\n  - ".join(self.problems)
        super().__init__(f"{len(self.problems)} scenario problem(s):\n  - {joined}")


class AllocationError(FlyingHandError):
    """The propeller mixing matrix cannot be inverted."""


class DegenerateThrustError(FlyingHandError):
    """The commanded thrust vector has no usable direction (free-fall command)."""


class ContactGeometryError(FlyingHandError):
    """A contact was evaluated with an impossible geometry (e.g. negative depth)."""


class MissionStateError(FlyingHandError):
    """An operation was called in a mission phase where it is undefined."""


class MissionSequenceError(FlyingHandError):
    """Transition events arrived in an order the mission cannot follow."""


class SimulationDivergedError(FlyingHandError):
    """The integrated state left the admissible range."""

    def __init__(self, time: float, detail: str):
        self.time = time
        self.detail = detail
        super().__init__(f"simulation diverged at t={time:.4f} s: {detail}")


class EmptyTraceError(FlyingHandError):
    """An output was requested for a trace with no rows."""

    def __init__(self) -> None:
        super().__init__("no data")


class OutputWriteError(FlyingHandError):
    """Writing an output file failed."""

    def __init__(self, path: str, reason: str):
        self.path = path
        super().__init__(f"cannot write {path}: {reason}")
