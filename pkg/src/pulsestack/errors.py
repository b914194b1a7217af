"""Exception hierarchy and diagnostics shared across the toolchain."""
from __future__ import annotations

from dataclasses import dataclass


class PulsestackError(Exception):
    """Base class for all toolchain errors."""


# -- language frontend -------------------------------------------------------

class WellFormednessError(PulsestackError):
    """The input is not well-formed XML."""


class SchemaError(PulsestackError):
    """Unknown tag/attribute, wrong child cardinality, or bad attribute value."""


class ReferenceError_(PulsestackError):
    """A name (segment, resource, definition) does not resolve."""


# -- symbolic algebra ---------------------------------------------------------

class ExpressionError(PulsestackError):
    """Base class for expression evaluation failures."""


class UnresolvedName(ExpressionError):
    """A named constant or calculation is missing from the snapshot."""


class DimensionError(ExpressionError):
    """Operands have incompatible physical dimensions."""


class DivisionByZero(ExpressionError):
    pass


class TypeMismatch(ExpressionError):
    """Boolean and numeric subtrees mixed outside a comparison."""


# -- calibration store --------------------------------------------------------

class CalDbError(PulsestackError):
    pass


class UnknownName(CalDbError):
    pass


class NoRecordBefore(CalDbError):
    pass


class DimensionMismatch(CalDbError):
    pass


class DuplicateTimestamp(CalDbError):
    pass


# -- standard library ---------------------------------------------------------

class StdlibError(PulsestackError):
    pass


class UnknownGate(StdlibError):
    pass


class UnknownFunction(StdlibError):
    pass


class UnknownPort(StdlibError):
    pass


class ArityMismatch(StdlibError):
    pass


class MissingArgument(StdlibError):
    pass


# -- compiler -----------------------------------------------------------------

class CompileError(PulsestackError):
    """A lowering pass failed; carries the pass name and an element path."""

    def __init__(self, message: str, *, pass_name: str = "", path: str = ""):
        super().__init__(message)
        self.pass_name = pass_name
        self.path = path

    def __str__(self) -> str:  # noqa: D105
        prefix = f"[{self.pass_name}] " if self.pass_name else ""
        where = f" at {self.path}" if self.path else ""
        return f"{prefix}{super().__str__()}{where}"


class LintFailed(CompileError):
    pass


class RecursionLimit(CompileError):
    pass


class NegativeTime(CompileError):
    pass


class TickQuantizationError(CompileError):
    pass


class UnknownChannel(CompileError):
    pass


class ParameterNotOnChannel(CompileError):
    pass


class SimultaneousWrite(CompileError):
    """Two actions target the same engine parameter at the same tick."""


# -- ISA / virtual machine ----------------------------------------------------

class IsaError(PulsestackError):
    pass


class FieldOverflow(IsaError):
    pass


class UnknownMnemonic(IsaError):
    pass


class DelayOverflow(IsaError):
    """Instruction memory bound exceeded while splitting an oversized delay."""


class VmError(PulsestackError):
    pass


class BudgetExceeded(VmError):
    pass


class PlanExhausted(VmError):
    pass


class MalformedTable(VmError):
    pass


@dataclass(frozen=True)
class Diagnostic:
    """A lint finding: severity, human message, and an XPath-like element path."""

    severity: str  # "error" | "warning"
    message: str
    path: str

    def __str__(self) -> str:
        return f"{self.severity}: {self.message} ({self.path})"


def errors_only(diagnostics: list[Diagnostic]) -> list[Diagnostic]:
    return [d for d in diagnostics if d.severity == "error"]
