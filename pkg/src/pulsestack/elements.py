"""Typed AST for the control language.

One frozen dataclass per language element, mirroring the XML wire form
1:1. Trees are immutable after construction and safe to share.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Union

from .expressions import Expression

START_TIME_MODES = ("absolute", "since-previous-event", "since-last-action")
DEFAULT_START_MODE = "since-previous-event"

_CHANNEL_RE = re.compile(r"^channels(\.[A-Za-z_][A-Za-z0-9_]*)+$")
_CHANNEL_TEMPLATE_RE = re.compile(r"^channels(\.(?:[A-Za-z_][A-Za-z0-9_]*|\{[A-Za-z_][A-Za-z0-9_]*\}|[A-Za-z_][A-Za-z0-9_]*\{[A-Za-z_][A-Za-z0-9_]*\}[A-Za-z0-9_]*))+$")


def channel_name_ok(name: str, allow_templates: bool = False) -> bool:
    """Check the dotted channel grammar; templates hold {param} segments."""
    if _CHANNEL_RE.match(name):
        return True
    return bool(allow_templates and _CHANNEL_TEMPLATE_RE.match(name))


@dataclass(frozen=True)
class ResourceRef:
    """A resource slot reference, written ``name`` or ``name[index]``."""

    name: str
    index: int = 0

    def __str__(self) -> str:
        return f"{self.name}[{self.index}]"

    @classmethod
    def parse(cls, text: str) -> "ResourceRef":
        m = re.fullmatch(r"([A-Za-z_][A-Za-z0-9_-]*)(?:\[(\d+)\])?", text.strip())
        if not m:
            raise ValueError(f"bad resource reference {text!r}")
        return cls(m.group(1), int(m.group(2) or 0))

    @classmethod
    def parse_list(cls, text: str) -> tuple["ResourceRef", ...]:
        return tuple(cls.parse(part) for part in text.split())


@dataclass(frozen=True)
class StartTime:
    value: Expression
    mode: str = DEFAULT_START_MODE

    def __post_init__(self):
        if self.mode not in START_TIME_MODES:
            raise ValueError(f"bad start time mode {self.mode!r}")


@dataclass(frozen=True)
class DDSAction:
    """Set one or more oscillator parameters on a DDS channel at an instant."""

    channel: str
    parameters: tuple[tuple[str, Expression], ...]  # ordered (name, expr)
    interp_type: str | None = None

    PARAMETER_NAMES = ("amplitude", "frequency", "phase", "interp_p0", "interp_p1")

    def parameter_map(self) -> dict[str, Expression]:
        return dict(self.parameters)


@dataclass(frozen=True)
class CounterStart:
    # resource stays a raw string: inside definition bodies it may be a
    # {param} template, resolved to a ResourceRef at expansion time.
    channel: str
    resource: str | None = None
    threshold: Expression | None = None


@dataclass(frozen=True)
class CounterStop:
    channel: str


@dataclass(frozen=True)
class MeasureAction:
    """Composite photon-count measurement: open a counter window, close it
    after ``duration``, threshold the count into a resource slot."""

    channel: str
    resource: str
    duration: Expression
    threshold: Expression | None = None


@dataclass(frozen=True)
class TTLSet:
    channel: str
    level: Expression


Action = Union[DDSAction, CounterStart, CounterStop, MeasureAction, TTLSet]
ACTION_TYPES = (DDSAction, CounterStart, CounterStop, MeasureAction, TTLSet)


@dataclass(frozen=True)
class Argument:
    """A call argument: an expression value or a resource reference."""

    name: str
    value: Expression | None = None
    ref: str | None = None


@dataclass(frozen=True)
class FunctionCall:
    name: str
    arguments: tuple[Argument, ...] = ()


@dataclass(frozen=True)
class Event:
    """A timed container of actions, calls, and nested events.

    GateCall items are admitted too: the gate and timing layers mix
    freely, and the compiler's gate-structure pass leaves pulse-level
    gate calls inside events until the gate layer is removed.
    """

    start_time: StartTime
    items: tuple["EventItem", ...] = ()


EventItem = Union[Action, FunctionCall, "GateCall", Event]


@dataclass(frozen=True)
class QubitBinding:
    # Concrete calls carry an index; calls inside definition bodies may
    # instead carry ref=<enclosing port name>, bound at expansion.
    index: int | None = None
    port: str | None = None
    ref: str | None = None

    def __post_init__(self):
        if (self.index is None) == (self.ref is None):
            raise ValueError("qubit binding needs exactly one of index or ref")


@dataclass(frozen=True)
class GateCall:
    name: str
    qubits: tuple[QubitBinding, ...] = ()
    arguments: tuple[Argument, ...] = ()


@dataclass(frozen=True)
class GateBlock:
    """Time-implicit container; member gates start simultaneously."""

    items: tuple["GateItem", ...] = ()


GateItem = Union[GateCall, GateBlock]


@dataclass(frozen=True)
class Condition:
    state: str  # bitstring, e.g. "0", "1", "01"
    destination_segment: str


@dataclass(frozen=True)
class Decision:
    """End-of-segment branch on thresholded measurement outcomes."""

    resources: tuple[ResourceRef, ...]
    conditions: tuple[Condition, ...]
    threshold: Expression | None = None


@dataclass(frozen=True)
class Segment:
    name: str
    items: tuple[Union[Event, GateBlock], ...] = ()
    decision: Decision | None = None
    # Index the decision appeared at in the source when it was NOT the
    # final element; lint reports it. Excluded from equality.
    decision_position: int | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Program:
    segments: tuple[Segment, ...] = ()


RESOURCE_KINDS = ("counter", "generic")


@dataclass(frozen=True)
class ResourceDecl:
    name: str
    kind: str = "counter"
    length: int = 1

    def __post_init__(self):
        if self.kind not in RESOURCE_KINDS:
            raise ValueError(f"bad resource kind {self.kind!r}")
        if self.length < 1:
            raise ValueError("resource length must be positive")


@dataclass(frozen=True)
class InitialSetup:
    use_predefined: str | None = None
    parameters: tuple[tuple[str, Expression], ...] = ()


HEADER_KINDS = ("gate", "function", "calculation")


@dataclass(frozen=True)
class HeaderDecl:
    name: str
    kind: str

    def __post_init__(self):
        if self.kind not in HEADER_KINDS:
            raise ValueError(f"bad header kind {self.kind!r}")


@dataclass(frozen=True)
class ParameterDecl:
    """A typed definition parameter; dimension names a physical dimension."""

    name: str
    dimension: str = "dimensionless"
    default: Expression | None = None


@dataclass(frozen=True)
class GateDefinition:
    name: str
    ports: tuple[str, ...]
    body: tuple[Union[GateCall, GateBlock, FunctionCall, Event], ...]
    parameters: tuple[ParameterDecl, ...] = ()
    duration: Expression | None = None

    @property
    def arity(self) -> int:
        return len(self.ports)


@dataclass(frozen=True)
class FunctionDefinition:
    name: str
    body: tuple[Event, ...]
    parameters: tuple[ParameterDecl, ...] = ()


@dataclass(frozen=True)
class CalculationDefinition:
    name: str
    expression: Expression


Definition = Union[GateDefinition, FunctionDefinition, CalculationDefinition]


@dataclass(frozen=True)
class Experiment:
    """Root of a program: resources, setup, headers, definitions, program."""

    program: Program
    resources: tuple[ResourceDecl, ...] = ()
    initial_setup: InitialSetup | None = None
    headers: tuple[HeaderDecl, ...] = ()
    definitions: tuple[Definition, ...] = ()

    def segment_names(self) -> list[str]:
        return [s.name for s in self.program.segments]

    def find_segment(self, name: str) -> Segment | None:
        for s in self.program.segments:
            if s.name == name:
                return s
        return None

    def resource_decl(self, name: str) -> ResourceDecl | None:
        for r in self.resources:
            if r.name == name:
                return r
        return None


def definition_kind(d: Definition) -> str:
    if isinstance(d, GateDefinition):
        return "gate"
    if isinstance(d, FunctionDefinition):
        return "function"
    return "calculation"
