"""The six lowering passes.

Each pass maps a valid program AST to a simpler, equivalent AST:

  1. gate-structure:  GateBlocks become Events; composite gate calls are
                      macro-expanded into layered event sequences
  2. gate-layer:      remaining pulse-level gate calls become their
                      timing-layer bodies (no GateCall/GateBlock remain)
  3. functions:       FunctionCalls are inlined (only Events/Actions remain)
  4. flatten:         relative start times are solved; each segment becomes
                      one time-sorted sequence of single-action events
  5. solve:           symbolic expressions are solved against the snapshot;
                      times are quantized to 0.5 ns ticks
  6. channelize:      composite actions split into one action per engine
                      parameter on fully qualified channels

Every intermediate serializes to schema-valid XML and passes lint.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .. import elements as el
from .. import expressions as ex
from ..caldb import CalibrationSnapshot
from ..channels import ACTION_PARAM_DIMS, ChannelRegistry
from ..errors import (
    CompileError,
    Diagnostic,
    NegativeTime,
    ParameterNotOnChannel,
    RecursionLimit,
    TickQuantizationError,
    UnknownChannel,
    UnknownGate,
)
from ..stdlib import Registry
from ..units import TIME, Quantity, dims_name, seconds_to_ticks

MAX_GATE_DEPTH = 16
MAX_FUNCTION_DEPTH = 64
TICK_WARN_RESIDUAL = 0.01

_ZERO_NS = ex.lit(0, "ns")


@dataclass
class PassContext:
    """Shared pass inputs: definitions, snapshot, machine, warning sink."""

    definitions: Registry
    snapshot: CalibrationSnapshot | None = None
    channels: ChannelRegistry | None = None
    strict_ticks: bool = False
    warnings: list[Diagnostic] = field(default_factory=list)

    def warn(self, message: str, path: str = "") -> None:
        self.warnings.append(Diagnostic("warning", message, path))

    @property
    def calculations(self) -> dict[str, ex.Expression]:
        return self.definitions.calculation_exprs()

    def evaluate(self, expr: ex.Expression) -> Quantity | bool:
        if self.snapshot is None:
            return ex.evaluate(expr, calculations=self.calculations)
        return ex.evaluate(expr, self.snapshot, self.calculations)


# -- pass 1: gate structure ----------------------------------------------------


def _is_composite(gate: el.GateDefinition) -> bool:
    return any(isinstance(item, (el.GateCall, el.GateBlock)) for item in gate.body)


# Chained gate blocks start one tick after the previous content ends: the
# boundary writes (previous pulse off, next pulse on) can land on the same
# engine, and one engine executes one instruction per timestamp.
BLOCK_CHAIN_GAP = ex.lit(0.5, "ns")


def _since_last(items: tuple) -> el.Event:
    return el.Event(el.StartTime(BLOCK_CHAIN_GAP, "since-last-action"), items)


def _at_block_start(items: tuple) -> el.Event:
    return el.Event(el.StartTime(_ZERO_NS, "absolute"), items)


def _expand_composite(call: el.GateCall, ctx: PassContext, depth: int) -> el.Event:
    """A composite gate becomes an event holding its layered body."""
    if depth > MAX_GATE_DEPTH:
        raise RecursionLimit(f"gate expansion exceeds depth {MAX_GATE_DEPTH}")
    gate = ctx.definitions.gates.get(call.name)
    if gate is None:
        raise UnknownGate(f"unknown gate {call.name!r} (headers incomplete?)")
    bindings = ctx.definitions.gate_bindings(gate, call.qubits, call.arguments)
    from ..stdlib import bind_gate_item

    bound = tuple(bind_gate_item(item, bindings) for item in gate.body)
    items: list[el.EventItem] = []
    for item in bound:
        if isinstance(item, el.GateBlock):
            items.append(_block_to_event(item, ctx, depth + 1))
        elif isinstance(item, el.GateCall):
            items.append(_since_last((_member_event(item, ctx, depth + 1),)))
        elif isinstance(item, el.Event):
            items.append(_expand_in_event(item, ctx, depth + 1))
        else:  # FunctionCall
            items.append(item)
    return el.Event(el.StartTime(_ZERO_NS, "absolute"), tuple(items))


def _member_event(item: el.GateItem, ctx: PassContext, depth: int) -> el.Event:
    """Each block member starts at the block start (simultaneously)."""
    if depth > MAX_GATE_DEPTH:
        raise RecursionLimit(f"gate expansion exceeds depth {MAX_GATE_DEPTH}")
    if isinstance(item, el.GateBlock):
        return _at_block_start(tuple(_member_event(m, ctx, depth + 1) for m in item.items))
    gate = ctx.definitions.gates.get(item.name)
    if gate is None:
        raise UnknownGate(f"unknown gate {item.name!r} (headers incomplete?)")
    if _is_composite(gate):
        return _expand_composite(item, ctx, depth + 1)
    return _at_block_start((item,))


def _block_to_event(block: el.GateBlock, ctx: PassContext, depth: int) -> el.Event:
    return _since_last(tuple(_member_event(m, ctx, depth + 1) for m in block.items))


def _expand_in_event(event: el.Event, ctx: PassContext, depth: int) -> el.Event:
    items: list[el.EventItem] = []
    for item in event.items:
        if isinstance(item, el.Event):
            items.append(_expand_in_event(item, ctx, depth))
        elif isinstance(item, el.GateCall):
            gate = ctx.definitions.gates.get(item.name)
            if gate is None:
                raise UnknownGate(f"unknown gate {item.name!r} (headers incomplete?)")
            if _is_composite(gate):
                items.append(_expand_composite(item, ctx, depth + 1))
            else:
                items.append(item)
        else:
            items.append(item)
    return el.Event(event.start_time, tuple(items))


def pass_gate_structure(ast: el.Experiment, ctx: PassContext) -> el.Experiment:
    segments = []
    for segment in ast.program.segments:
        items: list = []
        for item in segment.items:
            if isinstance(item, el.GateBlock):
                items.append(_block_to_event(item, ctx, 0))
            else:
                items.append(_expand_in_event(item, ctx, 0))
        segments.append(el.Segment(segment.name, tuple(items), segment.decision))
    return _with_program(ast, segments)


# -- pass 2: remove the gate layer -----------------------------------------------


def _inline_pulse_gates(event: el.Event, ctx: PassContext) -> el.Event:
    items: list[el.EventItem] = []
    for item in event.items:
        if isinstance(item, el.Event):
            items.append(_inline_pulse_gates(item, ctx))
        elif isinstance(item, el.GateCall):
            gate = ctx.definitions.gates.get(item.name)
            if gate is None:
                raise UnknownGate(f"unknown gate {item.name!r} (headers incomplete?)")
            if _is_composite(gate):
                raise CompileError(
                    f"composite gate {item.name!r} survived the gate-structure pass"
                )
            bindings = ctx.definitions.gate_bindings(gate, item.qubits, item.arguments)
            from ..stdlib import bind_gate_item

            for body_item in gate.body:
                items.append(bind_gate_item(body_item, bindings))
        else:
            items.append(item)
    return el.Event(event.start_time, tuple(items))


def pass_gate_layer(ast: el.Experiment, ctx: PassContext) -> el.Experiment:
    segments = []
    for segment in ast.program.segments:
        items: list = []
        for item in segment.items:
            if isinstance(item, el.GateBlock):
                raise CompileError("GateBlock survived the gate-structure pass")
            items.append(_inline_pulse_gates(item, ctx))
        segments.append(el.Segment(segment.name, tuple(items), segment.decision))
    return _with_program(ast, segments)


def expand_gates(ast: el.Experiment, ctx: PassContext) -> el.Experiment:
    """Both gate passes composed: the result has no GateCall/GateBlock."""
    return pass_gate_layer(pass_gate_structure(ast, ctx), ctx)


# -- pass 3: expand function calls ------------------------------------------------


def _expand_functions_in_event(event: el.Event, ctx: PassContext, depth: int) -> el.Event:
    if depth > MAX_FUNCTION_DEPTH:
        raise RecursionLimit(f"function expansion exceeds depth {MAX_FUNCTION_DEPTH}")
    items: list[el.EventItem] = []
    for item in event.items:
        if isinstance(item, el.Event):
            items.append(_expand_functions_in_event(item, ctx, depth))
        elif isinstance(item, el.FunctionCall):
            body = ctx.definitions.resolve_function(item.name, item.arguments)
            for body_event in body:
                items.append(_expand_functions_in_event(body_event, ctx, depth + 1))
        elif isinstance(item, el.GateCall):
            raise CompileError("GateCall survived the gate passes")
        else:
            items.append(item)
    return el.Event(event.start_time, tuple(items))


def pass_functions(ast: el.Experiment, ctx: PassContext) -> el.Experiment:
    segments = []
    for segment in ast.program.segments:
        items = tuple(
            _expand_functions_in_event(item, ctx, 0)  # type: ignore[arg-type]
            for item in segment.items
        )
        segments.append(el.Segment(segment.name, items, segment.decision))
    return _with_program(ast, segments)


# -- pass 4: flatten into a single timeline ---------------------------------------


@dataclass
class _Placement:
    time_s: float
    seq: int
    channel: str
    action: el.Action


class _Flattener:
    def __init__(self, ctx: PassContext):
        self.ctx = ctx
        self.placed: list[_Placement] = []
        self.seq = 0

    def _eval_time(self, expr: ex.Expression, what: str) -> float:
        value = self.ctx.evaluate(expr)
        if isinstance(value, bool) or value.dims != TIME:
            got = "boolean" if isinstance(value, bool) else dims_name(value.dims)
            raise CompileError(f"{what} must be a time, got {got}")
        return value.si

    def _emit(self, time_s: float, channel: str, action: el.Action) -> None:
        if time_s < -1e-15:
            raise NegativeTime(
                f"action on {channel} resolves to {time_s * 1e9:.6g} ns,"
                " before the segment start"
            )
        self.placed.append(_Placement(max(time_s, 0.0), self.seq, channel, action))
        self.seq += 1

    def place_children(self, own_start: float,
                       items: tuple[el.EventItem, ...]) -> float:
        """Place an event's items; returns the max action time in the subtree."""
        last_action_max = -1.0  # none yet
        prev_event_start: float | None = None
        for item in items:
            if isinstance(item, el.Event):
                mode = item.start_time.mode
                offset = self._eval_time(item.start_time.value, "start time")
                if mode == "absolute":
                    start = own_start + offset
                elif mode == "since-previous-event":
                    base = prev_event_start if prev_event_start is not None else own_start
                    start = base + offset
                else:  # since-last-action
                    base = last_action_max if last_action_max >= 0.0 else own_start
                    start = base + offset
                sub_max = self._place_event_at(item, start)
                prev_event_start = start
                last_action_max = max(last_action_max, sub_max)
            elif isinstance(item, el.MeasureAction):
                duration = self._eval_time(item.duration, "measure duration")
                self._emit(own_start, item.channel, el.CounterStart(
                    item.channel, item.resource,
                    item.threshold if item.threshold is not None else ex.lit(1, "count"),
                ))
                self._emit(own_start + duration, item.channel, el.CounterStop(item.channel))
                last_action_max = max(last_action_max, own_start + duration)
            elif isinstance(item, el.ACTION_TYPES):
                self._emit(own_start, item.channel, item)  # type: ignore[union-attr]
                last_action_max = max(last_action_max, own_start)
            else:
                raise CompileError(f"{type(item).__name__} survived earlier passes")
        return last_action_max

    def _place_event_at(self, event: el.Event, start: float) -> float:
        sub_max = self.place_children(start, event.items)
        return sub_max if sub_max >= 0.0 else start

    def run_segment(self, segment: el.Segment) -> el.Segment:
        self.placed = []
        self.seq = 0
        last_action_max = -1.0
        prev_event_start: float | None = None
        for item in segment.items:
            if not isinstance(item, el.Event):
                raise CompileError(f"{type(item).__name__} survived earlier passes")
            mode = item.start_time.mode
            offset = self._eval_time(item.start_time.value, "start time")
            if mode == "absolute":
                start = offset
            elif mode == "since-previous-event":
                base = prev_event_start if prev_event_start is not None else 0.0
                start = base + offset
            else:
                base = last_action_max if last_action_max >= 0.0 else 0.0
                start = base + offset
            sub_max = self._place_event_at(item, start)
            prev_event_start = start
            last_action_max = max(last_action_max, sub_max)
        ordered = sorted(self.placed, key=lambda p: (p.time_s, p.channel, p.seq))
        items = tuple(
            el.Event(
                el.StartTime(ex.lit(p.time_s * 1e9, "ns"), "absolute"),
                (p.action,),
            )
            for p in ordered
        )
        return el.Segment(segment.name, items, segment.decision)


def pass_flatten(ast: el.Experiment, ctx: PassContext) -> el.Experiment:
    flattener = _Flattener(ctx)
    segments = [flattener.run_segment(s) for s in ast.program.segments]
    return _with_program(ast, segments)


# -- pass 5: solve symbols, quantize ticks -----------------------------------------


def _quantize(time_s: float, ctx: PassContext, what: str) -> int:
    tick, residual = seconds_to_ticks(time_s)
    if abs(residual) > TICK_WARN_RESIDUAL:
        message = (
            f"{what} {time_s * 1e9:.6g} ns is {tick + residual:.6g} ticks,"
            f" rounded to {tick} (residual {residual:+.3g} ticks)"
        )
        if ctx.strict_ticks:
            raise TickQuantizationError(message)
        ctx.warn(message)
    if tick < 0:
        raise NegativeTime(f"{what} quantizes to negative tick {tick}")
    return tick


def _solve_to_literal(expr: ex.Expression, ctx: PassContext, what: str) -> ex.Literal:
    value = ctx.evaluate(expr)
    if isinstance(value, bool):
        raise CompileError(f"{what} must be numeric, got a boolean")
    return ex.Literal(value)


def _solve_action(action: el.Action, ctx: PassContext) -> el.Action:
    if isinstance(action, el.DDSAction):
        return el.DDSAction(
            action.channel,
            tuple((n, _solve_to_literal(e, ctx, n)) for n, e in action.parameters),
            action.interp_type,
        )
    if isinstance(action, el.CounterStart):
        threshold = action.threshold if action.threshold is not None else ex.lit(1, "count")
        return el.CounterStart(action.channel, action.resource,
                               _solve_to_literal(threshold, ctx, "threshold"))
    if isinstance(action, el.CounterStop):
        return action
    if isinstance(action, el.TTLSet):
        return el.TTLSet(action.channel, _solve_to_literal(action.level, ctx, "level"))
    raise CompileError(f"{type(action).__name__} survived flattening")


def pass_solve(ast: el.Experiment, ctx: PassContext) -> el.Experiment:
    segments = []
    for segment in ast.program.segments:
        items = []
        for item in segment.items:
            assert isinstance(item, el.Event) and len(item.items) == 1
            start = ctx.evaluate(item.start_time.value)
            assert not isinstance(start, bool)
            tick = _quantize(start.si, ctx, "start time")
            action = _solve_action(item.items[0], ctx)  # type: ignore[arg-type]
            items.append(el.Event(
                el.StartTime(ex.lit(tick, "tick"), "absolute"), (action,)
            ))
        decision = segment.decision
        if decision is not None and decision.threshold is not None:
            decision = el.Decision(
                decision.resources, decision.conditions,
                _solve_to_literal(decision.threshold, ctx, "decision threshold"),
            )
        segments.append(el.Segment(segment.name, tuple(items), decision))
    return _with_program(ast, segments)


# -- pass 6: channelize -------------------------------------------------------------


def _registry_param(ctx: PassContext, channel: str, param: str):
    assert ctx.channels is not None
    descriptor = ctx.channels.get(channel)
    if descriptor is None:
        raise UnknownChannel(f"channel {channel!r} is not in the machine registry")
    spec = descriptor.param(param)
    if spec is None:
        raise ParameterNotOnChannel(
            f"channel {channel!r} ({descriptor.kind}) has no parameter {param!r}"
        )
    return spec


def _check_value(ctx: PassContext, channel: str, param: str, value: Quantity) -> None:
    spec = _registry_param(ctx, channel, param)
    want = ACTION_PARAM_DIMS[param]
    if value.dims != want:
        raise CompileError(
            f"{channel}.{param}: value has dims {dims_name(value.dims)},"
            f" parameter expects {dims_name(want)}"
        )
    if not (spec.low <= value.si <= spec.high):
        ctx.warn(
            f"{channel}.{param}: value {value.si:.6g} outside range"
            f" [{spec.low:.6g}, {spec.high:.6g}] (clamped at execution)"
        )


def pass_channelize(ast: el.Experiment, ctx: PassContext) -> el.Experiment:
    if ctx.channels is None:
        raise CompileError("channelize requires a machine channel registry")
    segments = []
    for segment in ast.program.segments:
        items: list[el.Event] = []
        for item in segment.items:
            assert isinstance(item, el.Event) and len(item.items) == 1
            action = item.items[0]
            if isinstance(action, el.DDSAction):
                if action.interp_type not in (None, "polynomial"):
                    raise CompileError(f"unsupported interp_type {action.interp_type!r}")
                for name, expr in action.parameters:
                    assert isinstance(expr, ex.Literal)
                    _check_value(ctx, action.channel, name, expr.quantity)
                    items.append(el.Event(item.start_time, (
                        el.DDSAction(action.channel, ((name, expr),), None),
                    )))
            elif isinstance(action, el.CounterStart):
                _registry_param(ctx, action.channel, "gate")
                items.append(item)  # already a single engine parameter
            elif isinstance(action, el.CounterStop):
                _registry_param(ctx, action.channel, "gate")
                items.append(item)
            elif isinstance(action, el.TTLSet):
                assert isinstance(action.level, ex.Literal)
                _check_value(ctx, action.channel, "level", action.level.quantity)
                items.append(item)
            else:
                raise CompileError(f"{type(action).__name__} survived earlier passes")
        segments.append(el.Segment(segment.name, tuple(items), segment.decision))
    return _with_program(ast, segments)


# -- plumbing -------------------------------------------------------------------


def _with_program(ast: el.Experiment, segments: list[el.Segment]) -> el.Experiment:
    return el.Experiment(
        program=el.Program(tuple(segments)),
        resources=ast.resources,
        initial_setup=ast.initial_setup,
        headers=ast.headers,
        definitions=ast.definitions,
    )


PASS_NAMES = (
    "gate-structure",
    "gate-layer",
    "functions",
    "flatten",
    "solve",
    "channelize",
)

_PASS_FUNCTIONS = {
    "gate-structure": pass_gate_structure,
    "gate-layer": pass_gate_layer,
    "functions": pass_functions,
    "flatten": pass_flatten,
    "solve": pass_solve,
    "channelize": pass_channelize,
}


def run_pass(name: str, ast: el.Experiment, ctx: PassContext) -> el.Experiment:
    return _PASS_FUNCTIONS[name](ast, ctx)
