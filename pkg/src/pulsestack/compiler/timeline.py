"""Typed view of a fully lowered program: delay-stamped parameter writes,
measurement windows, and decisions, per segment."""
from __future__ import annotations

from dataclasses import dataclass

from .. import elements as el
from .. import expressions as ex
from ..errors import CompileError
from ..units import Quantity, TICK_SECONDS


@dataclass(frozen=True)
class PlacedAction:
    """One engine-parameter write at an integer tick."""

    tick: int
    channel: str
    parameter: str
    value: float  # SI
    seq: int


@dataclass(frozen=True)
class MeasurementWindow:
    """A counter gate open/close pair bound to a resource slot."""

    channel: str
    resource: str  # normalized "name[index]"
    threshold: int  # counts
    start_tick: int
    stop_tick: int
    ordinal: int  # n-th window on this channel within the segment


@dataclass(frozen=True)
class SegmentTimeline:
    name: str
    actions: tuple[PlacedAction, ...]
    windows: tuple[MeasurementWindow, ...]
    decision: el.Decision | None

    @property
    def end_tick(self) -> int:
        return max((a.tick for a in self.actions), default=0)


@dataclass(frozen=True)
class FlatTimeline:
    segments: tuple[SegmentTimeline, ...]

    def engines(self) -> list[str]:
        names = {
            f"{a.channel}.{a.parameter}"
            for segment in self.segments
            for a in segment.actions
        }
        return sorted(names)


def _literal_value(expr: ex.Expression, what: str) -> Quantity:
    if not isinstance(expr, ex.Literal):
        raise CompileError(f"{what} is still symbolic after the solve pass")
    return expr.quantity


def _event_tick(event: el.Event) -> int:
    q = _literal_value(event.start_time.value, "start time")
    ticks = q.si / TICK_SECONDS
    tick = round(ticks)
    if abs(ticks - tick) > 1e-6:
        raise CompileError(f"start time {q} is not tick-aligned")
    return int(tick)


def extract_timeline(ast: el.Experiment) -> FlatTimeline:
    """Read a channelized program into the typed timeline form."""
    segments = []
    for segment in ast.program.segments:
        actions: list[PlacedAction] = []
        open_windows: dict[str, tuple[int, str, int]] = {}
        windows: list[MeasurementWindow] = []
        per_channel_count: dict[str, int] = {}
        for seq, item in enumerate(segment.items):
            if not isinstance(item, el.Event) or len(item.items) != 1:
                raise CompileError("timeline extraction expects channelized events")
            tick = _event_tick(item)
            action = item.items[0]
            if isinstance(action, el.DDSAction):
                if len(action.parameters) != 1:
                    raise CompileError("composite DDSAction survived channelize")
                name, expr = action.parameters[0]
                actions.append(PlacedAction(
                    tick, action.channel, name, _literal_value(expr, name).si, seq
                ))
            elif isinstance(action, el.CounterStart):
                if action.channel in open_windows:
                    raise CompileError(
                        f"counter {action.channel} opened twice without a stop"
                        f" in segment {segment.name!r}"
                    )
                if action.resource is None:
                    raise CompileError(
                        f"counter start on {action.channel} has no resource binding"
                    )
                resource = str(el.ResourceRef.parse(action.resource))
                threshold = 1
                if action.threshold is not None:
                    threshold_q = _literal_value(action.threshold, "threshold")
                    threshold = int(round(threshold_q.si))
                open_windows[action.channel] = (tick, resource, threshold)
                actions.append(PlacedAction(tick, action.channel, "gate", 1.0, seq))
            elif isinstance(action, el.CounterStop):
                opened = open_windows.pop(action.channel, None)
                if opened is None:
                    raise CompileError(
                        f"counter {action.channel} stopped without a start"
                        f" in segment {segment.name!r}"
                    )
                start_tick, resource, threshold = opened
                ordinal = per_channel_count.get(action.channel, 0)
                per_channel_count[action.channel] = ordinal + 1
                windows.append(MeasurementWindow(
                    action.channel, resource, threshold, start_tick, tick, ordinal
                ))
                actions.append(PlacedAction(tick, action.channel, "gate", 0.0, seq))
            elif isinstance(action, el.TTLSet):
                actions.append(PlacedAction(
                    tick, action.channel, "level",
                    _literal_value(action.level, "level").si, seq,
                ))
            else:
                raise CompileError(f"{type(action).__name__} survived earlier passes")
        if open_windows:
            names = ", ".join(sorted(open_windows))
            raise CompileError(
                f"counter window(s) never stopped in segment {segment.name!r}: {names}"
            )
        segments.append(SegmentTimeline(
            segment.name, tuple(actions), tuple(windows), segment.decision
        ))
    return FlatTimeline(tuple(segments))
