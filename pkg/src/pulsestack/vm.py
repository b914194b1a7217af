"""Deterministic simulator of the per-parameter execution engines.

Every engine runs its own delay-stamped instruction stream on a shared
2 GHz tick clock. SETVALUE drives the bound action core; BRANCHLUT
stalls until the measurement it names is published (stop tick plus the
broadcast latency), then every engine jumps coherently to its own
offset for the destination segment.
"""
from __future__ import annotations

import heapq
import json
import math
import random
import struct
from dataclasses import dataclass, field
from pathlib import Path

from .channels import ChannelRegistry, builtin_registry as builtin_channels
from .compiler.backend import CompiledProgram, DecisionTable, HALT_TARGET, MeasurementSite
from .errors import BudgetExceeded, MalformedTable, PlanExhausted, VmError
from .units import TICK_SECONDS

DEFAULT_SAMPLE_CLOCK_HZ = 1.0e9
DEFAULT_INSTRUCTION_CAP = 10_000_000

TRACE_KINDS = ("value-set", "branch-taken", "measurement-published", "loop-iteration", "halt")


@dataclass(frozen=True)
class TraceEvent:
    tick: int
    engine: str  # engine name, or "global" for coherent transitions
    kind: str
    payload: dict

    def line(self) -> str:
        return "\t".join([
            str(self.tick), self.engine, self.kind,
            json.dumps(self.payload, sort_keys=True, separators=(",", ":")),
        ])

    @classmethod
    def from_line(cls, line: str) -> "TraceEvent":
        tick, engine, kind, payload = line.rstrip("\n").split("\t", 3)
        return cls(int(tick), engine, kind, json.loads(payload))


# -- measurement plans -----------------------------------------------------------


class _SiteSource:
    def draw(self, key: str) -> int:  # pragma: no cover
        raise NotImplementedError


class _ScriptedSource(_SiteSource):
    def __init__(self, counts: list[int], cycle: bool):
        self.counts = counts
        self.cycle = cycle
        self.cursor = 0

    def draw(self, key: str) -> int:
        if self.cursor >= len(self.counts):
            if not self.cycle:
                raise PlanExhausted(f"scripted outcomes for {key!r} ran out")
            self.cursor = 0
        value = self.counts[self.cursor]
        self.cursor += 1
        return int(value)


class _SeededSource(_SiteSource):
    def __init__(self, seed: int, distribution: str, **params: float):
        self.rng = random.Random(seed)
        self.distribution = distribution
        self.params = params

    def draw(self, key: str) -> int:
        if self.distribution == "poisson":
            # Knuth's method; means here are small (photon counts).
            mean = float(self.params.get("mean", 1.0))
            limit = math.exp(-mean)
            k, p = 0, 1.0
            while True:
                p *= self.rng.random()
                if p <= limit:
                    return k
                k += 1
        if self.distribution == "uniform":
            low = int(self.params.get("low", 0))
            high = int(self.params.get("high", 1))
            return self.rng.randint(low, high)
        raise VmError(f"unknown distribution {self.distribution!r} for {key!r}")


def _make_source(spec: dict) -> _SiteSource:
    if "counts" in spec:
        return _ScriptedSource([int(c) for c in spec["counts"]], bool(spec.get("cycle", False)))
    if "seed" in spec:
        return _SeededSource(
            int(spec["seed"]),
            str(spec.get("distribution", "poisson")),
            **{k: v for k, v in spec.items() if k in ("mean", "low", "high")},
        )
    raise VmError(f"measurement plan entry needs 'counts' or 'seed': {spec!r}")


class MeasurementPlan:
    """Scripted or seeded raw counts per measurement site.

    Sites resolve by resource slot (e.g. "m[1]"), then by "site:<id>",
    then fall back to the default entry (all-zero counts).
    """

    def __init__(self, spec: dict | None = None):
        spec = spec or {}
        self.latency_ticks = int(spec.get("latency_ticks", 0))
        self._site_specs: dict[str, dict] = dict(spec.get("sites", {}))
        self._default_spec: dict = spec.get("default", {"counts": [0], "cycle": True})
        self._sources: dict[str, _SiteSource] = {}

    @classmethod
    def load(cls, path: str | Path) -> "MeasurementPlan":
        return cls(json.loads(Path(path).read_text(encoding="utf-8")))

    def _source_for(self, site: MeasurementSite) -> tuple[str, _SiteSource]:
        for key in (site.resource, f"site:{site.id}"):
            if key in self._site_specs:
                if key not in self._sources:
                    self._sources[key] = _make_source(self._site_specs[key])
                return key, self._sources[key]
        key = f"default:{site.resource}"
        if key not in self._sources:
            self._sources[key] = _make_source(self._default_spec)
        return key, self._sources[key]

    def draw(self, site: MeasurementSite) -> int:
        key, source = self._source_for(site)
        return source.draw(key)


# -- action cores -----------------------------------------------------------------


@dataclass
class _Anchor:
    tick: int
    base: float
    slope: float  # volts per DDS sample


class DDSCore:
    """Parameter-level model of one DDS: static values plus the linear
    amplitude interpolator (value at sample n after load is p0 + p1*n)."""

    def __init__(self, channel: str, sample_clock_hz: float,
                 amp_range: tuple[float, float] | None):
        self.channel = channel
        self.sample_clock_hz = sample_clock_hz
        self.amp_range = amp_range
        self.frequency = 0.0
        self.phase = 0.0
        self._anchors: list[_Anchor] = [_Anchor(0, 0.0, 0.0)]
        self._pending_p1: float | None = None

    def set_parameter(self, name: str, value: float, tick: int) -> None:
        if name == "frequency":
            self.frequency = value
        elif name == "phase":
            self.phase = value
        elif name == "amplitude":
            self._anchors.append(_Anchor(tick, value, 0.0))
        elif name == "interp_p0":
            slope = self._slope_at(tick)
            self._anchors.append(_Anchor(tick, value, slope))
        elif name == "interp_p1":
            last = self._anchors[-1]
            base = last.base if last.tick == tick else self._raw_value(tick)
            self._anchors.append(_Anchor(tick, base, value))

    def _slope_at(self, tick: int) -> float:
        last = self._anchors[-1]
        return last.slope if last.tick == tick else 0.0

    def _anchor_before(self, tick: int) -> _Anchor:
        best = self._anchors[0]
        for a in self._anchors:
            if a.tick < tick:
                best = a
        return best

    def _raw_value(self, tick: int) -> float:
        a = self._anchor_before(tick)
        if a.slope == 0.0:
            return a.base
        samples = math.floor((tick - a.tick) * TICK_SECONDS * self.sample_clock_hz)
        return a.base + a.slope * samples

    def amplitude_at(self, tick: int) -> float:
        """Amplitude just before the instructions at ``tick`` execute."""
        value = self._raw_value(tick)
        if self.amp_range is not None:
            low, high = self.amp_range
            value = min(max(value, low), high)
        return value

    def waveform(self, start_tick: int, stop_tick: int, points: int = 101) -> list[tuple[int, float]]:
        if points < 2 or stop_tick <= start_tick:
            return [(start_tick, self.amplitude_at(start_tick))]
        step = (stop_tick - start_tick) / (points - 1)
        return [
            (t, self.amplitude_at(t))
            for t in (round(start_tick + i * step) for i in range(points))
        ]


class CounterCore:
    def __init__(self, channel: str):
        self.channel = channel
        self.gate_open = False
        self.open_tick: int | None = None
        self.count = 0  # last drawn window count


class TTLCore:
    def __init__(self, channel: str):
        self.channel = channel
        self.level = 0.0


# -- the simulator -----------------------------------------------------------------


@dataclass
class RunResult:
    trace: list[TraceEvent]
    segments_visited: list[str]
    resources: dict[str, int]  # resource slot -> last thresholded bit
    counts: dict[str, int]  # resource slot -> last raw count
    cores: dict[str, object]
    final_tick: int
    executed: dict[str, int]

    def value_set_events(self) -> list[TraceEvent]:
        return [e for e in self.trace if e.kind == "value-set"]

    def dds_core(self, channel: str) -> DDSCore:
        core = self.cores[channel]
        assert isinstance(core, DDSCore)
        return core


class _Engine:
    __slots__ = (
        "name", "stream", "pc", "time", "loop", "halted", "stalled_table",
        "stall_tick", "segment", "executed", "window_ordinals",
    )

    def __init__(self, name: str, stream):
        self.name = name
        self.stream = stream
        self.pc = 0
        self.time = 0  # tick of the last executed instruction / transfer
        self.loop = 0
        self.halted = not stream
        self.stalled_table: DecisionTable | None = None
        self.stall_tick = 0
        self.segment = 0
        self.executed = 0
        self.window_ordinals: dict[str, int] = {}

    def fire_tick(self) -> int:
        return self.time + self.stream[self.pc].delay


def run(
    compiled: CompiledProgram,
    plan: MeasurementPlan | None = None,
    budget: int = 200_000_000,
    channels: ChannelRegistry | None = None,
    sample_clock_hz: float = DEFAULT_SAMPLE_CLOCK_HZ,
    instruction_cap: int = DEFAULT_INSTRUCTION_CAP,
) -> RunResult:
    """Execute a compiled program to completion within a tick budget."""
    if budget <= 0:
        raise BudgetExceeded("tick budget must be positive")
    plan = plan or MeasurementPlan()
    channels = channels or builtin_channels()

    engines = [_Engine(name, compiled.streams[name]) for name in compiled.engines]
    by_name = {e.name: e for e in engines}
    trace: list[TraceEvent] = []
    reference = engines[0] if engines else None
    segments_visited: list[str] = []
    if engines and compiled.segment_names:
        segments_visited.append(compiled.segment_names[0])

    # Engine name -> (channel, parameter); cores per channel.
    cores: dict[str, object] = {}
    engine_channel: dict[str, tuple[str, str]] = {}
    for name in compiled.engines:
        channel, parameter = name.rsplit(".", 1)
        engine_channel[name] = (channel, parameter)
        if channel not in cores:
            descriptor = channels.get(channel)
            kind = descriptor.kind if descriptor is not None else (
                "counter" if parameter == "gate" else "ttl" if parameter == "level" else "dds"
            )
            if kind == "dds":
                amp_range = None
                if descriptor is not None:
                    spec = descriptor.param("amplitude")
                    if spec is not None:
                        amp_range = (spec.low, spec.high)
                cores[channel] = DDSCore(channel, sample_clock_hz, amp_range)
            elif kind == "counter":
                cores[channel] = CounterCore(channel)
            else:
                cores[channel] = TTLCore(channel)

    sites_by_key = {(s.segment, s.channel, s.ordinal): s for s in compiled.sites}
    tables = {t.id: t for t in compiled.tables}
    published: dict[int, list[tuple[int, int]]] = {s.id: [] for s in compiled.sites}
    consumed: dict[tuple[str, int], int] = {}
    pending: list[tuple[int, int, int, int]] = []  # (publish tick, seq, site id, count)
    publish_seq = 0
    resources: dict[str, int] = {}
    raw_counts: dict[str, int] = {}
    final_tick = 0

    def offsets_to_segment(engine: _Engine) -> dict[int, int]:
        return {pc: i for i, pc in enumerate(compiled.segment_offsets[engine.name])}

    reverse_offsets = {e.name: offsets_to_segment(e) for e in engines}

    def enter_segment(engine: _Engine, segment: int, via: str, tick: int) -> None:
        engine.segment = segment
        engine.window_ordinals = {}
        if engine is reference:
            name = compiled.segment_names[segment]
            segments_visited.append(name)
            trace.append(TraceEvent(tick, "global", "branch-taken",
                                    {"to": name, "via": via}))

    def table_ready(engine: _Engine, table: DecisionTable) -> bool:
        return all(
            len(published[site_id]) > consumed.get((engine.name, site_id), 0)
            for site_id in table.bits
        )

    def resolve_branch(engine: _Engine, table: DecisionTable, tick: int) -> None:
        bits = []
        for site_id, threshold in zip(table.bits, table.thresholds):
            idx = consumed.get((engine.name, site_id), 0)
            _, count = published[site_id][idx]
            consumed[(engine.name, site_id)] = idx + 1
            bits.append("1" if count >= threshold else "0")
        key = "".join(bits)
        target = table.target_for(key)
        engine.time = tick
        engine.stalled_table = None
        if target == HALT_TARGET:
            engine.halted = True
            trace.append(TraceEvent(tick, engine.name, "branch-taken",
                                    {"key": key, "to": "halt"}))
            trace.append(TraceEvent(tick, engine.name, "halt", {}))
            return
        engine.pc = compiled.segment_offsets[engine.name][target]
        trace.append(TraceEvent(tick, engine.name, "branch-taken",
                                {"key": key, "to": compiled.segment_names[target]}))
        if engine is reference:
            enter_segment(engine, target, "branchlut", tick)
        else:
            engine.segment = target
            engine.window_ordinals = {}

    def close_window(engine: _Engine, channel: str, tick: int) -> None:
        nonlocal publish_seq
        core = cores[channel]
        assert isinstance(core, CounterCore)
        if not core.gate_open:
            return
        core.gate_open = False
        ordinal = engine.window_ordinals.get(channel, 0)
        engine.window_ordinals[channel] = ordinal + 1
        site = sites_by_key.get((engine.segment, channel, ordinal))
        if site is None:
            return
        count = plan.draw(site)
        core.count = count
        bit = 1 if count >= site.threshold else 0
        resources[site.resource] = bit
        raw_counts[site.resource] = count
        heapq.heappush(pending, (tick + plan.latency_ticks, publish_seq, site.id, count))
        publish_seq += 1

    def execute(engine: _Engine, tick: int) -> None:
        nonlocal final_tick
        op = engine.stream[engine.pc]
        engine.executed += 1
        if engine.executed > instruction_cap:
            raise BudgetExceeded(
                f"engine {engine.name} exceeded the {instruction_cap}-instruction cap"
            )
        final_tick = max(final_tick, tick)
        engine.time = tick
        mnemonic = op.mnemonic
        if mnemonic == "SETVALUE":
            value = compiled.values[op.operand]
            channel, parameter = engine_channel[engine.name]
            trace.append(TraceEvent(tick, engine.name, "value-set", {"value": value}))
            core = cores[channel]
            if isinstance(core, DDSCore):
                core.set_parameter(parameter, value, tick)
            elif isinstance(core, CounterCore):
                if value >= 0.5 and not core.gate_open:
                    core.gate_open = True
                    core.open_tick = tick
                elif value < 0.5:
                    close_window(engine, channel, tick)
            else:
                core.level = value  # type: ignore[union-attr]
            engine.pc += 1
        elif mnemonic == "NOP":
            engine.pc += 1
        elif mnemonic == "SETLOOP":
            engine.loop = op.operand
            engine.pc += 1
        elif mnemonic == "DECLOOP":
            engine.loop = max(0, engine.loop - 1)
            engine.pc += 1
        elif mnemonic == "JNZ":
            if engine.loop != 0:
                trace.append(TraceEvent(tick, engine.name, "loop-iteration",
                                        {"remaining": engine.loop}))
                _jump(engine, op.operand, tick)
                return
            engine.pc += 1
        elif mnemonic == "JZ":
            if engine.loop == 0:
                trace.append(TraceEvent(tick, engine.name, "branch-taken",
                                        {"to_pc": op.operand}))
                _jump(engine, op.operand, tick)
                return
            engine.pc += 1
        elif mnemonic == "GOTO":
            trace.append(TraceEvent(tick, engine.name, "branch-taken",
                                    {"to_pc": op.operand}))
            _jump(engine, op.operand, tick)
            return
        elif mnemonic == "BRANCHLUT":
            table = tables.get(op.table)
            if table is None:
                raise MalformedTable(f"no decision table with id {op.table}")
            if table_ready(engine, table):
                resolve_branch(engine, table, tick)
            else:
                engine.stalled_table = table
                engine.stall_tick = tick
            return
        else:  # pragma: no cover
            raise VmError(f"unexpected mnemonic {mnemonic!r}")
        if engine.pc >= len(engine.stream):
            engine.halted = True
            trace.append(TraceEvent(tick, engine.name, "halt", {}))

    def _jump(engine: _Engine, pc: int, tick: int) -> None:
        if not 0 <= pc < len(engine.stream):
            raise VmError(f"jump target {pc} out of range on {engine.name}")
        engine.pc = pc
        segment = reverse_offsets[engine.name].get(pc)
        if segment is not None:
            if engine is reference:
                enter_segment(engine, segment, "goto", tick)
            else:
                engine.segment = segment
                engine.window_ordinals = {}

    # -- main loop --------------------------------------------------------------

    while True:
        runnable = [e for e in engines if not e.halted and e.stalled_table is None]
        candidates: list[int] = [e.fire_tick() for e in runnable]
        if pending:
            candidates.append(pending[0][0])
        if not candidates:
            stalled = [e for e in engines if e.stalled_table is not None]
            if stalled:
                raise MalformedTable(
                    f"engine {stalled[0].name} waits on a measurement that never publishes"
                )
            break  # all halted
        tick = min(candidates)
        if tick > budget:
            raise BudgetExceeded(f"tick {tick} exceeds the budget of {budget}")
        final_tick = max(final_tick, tick)
        # Publications first, so branches stalled at this tick can resolve.
        while pending and pending[0][0] == tick:
            _, _, site_id, count = heapq.heappop(pending)
            published[site_id].append((tick, count))
            site = compiled.sites[site_id]
            trace.append(TraceEvent(tick, site.channel + ".gate", "measurement-published",
                                    {"site": site_id, "resource": site.resource,
                                     "count": count, "bit": 1 if count >= site.threshold else 0}))
        for engine in sorted(engines, key=lambda e: e.name):
            if engine.stalled_table is not None and table_ready(engine, engine.stalled_table):
                resolve_branch(engine, engine.stalled_table, max(engine.stall_tick, tick))
        for engine in sorted(runnable, key=lambda e: e.name):
            if not engine.halted and engine.stalled_table is None and engine.fire_tick() == tick:
                execute(engine, tick)

    return RunResult(
        trace=trace,
        segments_visited=segments_visited,
        resources=resources,
        counts=raw_counts,
        cores=cores,
        final_tick=final_tick,
        executed={e.name: e.executed for e in engines},
    )


# -- trace serialization ------------------------------------------------------------


def write_trace(path: str | Path, events: list[TraceEvent]) -> None:
    Path(path).write_text("".join(e.line() + "\n" for e in events), encoding="utf-8")


def read_trace(path: str | Path) -> list[TraceEvent]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [TraceEvent.from_line(line) for line in lines if line]


_TRACE_MAGIC = b"QCTR"


def write_trace_binary(path: str | Path, events: list[TraceEvent]) -> None:
    """Compact binary trace: engine/kind string tables plus packed records."""
    engines = sorted({e.engine for e in events})
    engine_index = {name: i for i, name in enumerate(engines)}
    out = bytearray()
    out += _TRACE_MAGIC
    out += struct.pack("<H", 1)
    table = json.dumps(engines).encode()
    out += struct.pack("<I", len(table))
    out += table
    out += struct.pack("<I", len(events))
    for e in events:
        payload = json.dumps(e.payload, sort_keys=True, separators=(",", ":")).encode()
        out += struct.pack(
            "<QHBH", e.tick, engine_index[e.engine], TRACE_KINDS.index(e.kind), len(payload)
        )
        out += payload
    Path(path).write_bytes(bytes(out))


def read_trace_binary(path: str | Path) -> list[TraceEvent]:
    raw = Path(path).read_bytes()
    if raw[:4] != _TRACE_MAGIC:
        raise ValueError("not a binary trace file")
    offset = 6
    (table_len,) = struct.unpack_from("<I", raw, offset)
    offset += 4
    engines = json.loads(raw[offset : offset + table_len].decode())
    offset += table_len
    (count,) = struct.unpack_from("<I", raw, offset)
    offset += 4
    events = []
    for _ in range(count):
        tick, engine_i, kind_i, payload_len = struct.unpack_from("<QHBH", raw, offset)
        offset += struct.calcsize("<QHBH")
        payload = json.loads(raw[offset : offset + payload_len].decode())
        offset += payload_len
        events.append(TraceEvent(tick, engines[engine_i], TRACE_KINDS[kind_i], payload))
    return events
