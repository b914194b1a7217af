"""Opcode backend: turns a flat timeline into per-engine instruction
streams, decision lookup tables, and the versioned container format."""
from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field

from .. import elements as el
from ..errors import (
    CompileError,
    Diagnostic,
    DelayOverflow,
    FieldOverflow,
    MalformedTable,
    SimultaneousWrite,
)
from ..isa import DELAY_MAX, Opcode, WORD_BYTES, decode, encode
from .timeline import FlatTimeline, extract_timeline

HALT_TARGET = 0xFFFF  # table destination: stop every engine
IMEM_MAX = 1 << 20  # instructions per engine

MAGIC = b"QCPC"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class MeasurementSite:
    """A static measurement point: one counter window in one segment."""

    id: int
    segment: int
    channel: str
    ordinal: int  # n-th window on this channel within the segment
    resource: str
    threshold: int


@dataclass(frozen=True)
class DecisionTable:
    id: int
    bits: tuple[int, ...]  # measurement site ids, key order
    thresholds: tuple[int, ...]  # counts, per bit
    entries: tuple[tuple[str, int], ...]  # bitstring -> segment index / HALT_TARGET

    def target_for(self, key: str) -> int:
        for state, target in self.entries:
            if state == key:
                return target
        raise MalformedTable(f"table {self.id} has no entry for key {key!r}")


@dataclass
class CompiledProgram:
    """Per-engine opcode streams plus everything the engines share."""

    engines: tuple[str, ...]
    streams: dict[str, list[Opcode]]
    values: list[float]
    segment_names: tuple[str, ...]
    segment_offsets: dict[str, list[int]]  # engine -> pc of each segment
    segment_durations: list[int]  # ticks
    tables: list[DecisionTable]
    sites: list[MeasurementSite]
    metadata: dict[str, object] = field(default_factory=dict)

    def value_of(self, op: Opcode) -> float:
        return self.values[op.operand]

    def instruction_counts(self) -> dict[str, int]:
        return {engine: len(stream) for engine, stream in self.streams.items()}

    # -- container io -------------------------------------------------------

    def to_bytes(self) -> bytes:
        meta = {
            "engines": list(self.engines),
            "segment_names": list(self.segment_names),
            "segment_offsets": {e: self.segment_offsets[e] for e in self.engines},
            "segment_durations": self.segment_durations,
            "tables": [
                {
                    "id": t.id,
                    "bits": list(t.bits),
                    "thresholds": list(t.thresholds),
                    "entries": {state: target for state, target in t.entries},
                }
                for t in self.tables
            ],
            "sites": [
                {
                    "id": s.id,
                    "segment": s.segment,
                    "channel": s.channel,
                    "ordinal": s.ordinal,
                    "resource": s.resource,
                    "threshold": s.threshold,
                }
                for s in self.sites
            ],
            "metadata": self.metadata,
        }
        meta_blob = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode()
        out = bytearray()
        out += MAGIC
        out += struct.pack("<HH", FORMAT_VERSION, 0)
        out += struct.pack("<I", len(meta_blob))
        out += meta_blob
        out += struct.pack("<I", len(self.values))
        out += struct.pack(f"<{len(self.values)}d", *self.values)
        out += struct.pack("<I", len(self.engines))
        for engine in self.engines:
            blob = encode(self.streams[engine])
            out += struct.pack("<I", len(blob) // WORD_BYTES)
            out += blob
        return bytes(out)

    @classmethod
    def from_bytes(cls, raw: bytes) -> "CompiledProgram":
        view = memoryview(raw)
        if bytes(view[:4]) != MAGIC:
            raise ValueError("not a compiled program container (bad magic)")
        version, _ = struct.unpack_from("<HH", view, 4)
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported container version {version}")
        (meta_len,) = struct.unpack_from("<I", view, 8)
        offset = 12
        meta = json.loads(bytes(view[offset : offset + meta_len]).decode())
        offset += meta_len
        (n_values,) = struct.unpack_from("<I", view, offset)
        offset += 4
        values = list(struct.unpack_from(f"<{n_values}d", view, offset))
        offset += 8 * n_values
        (n_engines,) = struct.unpack_from("<I", view, offset)
        offset += 4
        engines = tuple(meta["engines"])
        if n_engines != len(engines):
            raise ValueError("engine count mismatch")
        streams: dict[str, list[Opcode]] = {}
        for engine in engines:
            (n_words,) = struct.unpack_from("<I", view, offset)
            offset += 4
            blob = bytes(view[offset : offset + n_words * WORD_BYTES])
            offset += n_words * WORD_BYTES
            streams[engine] = decode(blob)
        tables = [
            DecisionTable(
                t["id"], tuple(t["bits"]), tuple(t["thresholds"]),
                tuple(sorted(t["entries"].items())),
            )
            for t in meta["tables"]
        ]
        sites = [
            MeasurementSite(
                s["id"], s["segment"], s["channel"], s["ordinal"],
                s["resource"], s["threshold"],
            )
            for s in meta["sites"]
        ]
        return cls(
            engines=engines,
            streams=streams,
            values=values,
            segment_names=tuple(meta["segment_names"]),
            segment_offsets={e: list(v) for e, v in meta["segment_offsets"].items()},
            segment_durations=list(meta["segment_durations"]),
            tables=tables,
            sites=sites,
            metadata=meta["metadata"],
        )


class _ValuePool:
    def __init__(self):
        self.values: list[float] = []
        self._index: dict[float, int] = {}

    def index(self, value: float) -> int:
        # 0.0 and -0.0 hash equal; normalize so the pool is deterministic.
        if value == 0.0:
            value = 0.0
        got = self._index.get(value)
        if got is None:
            got = len(self.values)
            self.values.append(value)
            self._index[value] = got
        return got


def _pad_delay(stream: list[Opcode], gap: int) -> int:
    """Split an oversized delay into leading NOP padding; returns remainder."""
    while gap > DELAY_MAX:
        stream.append(Opcode.nop(DELAY_MAX))
        gap -= DELAY_MAX
        if len(stream) > IMEM_MAX:
            raise DelayOverflow("instruction memory bound exceeded by delay padding")
    return gap


def emit_opcodes(
    source: el.Experiment | FlatTimeline,
    warnings: list[Diagnostic] | None = None,
    repeats: int = 1,
    metadata: dict[str, object] | None = None,
) -> CompiledProgram:
    """Lower a channelized program (or its timeline) to opcode streams."""
    timeline = source if isinstance(source, FlatTimeline) else extract_timeline(source)
    warn_sink = warnings if warnings is not None else []

    segment_names = tuple(s.name for s in timeline.segments)
    segment_index = {name: i for i, name in enumerate(segment_names)}
    engines = tuple(timeline.engines())

    # Assign measurement site ids in (segment, window order) and build tables.
    sites: list[MeasurementSite] = []
    site_by_slot: dict[tuple[int, str], MeasurementSite] = {}
    for seg_i, segment in enumerate(timeline.segments):
        for window in sorted(segment.windows, key=lambda w: (w.start_tick, w.channel)):
            site = MeasurementSite(
                id=len(sites),
                segment=seg_i,
                channel=window.channel,
                ordinal=window.ordinal,
                resource=window.resource,
                threshold=window.threshold,
            )
            sites.append(site)
            site_by_slot[(seg_i, window.resource)] = site

    tables: list[DecisionTable] = []
    branch_for_segment: dict[int, DecisionTable] = {}
    for seg_i, segment in enumerate(timeline.segments):
        decision = segment.decision
        if decision is None:
            continue
        bits: list[int] = []
        thresholds: list[int] = []
        override = None
        if decision.threshold is not None:
            from .. import expressions as ex

            assert isinstance(decision.threshold, ex.Literal)
            override = int(round(decision.threshold.quantity.si))
        for ref in decision.resources:
            site = site_by_slot.get((seg_i, str(ref)))
            if site is None:
                raise CompileError(
                    f"decision in segment {segment.name!r} reads {ref},"
                    " which is not measured in that segment"
                )
            bits.append(site.id)
            thresholds.append(override if override is not None else site.threshold)
        entries: dict[str, int] = {}
        for cond in decision.conditions:
            entries[cond.state] = segment_index[cond.destination_segment]
        width = len(decision.resources)
        for n in range(1 << width):
            key = format(n, f"0{width}b")
            if key not in entries:
                entries[key] = HALT_TARGET
                warn_sink.append(Diagnostic(
                    "warning",
                    f"decision in segment {segment.name!r} has no condition for"
                    f" outcome {key!r}; completed with a halt target",
                    f"/Experiment/Program/Segment[{seg_i}]/Decision",
                ))
        table = DecisionTable(
            id=len(tables),
            bits=tuple(bits),
            thresholds=tuple(thresholds),
            entries=tuple(sorted(entries.items())),
        )
        tables.append(table)
        branch_for_segment[seg_i] = table

    # Per-engine action map: engine -> segment -> [(tick, value, seq)].
    per_engine: dict[str, list[list[tuple[int, float, int]]]] = {
        e: [[] for _ in timeline.segments] for e in engines
    }
    for seg_i, segment in enumerate(timeline.segments):
        seen_ticks: dict[tuple[str, int], int] = {}
        for a in segment.actions:
            engine = f"{a.channel}.{a.parameter}"
            key = (engine, a.tick)
            if key in seen_ticks:
                raise SimultaneousWrite(
                    f"two writes to {engine} at tick {a.tick}"
                    f" in segment {segment.name!r}"
                )
            seen_ticks[key] = a.seq
            per_engine[engine][seg_i].append((a.tick, a.value, a.seq))

    pool = _ValuePool()
    streams: dict[str, list[Opcode]] = {}
    segment_offsets: dict[str, list[int]] = {}
    durations = [s.end_tick for s in timeline.segments]
    loop = repeats > 1

    for engine in engines:
        stream: list[Opcode] = []
        offsets: list[int] = []
        if loop:
            stream.append(Opcode.setloop(0, repeats))
        for seg_i, segment in enumerate(timeline.segments):
            offsets.append(len(stream))
            cursor = 0
            for tick, value, _ in sorted(per_engine[engine][seg_i]):
                gap = _pad_delay(stream, tick - cursor)
                stream.append(Opcode.setvalue(gap, pool.index(value)))
                cursor = tick
            tail_gap = _pad_delay(stream, durations[seg_i] - cursor)
            table = branch_for_segment.get(seg_i)
            last = seg_i == len(timeline.segments) - 1
            if table is not None:
                if table.bits and table.bits[0] >= (1 << 8):
                    raise FieldOverflow("measurement id exceeds the 8-bit operand")
                stream.append(Opcode.branchlut(tail_gap, table.bits[0] if table.bits else 0,
                                               table.id))
            elif not last:
                # Fall through to the next segment in document order.
                stream.append(Opcode.goto(tail_gap, len(stream) + 1))
            elif loop:
                stream.append(Opcode.decloop(tail_gap))
                stream.append(Opcode.jnz(0, 1))
                stream.append(Opcode.nop(0))
            else:
                stream.append(Opcode.nop(tail_gap))
            if len(stream) > IMEM_MAX:
                raise DelayOverflow("instruction memory bound exceeded")
        # A branch on the final segment leaves the stream ending in
        # BRANCHLUT; add a terminal NOP so every stream ends in one.
        if timeline.segments and branch_for_segment.get(len(timeline.segments) - 1) is not None:
            stream.append(Opcode.nop(0))
        streams[engine] = stream
        segment_offsets[engine] = offsets

    return CompiledProgram(
        engines=engines,
        streams=streams,
        values=pool.values,
        segment_names=segment_names,
        segment_offsets=segment_offsets,
        segment_durations=durations,
        tables=tables,
        sites=sites,
        metadata=dict(metadata or {}),
    )


def source_digest(canonical_xml: str) -> str:
    return hashlib.sha256(canonical_xml.encode("utf-8")).hexdigest()
