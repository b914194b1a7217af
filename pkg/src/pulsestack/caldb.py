"""Versioned calibration store: append-only history, date queries, snapshots.

The on-disk format is one JSON object per line: {"name", "value",
"units", "timestamp"} with an ISO-8601 timestamp. Undated records hold
experimental constants and sort before every dated record. The display
form YYYY-MM-DD-HH-MM is accepted on input and normalized.
"""
from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from datetime import datetime
from importlib import resources as importlib_resources
from pathlib import Path

from .errors import (
    DimensionMismatch,
    DuplicateTimestamp,
    NoRecordBefore,
    UnknownName,
    UnresolvedName,
)
from .expressions import DateSelector, SnapshotLike, format_timestamp, parse_timestamp
from .units import Quantity, lookup_unit


@dataclass(frozen=True)
class CalibrationRecord:
    """One dated value of a named machine parameter."""

    name: str
    value: float
    unit_symbol: str
    timestamp: datetime | None  # None marks an undated constant

    @property
    def quantity(self) -> Quantity:
        return Quantity(self.value, lookup_unit(self.unit_symbol))


def _ts_key(ts: datetime | None) -> tuple[int, datetime]:
    # Undated constants order before any dated record.
    return (0, datetime.min) if ts is None else (1, ts)


class CalibrationSnapshot(SnapshotLike):
    """Immutable view of the store at a reference time.

    Every name maps to its frozen history (records at or before the
    reference time), so per-constant date selectors still resolve
    without touching the live store.
    """

    def __init__(self, at: datetime, histories: dict[str, tuple[CalibrationRecord, ...]]):
        self.at = at
        self._histories = dict(histories)

    def names(self) -> list[str]:
        return sorted(self._histories)

    def __contains__(self, name: str) -> bool:
        return name in self._histories

    def get(self, name: str) -> Quantity:
        """Latest value at the snapshot's reference time."""
        return self.lookup(name, DateSelector())

    def lookup(self, name: str, selector: DateSelector) -> Quantity:
        history = self._histories.get(name)
        if not history:
            raise UnresolvedName(f"no calibration record for {name!r}")
        if selector.mode == "most-recent":
            return history[-1].quantity
        if selector.mode == "exact":
            for rec in history:
                if rec.timestamp == selector.at:
                    return rec.quantity
            raise UnresolvedName(
                f"{name!r} has no record at exactly {format_timestamp(selector.at)}"  # type: ignore[arg-type]
            )
        best = None
        for rec in history:
            if rec.timestamp is None or rec.timestamp <= selector.at:  # type: ignore[operator]
                best = rec
        if best is None:
            raise UnresolvedName(
                f"{name!r} has no record before {format_timestamp(selector.at)}"  # type: ignore[arg-type]
            )
        return best.quantity

    def as_dict(self) -> dict[str, Quantity]:
        return {name: hist[-1].quantity for name, hist in self._histories.items()}


class CalibrationStore:
    """Single-writer append-only store keyed by parameter name."""

    def __init__(self):
        self._histories: dict[str, list[CalibrationRecord]] = {}
        self._lock = threading.Lock()

    # -- queries ---------------------------------------------------------

    def names(self) -> list[str]:
        return sorted(self._histories)

    def query(self, name: str, selector: DateSelector = DateSelector()) -> CalibrationRecord:
        history = self._histories.get(name)
        if not history:
            raise UnknownName(f"unknown calibration name {name!r}")
        if selector.mode == "most-recent":
            return history[-1]
        if selector.mode == "exact":
            for rec in history:
                if rec.timestamp == selector.at:
                    return rec
            raise NoRecordBefore(
                f"{name!r} has no record at exactly {format_timestamp(selector.at)}"  # type: ignore[arg-type]
            )
        best = None
        for rec in history:
            if rec.timestamp is None or rec.timestamp <= selector.at:  # type: ignore[operator]
                best = rec
        if best is None:
            raise NoRecordBefore(
                f"{name!r} has no record before {format_timestamp(selector.at)}"  # type: ignore[arg-type]
            )
        return best

    def history(self, name: str) -> tuple[CalibrationRecord, ...]:
        return tuple(self._histories.get(name, ()))

    # -- mutation ----------------------------------------------------------

    def append(self, record: CalibrationRecord) -> None:
        with self._lock:
            history = self._histories.setdefault(record.name, [])
            if history:
                prior = history[0].quantity.dims
                if record.quantity.dims != prior:
                    raise DimensionMismatch(
                        f"{record.name!r}: new record has dims"
                        f" {record.quantity.dims}, history has {prior}"
                    )
                if any(r.timestamp == record.timestamp for r in history):
                    raise DuplicateTimestamp(
                        f"{record.name!r} already has a record at {record.timestamp}"
                    )
            history.append(record)
            history.sort(key=lambda r: _ts_key(r.timestamp))

    # -- snapshots -----------------------------------------------------------

    def latest_timestamp(self) -> datetime | None:
        stamps = [
            rec.timestamp
            for history in self._histories.values()
            for rec in history
            if rec.timestamp is not None
        ]
        return max(stamps) if stamps else None

    def snapshot(self, at: datetime | None = None) -> CalibrationSnapshot:
        """Freeze the store at a reference time.

        With no explicit time, the newest record timestamp is used so
        that repeated compiles of unchanged inputs are reproducible.
        """
        if at is None:
            at = self.latest_timestamp() or datetime.min
        frozen: dict[str, tuple[CalibrationRecord, ...]] = {}
        for name, history in self._histories.items():
            visible = tuple(
                rec for rec in history if rec.timestamp is None or rec.timestamp <= at
            )
            if visible:
                frozen[name] = visible
        return CalibrationSnapshot(at, frozen)

    # -- persistence --------------------------------------------------------

    def dump(self) -> str:
        lines = []
        for name in sorted(self._histories):
            for rec in self._histories[name]:
                lines.append(json.dumps({
                    "name": rec.name,
                    "value": rec.value,
                    "units": rec.unit_symbol,
                    "timestamp": None if rec.timestamp is None
                    else format_timestamp(rec.timestamp),
                }, sort_keys=True))
        return "\n".join(lines) + ("\n" if lines else "")

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dump(), encoding="utf-8")

    @classmethod
    def loads(cls, text: str) -> "CalibrationStore":
        store = cls()
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise ValueError(f"store line {lineno}: {e}") from None
            ts = obj.get("timestamp")
            store.append(CalibrationRecord(
                name=obj["name"],
                value=float(obj["value"]),
                unit_symbol=obj.get("units", ""),
                timestamp=None if ts is None else parse_timestamp(ts),
            ))
        return store

    @classmethod
    def load(cls, path: str | Path) -> "CalibrationStore":
        return cls.loads(Path(path).read_text(encoding="utf-8"))


def seed_store() -> CalibrationStore:
    """The packaged seed store (one real printed value, rest fixtures)."""
    text = (
        importlib_resources.files("pulsestack.data")
        .joinpath("calibration_seed.jsonl")
        .read_text(encoding="utf-8")
    )
    return CalibrationStore.loads(text)
