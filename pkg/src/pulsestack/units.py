"""Physical units and quantities.

Dimensions are integer exponent vectors over (time, voltage, count).
Frequency is time^-1. All arithmetic happens on SI doubles; the unit a
value was written in is kept only for rendering, so a quantity parsed as
``100 MHz`` prints back as ``100 MHz`` but compares equal to ``1e8 Hz``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

Dims = tuple[int, int, int]

DIMENSIONLESS: Dims = (0, 0, 0)
TIME: Dims = (1, 0, 0)
FREQUENCY: Dims = (-1, 0, 0)
VOLTAGE: Dims = (0, 1, 0)
COUNT: Dims = (0, 0, 1)

# Hardware time quantum: one tick is 0.5 ns (2 GHz experiment rate).
TICK_SECONDS = 0.5e-9


@dataclass(frozen=True)
class Unit:
    """A unit symbol with its scale factor to SI and dimension vector."""

    symbol: str
    scale: float
    dims: Dims


_UNITS = [
    Unit("s", 1.0, TIME),
    Unit("ms", 1e-3, TIME),
    Unit("us", 1e-6, TIME),
    Unit("ns", 1e-9, TIME),
    Unit("tick", TICK_SECONDS, TIME),
    Unit("Hz", 1.0, FREQUENCY),
    Unit("kHz", 1e3, FREQUENCY),
    Unit("MHz", 1e6, FREQUENCY),
    Unit("GHz", 1e9, FREQUENCY),
    Unit("V", 1.0, VOLTAGE),
    Unit("mV", 1e-3, VOLTAGE),
    Unit("", 1.0, DIMENSIONLESS),
    Unit("dimensionless", 1.0, DIMENSIONLESS),
    Unit("count", 1.0, COUNT),
]

UNIT_TABLE: dict[str, Unit] = {u.symbol: u for u in _UNITS}
UNIT_TABLE["µs"] = UNIT_TABLE["us"]  # micro sign alias

DIMENSIONLESS_UNIT = UNIT_TABLE[""]


def lookup_unit(symbol: str | None) -> Unit:
    """Resolve a unit symbol; None or empty means dimensionless."""
    if symbol is None:
        return DIMENSIONLESS_UNIT
    try:
        return UNIT_TABLE[symbol]
    except KeyError:
        raise KeyError(f"unknown unit symbol {symbol!r}") from None


def _si_symbol(dims: Dims) -> str:
    """Canonical display symbol for a dimension vector, if one exists."""
    for sym in ("s", "Hz", "V", "count", ""):
        if UNIT_TABLE[sym].dims == dims:
            return sym
    return "?"


def si_unit(dims: Dims) -> Unit:
    sym = _si_symbol(dims)
    if sym != "?":
        return UNIT_TABLE[sym]
    return Unit("?", 1.0, dims)


def dims_mul(a: Dims, b: Dims) -> Dims:
    return (a[0] + b[0], a[1] + b[1], a[2] + b[2])


def dims_div(a: Dims, b: Dims) -> Dims:
    return (a[0] - b[0], a[1] - b[1], a[2] - b[2])


def dims_pow(a: Dims, n: int) -> Dims:
    return (a[0] * n, a[1] * n, a[2] * n)


def dims_name(dims: Dims) -> str:
    if dims == DIMENSIONLESS:
        return "dimensionless"
    parts = []
    for exp, name in zip(dims, ("time", "voltage", "count")):
        if exp == 1:
            parts.append(name)
        elif exp != 0:
            parts.append(f"{name}^{exp}")
    return "*".join(parts)


DIMENSION_NAMES: dict[str, Dims] = {
    "time": TIME,
    "frequency": FREQUENCY,
    "voltage": VOLTAGE,
    "count": COUNT,
    "dimensionless": DIMENSIONLESS,
}


@dataclass(frozen=True)
class Quantity:
    """A real value tagged with a unit.

    Equality and hashing use the SI value and dimension vector, so
    Quantity(100, MHz) == Quantity(1e8, Hz). NaN and infinities are
    rejected at construction.
    """

    value: float
    unit: Unit

    def __post_init__(self):
        v = float(self.value)
        if math.isnan(v) or math.isinf(v):
            raise ValueError(f"non-finite quantity value: {v!r}")
        object.__setattr__(self, "value", v)

    @property
    def si(self) -> float:
        return self.value * self.unit.scale

    @property
    def dims(self) -> Dims:
        return self.unit.dims

    def in_unit(self, symbol: str) -> float:
        """Value expressed in the named unit; dims must match."""
        target = lookup_unit(symbol)
        if target.dims != self.dims:
            raise ValueError(
                f"cannot express {dims_name(self.dims)} in {symbol!r}"
            )
        return self.si / target.scale

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Quantity):
            return NotImplemented
        return self.si == other.si and self.dims == other.dims

    def __hash__(self) -> int:
        return hash((self.si, self.dims))

    def __str__(self) -> str:
        if self.unit.symbol:
            return f"{format_number(self.value)} {self.unit.symbol}"
        return format_number(self.value)


def quantity(value: float, symbol: str | None = None) -> Quantity:
    return Quantity(value, lookup_unit(symbol))


def si_quantity(si_value: float, dims: Dims) -> Quantity:
    u = si_unit(dims)
    return Quantity(si_value / u.scale if u.scale != 1.0 else si_value, u)


def format_number(v: float) -> str:
    """Shortest round-trippable rendering; exact integers drop the decimal."""
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def seconds_to_ticks(seconds: float) -> tuple[int, float]:
    """Quantize a time to integer ticks; returns (ticks, residual_in_ticks)."""
    exact = seconds / TICK_SECONDS
    tick = round(exact)
    return int(tick), exact - tick
