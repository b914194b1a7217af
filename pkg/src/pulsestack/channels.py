"""Target machine description: channels and their engine parameters.

Each (channel, parameter) pair is driven by one dedicated execution
engine. The builtin registry models a small trapped-ion machine; a JSON
file with the same structure can replace or extend it.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .units import DIMENSIONLESS, Dims, FREQUENCY, VOLTAGE, dims_name

CHANNEL_KINDS = ("dds", "counter", "ttl")


@dataclass(frozen=True)
class ParamSpec:
    name: str
    dims: Dims
    low: float  # SI
    high: float  # SI


@dataclass(frozen=True)
class ChannelDescriptor:
    name: str
    kind: str
    params: tuple[ParamSpec, ...]

    def param(self, name: str) -> ParamSpec | None:
        for p in self.params:
            if p.name == name:
                return p
        return None

    def param_names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.params)


def engine_name(channel: str, parameter: str) -> str:
    return f"{channel}.{parameter}"


class ChannelRegistry:
    """Unique channel names mapped to engine descriptors."""

    def __init__(self, descriptors: list[ChannelDescriptor]):
        self._channels: dict[str, ChannelDescriptor] = {}
        for d in descriptors:
            if d.name in self._channels:
                raise ValueError(f"duplicate channel {d.name!r}")
            self._channels[d.name] = d

    def __contains__(self, name: str) -> bool:
        return name in self._channels

    def get(self, name: str) -> ChannelDescriptor | None:
        return self._channels.get(name)

    def names(self) -> list[str]:
        return sorted(self._channels)

    def to_json(self) -> str:
        payload = {
            d.name: {
                "kind": d.kind,
                "params": {
                    p.name: {"dims": list(p.dims), "low": p.low, "high": p.high}
                    for p in d.params
                },
            }
            for d in self._channels.values()
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ChannelRegistry":
        payload = json.loads(text)
        descriptors = []
        for name, spec in payload.items():
            params = tuple(
                ParamSpec(pname, tuple(pspec["dims"]), float(pspec["low"]), float(pspec["high"]))  # type: ignore[arg-type]
                for pname, pspec in sorted(spec["params"].items())
            )
            descriptors.append(ChannelDescriptor(name, spec["kind"], params))
        return cls(descriptors)

    @classmethod
    def load(cls, path: str | Path) -> "ChannelRegistry":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def _dds(name: str, freq_high: float) -> ChannelDescriptor:
    volt = 5.0
    return ChannelDescriptor(name, "dds", (
        ParamSpec("amplitude", VOLTAGE, -volt, volt),
        ParamSpec("frequency", FREQUENCY, 0.0, freq_high),
        ParamSpec("phase", DIMENSIONLESS, -6.2832, 6.2832),
        ParamSpec("interp_p0", VOLTAGE, -volt, volt),
        ParamSpec("interp_p1", VOLTAGE, -volt, volt),
    ))


def _counter(name: str) -> ChannelDescriptor:
    return ChannelDescriptor(name, "counter", (
        ParamSpec("gate", DIMENSIONLESS, 0.0, 1.0),
    ))


def _ttl(name: str) -> ChannelDescriptor:
    return ChannelDescriptor(name, "ttl", (
        ParamSpec("level", DIMENSIONLESS, 0.0, 1.0),
    ))


def builtin_registry() -> ChannelRegistry:
    """Default machine: Raman/microwave DDS channels, counters, TTL lines."""
    aom_high = 500e6
    mw_high = 20e9
    descriptors: list[ChannelDescriptor] = []
    descriptors.append(_dds("channels.aom.raman.global.dds0", aom_high))
    for ion in range(8):
        for dds in range(3):
            descriptors.append(_dds(f"channels.aom.raman.individual{ion}.dds{dds}", aom_high))
    descriptors.append(_dds("channels.microwave.global.dds0", mw_high))
    for ion in range(8):
        descriptors.append(_dds(f"channels.microwave.individual{ion}.dds0", mw_high))
    descriptors.append(_dds("channels.aom.cooling.doppler.dds0", aom_high))
    descriptors.append(_dds("channels.aom.pump.dds0", aom_high))
    descriptors.append(_dds("channels.aom.readout.global.dds0", aom_high))
    for n in range(12):
        descriptors.append(_counter(f"channels.counter.apd{n}"))
    for n in range(4):
        descriptors.append(_ttl(f"channels.ttl.shutter{n}"))
    return ChannelRegistry(descriptors)


ACTION_PARAM_DIMS = {
    "amplitude": VOLTAGE,
    "frequency": FREQUENCY,
    "phase": DIMENSIONLESS,
    "interp_p0": VOLTAGE,
    "interp_p1": VOLTAGE,
    "gate": DIMENSIONLESS,
    "level": DIMENSIONLESS,
}


def describe_param_dims(param: str) -> str:
    return dims_name(ACTION_PARAM_DIMS[param])
