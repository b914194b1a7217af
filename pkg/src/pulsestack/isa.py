"""Opcode set and bit-exact binary codec.

Each instruction is one 64-bit little-endian word:

    byte 0      mnemonic
    byte 1      reserved (zero)
    bytes 2-4   delay in ticks, unsigned 24 bit
    bytes 5-7   operand, unsigned 24 bit

The operand is a constant-pool index for SETVALUE, a loop count for
SETLOOP, an instruction index for the jumps, and a packed
(measurement id << 16 | table id) pair for BRANCHLUT.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

from .errors import FieldOverflow, UnknownMnemonic

MNEMONICS = ("NOP", "SETVALUE", "SETLOOP", "JNZ", "JZ", "DECLOOP", "GOTO", "BRANCHLUT")
_CODE = {name: i for i, name in enumerate(MNEMONICS)}

DELAY_MAX = (1 << 24) - 1
OPERAND_MAX = (1 << 24) - 1
WORD_BYTES = 8

_OPERAND_FREE = ("NOP", "DECLOOP")


@dataclass(frozen=True)
class Opcode:
    mnemonic: str
    delay: int = 0
    operand: int = 0

    def __post_init__(self):
        if self.mnemonic not in _CODE:
            raise UnknownMnemonic(f"unknown mnemonic {self.mnemonic!r}")

    # -- constructors -------------------------------------------------------

    @classmethod
    def nop(cls, delay: int = 0) -> "Opcode":
        return cls("NOP", delay)

    @classmethod
    def setvalue(cls, delay: int, value_index: int) -> "Opcode":
        return cls("SETVALUE", delay, value_index)

    @classmethod
    def setloop(cls, delay: int, count: int) -> "Opcode":
        return cls("SETLOOP", delay, count)

    @classmethod
    def jnz(cls, delay: int, pc: int) -> "Opcode":
        return cls("JNZ", delay, pc)

    @classmethod
    def jz(cls, delay: int, pc: int) -> "Opcode":
        return cls("JZ", delay, pc)

    @classmethod
    def decloop(cls, delay: int = 0) -> "Opcode":
        return cls("DECLOOP", delay)

    @classmethod
    def goto(cls, delay: int, pc: int) -> "Opcode":
        return cls("GOTO", delay, pc)

    @classmethod
    def branchlut(cls, delay: int, measurement: int, table: int) -> "Opcode":
        if not 0 <= measurement < (1 << 8):
            raise FieldOverflow(f"measurement id {measurement} exceeds 8 bits")
        if not 0 <= table < (1 << 16):
            raise FieldOverflow(f"table id {table} exceeds 16 bits")
        return cls("BRANCHLUT", delay, (measurement << 16) | table)

    # -- field views -----------------------------------------------------------

    @property
    def measurement(self) -> int:
        return (self.operand >> 16) & 0xFF

    @property
    def table(self) -> int:
        return self.operand & 0xFFFF

    def __str__(self) -> str:
        if self.mnemonic == "BRANCHLUT":
            return f"BRANCHLUT m={self.measurement} t={self.table} @+{self.delay}"
        if self.mnemonic in _OPERAND_FREE:
            return f"{self.mnemonic} @+{self.delay}"
        return f"{self.mnemonic} {self.operand} @+{self.delay}"


def encode_word(op: Opcode) -> bytes:
    if not 0 <= op.delay <= DELAY_MAX:
        raise FieldOverflow(f"delay {op.delay} exceeds the 24-bit field")
    if not 0 <= op.operand <= OPERAND_MAX:
        raise FieldOverflow(f"operand {op.operand} exceeds the 24-bit field")
    if op.mnemonic in _OPERAND_FREE and op.operand != 0:
        raise FieldOverflow(f"{op.mnemonic} takes no operand")
    word = (
        _CODE[op.mnemonic]
        | (op.delay << 16)
        | (op.operand << 40)
    )
    return struct.pack("<Q", word)


def decode_word(raw: bytes) -> Opcode:
    if len(raw) != WORD_BYTES:
        raise UnknownMnemonic(f"expected {WORD_BYTES} bytes, got {len(raw)}")
    (word,) = struct.unpack("<Q", raw)
    code = word & 0xFF
    reserved = (word >> 8) & 0xFF
    delay = (word >> 16) & 0xFFFFFF
    operand = (word >> 40) & 0xFFFFFF
    if code >= len(MNEMONICS):
        raise UnknownMnemonic(f"unknown opcode byte 0x{code:02x}")
    if reserved != 0:
        raise UnknownMnemonic(f"nonzero reserved byte 0x{reserved:02x}")
    return Opcode(MNEMONICS[code], delay, operand)


def encode(stream: list[Opcode]) -> bytes:
    return b"".join(encode_word(op) for op in stream)


def decode(blob: bytes) -> list[Opcode]:
    if len(blob) % WORD_BYTES:
        raise UnknownMnemonic("stream length is not a whole number of words")
    return [
        decode_word(blob[i : i + WORD_BYTES]) for i in range(0, len(blob), WORD_BYTES)
    ]
