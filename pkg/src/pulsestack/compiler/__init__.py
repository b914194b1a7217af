"""Lowering pipeline: successive rewritings of a program into less
expressive but equivalent forms, ending in per-engine opcode streams."""
from .passes import (
    PASS_NAMES,
    PassContext,
    expand_gates,
    run_pass,
)
from .pipeline import CompileOptions, CompileResult, compile_ast, compile_experiment
from .backend import emit_opcodes
from .timeline import FlatTimeline, PlacedAction, extract_timeline

__all__ = [
    "PASS_NAMES",
    "PassContext",
    "expand_gates",
    "run_pass",
    "CompileOptions",
    "CompileResult",
    "compile_ast",
    "compile_experiment",
    "emit_opcodes",
    "FlatTimeline",
    "PlacedAction",
    "extract_timeline",
]
