"""Full-stack quantum control language toolchain.

XML frontend (parse/serialize/lint), unit-aware symbolic algebra, a
versioned calibration store, a standard library of gates and timing
functions, a six-pass lowering compiler targeting a delay-stamped
opcode ISA, and a deterministic execution-engine simulator.
"""
from . import caldb, channels, elements, expressions, isa, lint, stdlib, units, vm, xml_io
from .compiler import CompileOptions, CompileResult, compile_ast, compile_experiment

__version__ = "0.1.0"

__all__ = [
    "caldb",
    "channels",
    "elements",
    "expressions",
    "isa",
    "lint",
    "stdlib",
    "units",
    "vm",
    "xml_io",
    "CompileOptions",
    "CompileResult",
    "compile_ast",
    "compile_experiment",
    "__version__",
]
