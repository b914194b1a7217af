"""Pipeline driver: lint, auto-include headers, run the six passes,
emit opcodes, and optionally dump every intermediate as XML."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .. import elements as el
from ..caldb import CalibrationSnapshot
from ..channels import ChannelRegistry, builtin_registry as builtin_channels
from ..errors import CompileError, Diagnostic, LintFailed, PulsestackError, errors_only
from ..lint import lint
from ..stdlib import Registry, builtin_registry, with_required_headers
from ..units import TICK_SECONDS
from .backend import CompiledProgram, emit_opcodes, source_digest
from .passes import PASS_NAMES, PassContext, run_pass


@dataclass
class CompileOptions:
    strict_ticks: bool = False
    auto_headers: bool = True
    registry: Registry | None = None  # stdlib used for header inclusion
    channels: ChannelRegistry | None = None
    dump_dir: str | Path | None = None
    dump_stem: str = "program"
    verify_passes: bool = False
    repeats: int = 1


@dataclass
class CompileResult:
    program: CompiledProgram
    warnings: list[Diagnostic]
    pass_dumps: list[Path] = field(default_factory=list)
    pass_asts: dict[str, el.Experiment] = field(default_factory=dict)

    @property
    def container_bytes(self) -> bytes:
        return self.program.to_bytes()


def compile_experiment(
    ast: el.Experiment,
    snapshot: CalibrationSnapshot,
    options: CompileOptions | None = None,
) -> CompileResult:
    """Compile a lint-clean program against a calibration snapshot.

    Raises LintFailed when the input has lint errors, and CompileError
    (tagged with the failing pass name) for pass failures.
    """
    options = options or CompileOptions()
    registry = options.registry if options.registry is not None else builtin_registry()
    channels = options.channels if options.channels is not None else builtin_channels()

    diagnostics = lint(ast, registry, channels)
    errors = errors_only(diagnostics)
    if errors:
        failure = LintFailed(
            f"{len(errors)} lint error(s); first: {errors[0]}", pass_name="lint"
        )
        failure.diagnostics = diagnostics  # type: ignore[attr-defined]
        raise failure

    if options.auto_headers:
        try:
            ast = with_required_headers(ast, registry)
        except PulsestackError as e:
            raise CompileError(str(e), pass_name="headers") from e

    from ..xml_io import parse_experiment, serialize_xml

    canonical = serialize_xml(ast)
    metadata = {
        "snapshot_time": snapshot.at.isoformat(timespec="seconds"),
        "source_digest": source_digest(canonical),
        "tick_seconds": TICK_SECONDS,
        "repeats": options.repeats,
    }

    ctx = PassContext(
        definitions=Registry.from_definitions(ast.definitions),
        snapshot=snapshot,
        channels=channels,
        strict_ticks=options.strict_ticks,
    )

    result = CompileResult(program=None, warnings=ctx.warnings)  # type: ignore[arg-type]
    dump_dir = Path(options.dump_dir) if options.dump_dir is not None else None
    if dump_dir is not None:
        dump_dir.mkdir(parents=True, exist_ok=True)

    current = ast
    for k, name in enumerate(PASS_NAMES, start=1):
        try:
            current = run_pass(name, current, ctx)
        except CompileError as e:
            if not e.pass_name:
                e.pass_name = name
            raise
        except PulsestackError as e:
            raise CompileError(str(e), pass_name=name) from e
        result.pass_asts[name] = current
        if dump_dir is not None:
            path = dump_dir / f"{options.dump_stem}.pass{k}.xml"
            path.write_text(serialize_xml(current), encoding="utf-8")
            result.pass_dumps.append(path)
        if options.verify_passes:
            text = serialize_xml(current)
            reparsed = parse_experiment(text)
            if reparsed != current:
                raise CompileError(
                    "intermediate does not round-trip through XML", pass_name=name
                )
            # Intermediates must stay valid with no library access at all.
            inter_diags = errors_only(lint(current, Registry(()), channels))
            if inter_diags:
                raise CompileError(
                    f"intermediate fails lint: {inter_diags[0]}", pass_name=name
                )

    try:
        program = emit_opcodes(
            current, warnings=ctx.warnings, repeats=options.repeats, metadata=metadata
        )
    except CompileError as e:
        if not e.pass_name:
            e.pass_name = "emit"
        raise
    except PulsestackError as e:
        raise CompileError(str(e), pass_name="emit") from e
    result.program = program
    return result


def compile_ast(
    document: str,
    snapshot: CalibrationSnapshot,
    options: CompileOptions | None = None,
) -> CompileResult:
    """Parse XML text and compile it."""
    from ..xml_io import parse_experiment

    return compile_experiment(parse_experiment(document), snapshot, options)
