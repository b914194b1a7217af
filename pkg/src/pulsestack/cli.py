"""Command-line driver: lint, compile, run, db, stdlib, schema.

Every path/flag can also come from an environment variable with the
documented precedence flag > environment > default:

    PULSESTACK_DB        calibration store path (db/compile/run)
    PULSESTACK_STDLIB    extra stdlib definition directory
    PULSESTACK_CHANNELS  machine channel registry JSON
    PULSESTACK_PLAN      measurement plan JSON (run)
    PULSESTACK_BUDGET    tick budget (run)

Exit codes: 0 success, 1 lint errors, 2 pass or runtime errors,
3 internal invariant violation.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from datetime import datetime
from pathlib import Path

from . import schema as schema_mod
from . import stdlib as stdlib_mod
from .caldb import CalibrationRecord, CalibrationStore, seed_store
from .channels import ChannelRegistry, builtin_registry as builtin_channels
from .compiler import CompileOptions, compile_experiment
from .compiler.backend import CompiledProgram
from .errors import (
    Diagnostic,
    LintFailed,
    PulsestackError,
    WellFormednessError,
    errors_only,
)
from .expressions import DateSelector, parse_timestamp
from .lint import lint as lint_ast
from .vm import MeasurementPlan, run as vm_run, write_trace, write_trace_binary
from .xml_io import parse_experiment, serialize_xml

EXIT_OK = 0
EXIT_LINT = 1
EXIT_ERROR = 2
EXIT_INTERNAL = 3


def _env(name: str, default: str | None = None) -> str | None:
    return os.environ.get(f"PULSESTACK_{name}", default)


def _load_store(path: str | None) -> CalibrationStore:
    resolved = path or _env("DB")
    if resolved:
        return CalibrationStore.load(resolved)
    return seed_store()


def _load_channels(path: str | None) -> ChannelRegistry:
    resolved = path or _env("CHANNELS")
    if resolved:
        return ChannelRegistry.load(resolved)
    return builtin_channels()


def _load_stdlib(extra_dir: str | None):
    dirs = []
    resolved = extra_dir or _env("STDLIB")
    if resolved:
        dirs.append(resolved)
    return stdlib_mod.load_registry(dirs)


def _parse_date(text: str | None) -> datetime | None:
    if text is None or text == "most-recent":
        return None
    return parse_timestamp(text)


def _selector(text: str | None) -> DateSelector:
    if text is None or text == "most-recent":
        return DateSelector()
    if text.startswith("before:"):
        return DateSelector("latest-before", parse_timestamp(text[len("before:"):]))
    return DateSelector("exact", parse_timestamp(text))


class Report:
    """Collects the facts a command produced, in one machine-readable shape."""

    def __init__(self, command: str):
        self.command = command
        self.exit_status = EXIT_OK
        self.diagnostics: list[dict] = []
        self.artifacts: list[str] = []
        self.stats: dict[str, object] = {}

    def add_diagnostics(self, diagnostics: list[Diagnostic]) -> None:
        for d in diagnostics:
            self.diagnostics.append(
                {"severity": d.severity, "message": d.message, "path": d.path}
            )

    def error(self, message: str, status: int = EXIT_ERROR) -> int:
        self.diagnostics.append({"severity": "error", "message": message, "path": ""})
        self.exit_status = status
        print(f"error: {message}", file=sys.stderr)
        return status

    def write(self, path: str | None) -> None:
        if path is None:
            return
        payload = {
            "command": self.command,
            "exit_status": self.exit_status,
            "diagnostics": self.diagnostics,
            "artifacts": self.artifacts,
            "stats": self.stats,
        }
        Path(path).write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )


def _print_diagnostics(diagnostics: list[Diagnostic]) -> None:
    for d in diagnostics:
        print(str(d))


# -- subcommands ---------------------------------------------------------------


def cmd_lint(args: argparse.Namespace) -> int:
    report = Report("lint")
    try:
        try:
            ast = parse_experiment(Path(args.program).read_text(encoding="utf-8"))
        except (WellFormednessError, PulsestackError) as e:
            return report.error(f"{args.program}: {e}", EXIT_LINT)
        diagnostics = lint_ast(ast, _load_stdlib(args.stdlib), _load_channels(args.channels))
        report.add_diagnostics(diagnostics)
        _print_diagnostics(diagnostics)
        errors = errors_only(diagnostics)
        report.stats = {"errors": len(errors), "warnings": len(diagnostics) - len(errors)}
        if errors:
            report.exit_status = EXIT_LINT
            print(f"{len(errors)} error(s)")
            return EXIT_LINT
        print("lint clean")
        return EXIT_OK
    finally:
        report.write(args.report)


def cmd_compile(args: argparse.Namespace) -> int:
    report = Report("compile")
    try:
        try:
            ast = parse_experiment(Path(args.program).read_text(encoding="utf-8"))
        except (WellFormednessError, PulsestackError) as e:
            return report.error(f"{args.program}: {e}", EXIT_LINT)
        store = _load_store(args.db)
        snapshot = store.snapshot(_parse_date(args.date))
        stem = Path(args.program).stem
        options = CompileOptions(
            strict_ticks=args.strict_ticks,
            auto_headers=not args.no_auto_headers,
            registry=_load_stdlib(args.stdlib),
            channels=_load_channels(args.channels),
            dump_dir=args.dump_passes,
            dump_stem=stem,
            verify_passes=args.verify_passes,
            repeats=args.repeats,
        )
        try:
            result = compile_experiment(ast, snapshot, options)
        except LintFailed as e:
            diagnostics = getattr(e, "diagnostics", [])
            report.add_diagnostics(diagnostics)
            _print_diagnostics(diagnostics)
            report.exit_status = EXIT_LINT
            print(f"error: {e}", file=sys.stderr)
            return EXIT_LINT
        except PulsestackError as e:
            return report.error(str(e), EXIT_ERROR)
        report.add_diagnostics(result.warnings)
        _print_diagnostics(result.warnings)
        out = args.output or f"{stem}.qcpc"
        Path(out).write_bytes(result.container_bytes)
        report.artifacts.append(out)
        report.artifacts.extend(str(p) for p in result.pass_dumps)
        program = result.program
        counts = program.instruction_counts()
        report.stats = {
            "engines": len(program.engines),
            "instructions": counts,
            "total_instructions": sum(counts.values()),
            "segments": list(program.segment_names),
            "segment_durations_ticks": program.segment_durations,
            "source_digest": program.metadata.get("source_digest"),
            "snapshot_time": program.metadata.get("snapshot_time"),
        }
        print(f"compiled {args.program} -> {out}")
        print(f"  engines: {len(program.engines)}, instructions: {sum(counts.values())},"
              f" segments: {len(program.segment_names)}")
        for engine in program.engines:
            print(f"  {engine}: {counts[engine]} instruction(s)")
        return EXIT_OK
    finally:
        report.write(args.report)


def cmd_run(args: argparse.Namespace) -> int:
    report = Report("run")
    try:
        try:
            compiled = CompiledProgram.from_bytes(Path(args.container).read_bytes())
        except (ValueError, OSError) as e:
            return report.error(f"{args.container}: {e}", EXIT_ERROR)
        plan_path = args.plan or _env("PLAN")
        plan = MeasurementPlan.load(plan_path) if plan_path else MeasurementPlan()
        budget = args.budget if args.budget is not None else int(_env("BUDGET", "200000000"))
        store = _load_store(args.db)
        try:
            clock = store.query("DDSSampleClockFrequency").quantity.si
        except PulsestackError:
            clock = 1.0e9
        try:
            result = vm_run(
                compiled, plan, budget=budget,
                channels=_load_channels(args.channels),
                sample_clock_hz=clock,
            )
        except PulsestackError as e:
            return report.error(str(e), EXIT_ERROR)
        if args.trace_out:
            if args.trace_binary:
                write_trace_binary(args.trace_out, result.trace)
            else:
                write_trace(args.trace_out, result.trace)
            report.artifacts.append(args.trace_out)
        report.stats = {
            "final_tick": result.final_tick,
            "events": len(result.trace),
            "segments_visited": result.segments_visited,
            "resources": result.resources,
            "executed": result.executed,
        }
        print(f"ran {args.container}: {len(result.trace)} event(s),"
              f" final tick {result.final_tick}")
        if result.segments_visited:
            print("  segments: " + " -> ".join(result.segments_visited))
        for slot in sorted(result.resources):
            print(f"  {slot} = {result.resources[slot]} (count {result.counts[slot]})")
        return EXIT_OK
    finally:
        report.write(args.report)


def cmd_db(args: argparse.Namespace) -> int:
    report = Report(f"db {args.db_command}")
    try:
        if args.db_command == "query":
            store = _load_store(args.db)
            try:
                record = store.query(args.name, _selector(args.date))
            except PulsestackError as e:
                return report.error(str(e), EXIT_ERROR)
            date = "undated" if record.timestamp is None else record.timestamp.isoformat()
            print(f"{record.name} = {record.quantity} ({date})")
            report.stats = {
                "name": record.name, "value": record.value,
                "units": record.unit_symbol, "timestamp": date,
            }
            return EXIT_OK
        if args.db_command == "append":
            path = args.db or _env("DB")
            if not path:
                return report.error("append needs --db (or PULSESTACK_DB)")
            store = CalibrationStore.load(path) if Path(path).exists() else CalibrationStore()
            ts = None if args.date is None else parse_timestamp(args.date)
            try:
                store.append(CalibrationRecord(args.name, float(args.value), args.units, ts))
            except PulsestackError as e:
                return report.error(str(e), EXIT_ERROR)
            store.save(path)
            print(f"appended {args.name} = {args.value} {args.units}")
            return EXIT_OK
        if args.db_command == "snapshot":
            store = _load_store(args.db)
            snapshot = store.snapshot(_parse_date(args.date))
            for name in snapshot.names():
                print(f"{name} = {snapshot.get(name)}")
            report.stats = {"names": snapshot.names(), "at": snapshot.at.isoformat()}
            return EXIT_OK
        return report.error(f"unknown db command {args.db_command!r}")
    finally:
        report.write(args.report)


def cmd_stdlib(args: argparse.Namespace) -> int:
    registry = _load_stdlib(args.stdlib)
    if args.stdlib_command == "list":
        for name, kind in sorted(registry.name_kinds().items()):
            print(f"{kind:12} {name}")
        return EXIT_OK
    if args.stdlib_command == "show":
        definition = registry.lookup(args.name)
        if definition is None:
            print(f"error: unknown definition {args.name!r}", file=sys.stderr)
            return EXIT_ERROR
        sys.stdout.write(serialize_xml(definition))
        return EXIT_OK
    return EXIT_ERROR


def cmd_schema(args: argparse.Namespace) -> int:
    sys.stdout.write(schema_mod.export_json())
    return EXIT_OK


# -- argument parsing -------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pulsestack",
        description="Quantum control language toolchain: lint, compile, simulate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_lint = sub.add_parser("lint", help="validate a program")
    p_lint.add_argument("program")
    p_lint.add_argument("--stdlib", help="extra stdlib definition directory")
    p_lint.add_argument("--channels", help="machine channel registry JSON")
    p_lint.add_argument("--report", help="write a machine-readable report JSON")
    p_lint.set_defaults(func=cmd_lint)

    p_compile = sub.add_parser("compile", help="lower a program to opcodes")
    p_compile.add_argument("program")
    p_compile.add_argument("--db", help="calibration store path")
    p_compile.add_argument("--date", help="snapshot time (default most-recent)")
    p_compile.add_argument("-o", "--output", help="container output path")
    p_compile.add_argument("--dump-passes", help="directory for per-pass XML dumps")
    p_compile.add_argument("--strict-ticks", action="store_true",
                           help="error instead of warning on tick residuals")
    p_compile.add_argument("--repeats", type=int, default=1,
                           help="wrap the program in a repetition loop")
    p_compile.add_argument("--no-auto-headers", action="store_true",
                           help="do not auto-include library headers/definitions")
    p_compile.add_argument("--verify-passes", action="store_true",
                           help="re-parse and lint every intermediate")
    p_compile.add_argument("--stdlib", help="extra stdlib definition directory")
    p_compile.add_argument("--channels", help="machine channel registry JSON")
    p_compile.add_argument("--report", help="write a machine-readable report JSON")
    p_compile.set_defaults(func=cmd_compile)

    p_run = sub.add_parser("run", help="simulate a compiled container")
    p_run.add_argument("container")
    p_run.add_argument("--plan", help="measurement plan JSON")
    p_run.add_argument("--budget", type=int, help="tick budget")
    p_run.add_argument("--trace-out", help="trace output path")
    p_run.add_argument("--trace-binary", action="store_true",
                       help="write the compact binary trace form")
    p_run.add_argument("--db", help="calibration store (DDS sample clock)")
    p_run.add_argument("--channels", help="machine channel registry JSON")
    p_run.add_argument("--report", help="write a machine-readable report JSON")
    p_run.set_defaults(func=cmd_run)

    p_db = sub.add_parser("db", help="query or update the calibration store")
    db_sub = p_db.add_subparsers(dest="db_command", required=True)
    p_q = db_sub.add_parser("query")
    p_q.add_argument("name")
    p_q.add_argument("--date", help='"most-recent", a timestamp, or "before:<ts>"')
    p_q.add_argument("--db")
    p_q.add_argument("--report")
    p_q.set_defaults(func=cmd_db)
    p_a = db_sub.add_parser("append")
    p_a.add_argument("name")
    p_a.add_argument("value")
    p_a.add_argument("units")
    p_a.add_argument("--date", help="record timestamp (default undated)")
    p_a.add_argument("--db")
    p_a.add_argument("--report")
    p_a.set_defaults(func=cmd_db)
    p_s = db_sub.add_parser("snapshot")
    p_s.add_argument("--date")
    p_s.add_argument("--db")
    p_s.add_argument("--report")
    p_s.set_defaults(func=cmd_db)

    p_std = sub.add_parser("stdlib", help="inspect library definitions")
    std_sub = p_std.add_subparsers(dest="stdlib_command", required=True)
    p_list = std_sub.add_parser("list")
    p_list.add_argument("--stdlib")
    p_list.set_defaults(func=cmd_stdlib)
    p_show = std_sub.add_parser("show")
    p_show.add_argument("name")
    p_show.add_argument("--stdlib")
    p_show.set_defaults(func=cmd_stdlib)

    p_schema = sub.add_parser("schema", help="dump the language schema as JSON")
    p_schema.set_defaults(func=cmd_schema)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except PulsestackError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR
    except AssertionError as e:  # internal invariant violation
        print(f"internal error: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
