"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line. Tolerances are pinned here and nowhere else."""
from __future__ import annotations

import json
import random
import time
from contextlib import contextmanager
from datetime import datetime

import pytest

from oracle import generate_program, interpret

from pulsestack import expressions as ex
from pulsestack.caldb import seed_store
from pulsestack.compiler import CompileOptions, compile_experiment
from pulsestack.compiler.timeline import extract_timeline
from pulsestack.errors import TickQuantizationError, errors_only
from pulsestack.isa import DELAY_MAX, MNEMONICS, OPERAND_MAX, Opcode, decode, encode
from pulsestack.lint import lint
from pulsestack.stdlib import Registry
from pulsestack.units import seconds_to_ticks
from pulsestack.vm import MeasurementPlan, run, write_trace
from pulsestack.xml_io import parse_experiment


@contextmanager
def criterion(name: str):
    try:
        yield
    except BaseException:
        print(f"FAIL: {name}")
        raise
    print(f"PASS: {name}")


def test_calibration_lookup_published_value():
    with criterion("calibration lookup: DefaultMicrowaveRabiRate = 1 MHz @ 2021-05-31-08-55"):
        record = seed_store().query("DefaultMicrowaveRabiRate")
        assert record.value == 1 and record.unit_symbol == "MHz"
        assert record.timestamp == datetime(2021, 5, 31, 8, 55)
        assert record.quantity.in_unit("MHz") == 1.0


def test_symbolic_solve_pi_time(snapshot):
    with criterion("symbolic solve: pi-time = 3.14159 us -> 6283 ticks, residual flagged"):
        expr = ex.Binary("/", ex.lit(3.14159), ex.NamedConstant("DefaultMicrowaveRabiRate"))
        value = ex.evaluate(expr, snapshot)
        assert value.in_unit("us") == pytest.approx(3.14159, rel=1e-12)
        tick, residual = seconds_to_ticks(value.si)
        assert tick == 6283
        assert abs(residual) == pytest.approx(0.18, abs=0.005)
        assert abs(residual) > 0.01  # above the warning threshold
        # strict mode turns the residual into an error
        from pulsestack import elements as el
        from pulsestack.compiler.passes import PassContext, run_pass
        from pulsestack.stdlib import with_required_headers

        ast = el.Experiment(program=el.Program((el.Segment("main", (
            el.Event(el.StartTime(expr, "absolute"), (
                el.DDSAction("channels.aom.raman.individual1.dds0",
                             (("amplitude", ex.lit(0, "V")),)),
            )),
        )),)))
        ast = with_required_headers(ast)
        ctx = PassContext(
            definitions=Registry.from_definitions(ast.definitions),
            snapshot=snapshot, strict_ticks=True,
        )
        from pulsestack.channels import builtin_registry

        ctx.channels = builtin_registry()
        for name in ("gate-structure", "gate-layer", "functions", "flatten"):
            ast = run_pass(name, ast, ctx)
        with pytest.raises(TickQuantizationError):
            run_pass("solve", ast, ctx)


def test_pipeline_validity_six_lint_clean_dumps(tmp_path, snapshot, corpus_dir):
    with criterion("pipeline validity: 6 lint-clean dumps per corpus program, < 5 s each"):
        for name in ("ising_ramp", "five_qubit_code"):
            ast = parse_experiment((corpus_dir / f"{name}.xml").read_text())
            started = time.monotonic()
            result = compile_experiment(ast, snapshot, CompileOptions(
                dump_dir=tmp_path / name, dump_stem=name, verify_passes=True,
            ))
            elapsed = time.monotonic() - started
            assert elapsed < 5.0, f"{name} compiled in {elapsed:.2f}s"
            assert len(result.pass_dumps) == 6
            for path in result.pass_dumps:
                reparsed = parse_experiment(path.read_text())
                diagnostics = errors_only(lint(reparsed, Registry(())))
                assert diagnostics == [], f"{path.name}: {diagnostics[:1]}"


def test_oracle_equivalence_hundred_programs(snapshot):
    with criterion("oracle equivalence: 100 random programs, exact write sets, < 60 s"):
        started = time.monotonic()
        for seed in range(100):
            ast = generate_program(seed)
            compiled = compile_experiment(ast, snapshot, CompileOptions()).program
            result = run(compiled, budget=10**9)
            vm_set = {
                (e.tick, e.engine, e.payload["value"])
                for e in result.trace if e.kind == "value-set"
            }
            assert vm_set == interpret(ast, snapshot), f"seed {seed}"
        elapsed = time.monotonic() - started
        assert elapsed < 60.0, f"took {elapsed:.1f}s"


def test_isa_round_trip_ten_thousand():
    with criterion("ISA round-trip: 10^4 random opcodes, all 8 mnemonics"):
        rng = random.Random(0xC0DE)
        stream = []
        for _ in range(10_000):
            mnemonic = rng.choice(MNEMONICS)
            delay = rng.randint(0, DELAY_MAX)
            if mnemonic in ("NOP", "DECLOOP"):
                stream.append(Opcode(mnemonic, delay))
            elif mnemonic == "BRANCHLUT":
                stream.append(Opcode.branchlut(delay, rng.randint(0, 255),
                                               rng.randint(0, 65535)))
            else:
                stream.append(Opcode(mnemonic, delay, rng.randint(0, OPERAND_MAX)))
        assert {op.mnemonic for op in stream} == set(MNEMONICS)
        assert decode(encode(stream)) == stream


def test_timing_prefix_sum_law(snapshot, corpus_dir):
    with criterion("timing law: instruction tick equals the sum of embedded delays"):
        for name in ("ising_ramp", "five_qubit_code"):
            ast = parse_experiment((corpus_dir / f"{name}.xml").read_text())
            result = compile_experiment(ast, snapshot, CompileOptions())
            program = result.program
            timeline = extract_timeline(result.pass_asts["channelize"])
            bases, total = [], 0
            for duration in program.segment_durations:
                bases.append(total)
                total += duration
            for engine in program.engines:
                expected = {}
                for seg_i, segment in enumerate(timeline.segments):
                    for a in segment.actions:
                        if f"{a.channel}.{a.parameter}" == engine:
                            expected[bases[seg_i] + a.tick] = a.value
                cumulative, seen = 0, {}
                offsets = program.segment_offsets[engine]
                boundary = {pc: i for i, pc in enumerate(offsets)}
                for pc, op in enumerate(program.streams[engine]):
                    if pc in boundary:
                        # the first instruction of segment k fires at its base
                        assert cumulative == bases[boundary[pc]], (engine, pc)
                    cumulative += op.delay
                    if op.mnemonic == "SETVALUE":
                        seen[cumulative] = program.values[op.operand]
                assert seen == expected, engine


def test_branching_scenarios(snapshot, five_qubit_ast):
    with criterion("branching: 5 scripted flag scenarios follow exact paths"):
        program = compile_experiment(five_qubit_ast, snapshot, CompileOptions()).program
        zeros = {"default": {"counts": [0], "cycle": True}}
        result = run(program, MeasurementPlan(zeros))
        assert result.segments_visited == [
            "FT-SMC-0", "FT-SMC-1", "FT-SMC-2", "FT-SMC-3", "Correction", "Done",
        ]
        for k in range(4):
            plan = MeasurementPlan({
                "default": {"counts": [0], "cycle": True},
                "sites": {f"m[{2 * k + 1}]": {"counts": [5], "cycle": True}},
            })
            result = run(program, plan)
            expected = [f"FT-SMC-{i}" for i in range(k + 1)] + ["NFT-SMC", "Done"]
            assert result.segments_visited == expected, f"flag at round {k}"


def test_interpolation_endpoint(snapshot, ising_ast):
    with criterion("interpolation: ramp reaches a1 - 50 mV at t_sweep, midpoint a1 - 25 mV"):
        program = compile_experiment(ising_ast, snapshot, CompileOptions()).program
        result = run(program)
        channel = "channels.aom.raman.individual1.dds2"
        loads = [e for e in result.trace if e.engine == f"{channel}.interp_p0"]
        t_on = loads[0].tick
        core = result.dds_core(channel)
        a1 = snapshot.get("DefaultRamanIndividualDDSAmplitude").si
        step = abs(core._anchors[-1].slope) or 5e-6  # one interpolator step
        sweep_ticks = 20000  # 10 us
        assert core.amplitude_at(t_on + sweep_ticks) == pytest.approx(a1 - 0.050, abs=step + 1e-12)
        assert core.amplitude_at(t_on + sweep_ticks // 2) == pytest.approx(a1 - 0.025, abs=step + 1e-12)


def test_determinism_container_and_trace(tmp_path, snapshot, five_qubit_ast):
    with criterion("determinism: byte-identical containers and seeded traces"):
        blob_a = compile_experiment(five_qubit_ast, snapshot, CompileOptions()).container_bytes
        blob_b = compile_experiment(five_qubit_ast, snapshot, CompileOptions()).container_bytes
        assert blob_a == blob_b
        from pulsestack.compiler.backend import CompiledProgram

        program = CompiledProgram.from_bytes(blob_a)
        spec = {"default": {"seed": 42, "distribution": "poisson", "mean": 0.6}}
        paths = []
        for label in ("a", "b"):
            result = run(program, MeasurementPlan(spec))
            path = tmp_path / f"{label}.trace"
            write_trace(path, result.trace)
            paths.append(path)
        assert paths[0].read_bytes() == paths[1].read_bytes()


def test_loop_law_canonical_idiom():
    with criterion("loop law: SETLOOP n runs the body exactly n times, n in {0,1,7,255,65535}"):
        from pulsestack.compiler.backend import CompiledProgram

        for n in (0, 1, 7, 255, 65535):
            engine = "channels.aom.raman.individual1.dds0.amplitude"
            stream = [
                Opcode.setloop(0, n),
                Opcode.jz(0, 5),
                Opcode.setvalue(10, 0),
                Opcode.decloop(0),
                Opcode.jnz(0, 2),
                Opcode.nop(0),
            ]
            program = CompiledProgram(
                engines=(engine,), streams={engine: stream}, values=[1.0],
                segment_names=("main",), segment_offsets={engine: [0]},
                segment_durations=[0], tables=[], sites=[], metadata={},
            )
            result = run(program, instruction_cap=10_000_000)
            body_runs = sum(1 for e in result.trace if e.kind == "value-set")
            assert body_runs == n, f"n={n}: body ran {body_runs} times"
