import pytest

from pulsestack import elements as el
from pulsestack import expressions as ex
from pulsestack.compiler import (
    CompileOptions,
    PassContext,
    compile_experiment,
    expand_gates,
    run_pass,
)
from pulsestack.compiler.backend import HALT_TARGET, emit_opcodes
from pulsestack.compiler.timeline import extract_timeline
from pulsestack.errors import (
    CompileError,
    LintFailed,
    NegativeTime,
    SimultaneousWrite,
    TickQuantizationError,
    errors_only,
)
from pulsestack.isa import DELAY_MAX
from pulsestack.lint import lint
from pulsestack.stdlib import Registry, builtin_registry, with_required_headers
from pulsestack.xml_io import parse_experiment, serialize_xml


def experiment(*items, resources=(), segments=None):
    if segments is None:
        segments = (el.Segment("main", tuple(items)),)
    return el.Experiment(program=el.Program(segments), resources=tuple(resources))


def event(offset_ns, *items, mode="absolute"):
    return el.Event(el.StartTime(ex.lit(offset_ns, "ns"), mode), tuple(items))


def dds(channel, **params):
    return el.DDSAction(channel, tuple(sorted(params.items())))


CH0 = "channels.aom.raman.individual1.dds0"
CH1 = "channels.aom.raman.individual1.dds1"


def ctx_for(ast, snapshot, channels):
    ast = with_required_headers(ast)
    return ast, PassContext(
        definitions=Registry.from_definitions(ast.definitions),
        snapshot=snapshot,
        channels=channels,
    )


class TestGatePasses:
    def test_block_becomes_event_with_shared_start(self, snapshot, channels):
        ast = experiment(el.GateBlock((
            el.GateCall("XPi/2", (el.QubitBinding(0, "ion"),)),
        )))
        ast, ctx = ctx_for(ast, snapshot, channels)
        out = expand_gates(ast, ctx)
        (item,) = out.program.segments[0].items
        assert isinstance(item, el.Event)
        assert item.start_time.mode == "since-last-action"
        # no gate-layer nodes remain anywhere
        assert _count_kinds(out, (el.GateCall, el.GateBlock)) == 0

    def test_empty_block_becomes_empty_event(self, snapshot, channels):
        ast = experiment(el.GateBlock())
        ast, ctx = ctx_for(ast, snapshot, channels)
        out = expand_gates(ast, ctx)
        (item,) = out.program.segments[0].items
        assert isinstance(item, el.Event)
        assert item.items == ()

    def test_five_qubit_gate_count_preserved(self, five_qubit_ast, snapshot, channels):
        gates_before = _count_kinds(five_qubit_ast.program, (el.GateCall,))
        ast, ctx = ctx_for(five_qubit_ast, snapshot, channels)
        structured = run_pass("gate-structure", ast, ctx)
        # after pass 1 only pulse-level calls remain, each wrapped in an event
        remaining = _count_kinds(structured.program, (el.GateCall,))
        assert remaining >= gates_before  # composite layers expand into more calls
        out = run_pass("gate-layer", structured, ctx)
        assert _count_kinds(out.program, (el.GateCall, el.GateBlock)) == 0
        # segment count and decisions are untouched
        assert [s.name for s in out.program.segments] == [
            s.name for s in five_qubit_ast.program.segments
        ]


class TestFunctionPass:
    def test_function_call_inlined(self, snapshot, channels):
        ast = experiment(event(0, el.FunctionCall(
            "DopplerCooling", (el.Argument("duration", ex.lit(3, "ms")),)
        )))
        ast, ctx = ctx_for(ast, snapshot, channels)
        out = run_pass("functions", ast, ctx)
        assert _count_kinds(out, (el.FunctionCall,)) == 0
        assert _count_kinds(out.program, (el.DDSAction,)) == 2

    def test_empty_body_function_removed(self, snapshot, channels):
        empty = el.FunctionDefinition("Nothing", body=())
        ast = el.Experiment(
            program=el.Program((el.Segment("main", (
                event(0, el.FunctionCall("Nothing")),
            )),)),
            definitions=(empty,),
        )
        ctx = PassContext(
            definitions=Registry.from_definitions(ast.definitions),
            snapshot=snapshot, channels=channels,
        )
        out = run_pass("functions", ast, ctx)
        assert _count_kinds(out, (el.FunctionCall,)) == 0
        assert extract_timeline_safe_actions(out) == 0

    def test_nested_function_fully_inlined(self, snapshot, channels):
        inner = el.FunctionDefinition("Inner", body=(
            event(0, dds(CH0, amplitude=ex.lit(1, "V"))),
        ))
        outer = el.FunctionDefinition("Outer", body=(
            event(0, el.FunctionCall("Inner")),
            event(100, dds(CH1, amplitude=ex.lit(0, "V"))),
        ))
        ast = el.Experiment(
            program=el.Program((el.Segment("main", (
                event(0, el.FunctionCall("Outer")),
            )),)),
            definitions=(inner, outer),
        )
        ctx = PassContext(
            definitions=Registry.from_definitions(ast.definitions),
            snapshot=snapshot, channels=channels,
        )
        out = run_pass("functions", ast, ctx)
        assert _count_kinds(out, (el.FunctionCall,)) == 0
        assert _count_kinds(out.program, (el.DDSAction,)) == 2

    def test_recursive_functions_rejected(self, snapshot, channels):
        loop_def = el.FunctionDefinition("Loop", body=(
            event(0, el.FunctionCall("Loop")),
        ))
        ast = el.Experiment(
            program=el.Program((el.Segment("main", (
                event(0, el.FunctionCall("Loop")),
            )),)),
            definitions=(loop_def,),
        )
        ctx = PassContext(
            definitions=Registry.from_definitions(ast.definitions),
            snapshot=snapshot, channels=channels,
        )
        with pytest.raises(Exception) as info:
            run_pass("functions", ast, ctx)
        assert "depth" in str(info.value)


class TestFlatten:
    def _flatten(self, ast, snapshot, channels):
        ast, ctx = ctx_for(ast, snapshot, channels)
        for name in ("gate-structure", "gate-layer", "functions", "flatten"):
            ast = run_pass(name, ast, ctx)
        return ast, ctx

    def test_since_last_action_chain(self, snapshot, channels):
        ast = experiment(
            event(0, dds(CH0, amplitude=ex.lit(1, "V"))),
            event(10_000, dds(CH1, amplitude=ex.lit(2, "V")), mode="since-last-action"),
        )
        flat, ctx = self._flatten(ast, snapshot, channels)
        solved = run_pass("solve", flat, ctx)
        ticks = [_event_tick(e) for e in solved.program.segments[0].items]
        assert ticks == [0, 20000]

    def test_single_action_at_zero(self, snapshot, channels):
        ast = experiment(event(0, dds(CH0, amplitude=ex.lit(1, "V"))))
        flat, ctx = self._flatten(ast, snapshot, channels)
        assert len(flat.program.segments[0].items) == 1

    def test_same_event_actions_share_tick_in_order(self, snapshot, channels):
        ast = experiment(event(
            0,
            dds(CH0, amplitude=ex.lit(1, "V")),
            dds(CH1, amplitude=ex.lit(2, "V")),
        ))
        flat, ctx = self._flatten(ast, snapshot, channels)
        items = flat.program.segments[0].items
        assert len(items) == 2
        assert _event_time_ns(items[0]) == _event_time_ns(items[1]) == 0
        assert items[0].items[0].channel == CH0  # program order preserved

    def test_since_previous_event_mode(self, snapshot, channels):
        ast = experiment(
            event(100, dds(CH0, amplitude=ex.lit(1, "V"))),
            event(50, dds(CH1, amplitude=ex.lit(2, "V")), mode="since-previous-event"),
        )
        flat, ctx = self._flatten(ast, snapshot, channels)
        times = [_event_time_ns(e) for e in flat.program.segments[0].items]
        assert times == pytest.approx([100.0, 150.0], rel=1e-12)

    def test_nested_offsets_compose_additively(self, snapshot, channels):
        inner = event(30, dds(CH1, amplitude=ex.lit(1, "V")))
        ast = experiment(event(100, dds(CH0, amplitude=ex.lit(1, "V")), inner))
        flat, ctx = self._flatten(ast, snapshot, channels)
        times = sorted(_event_time_ns(e) for e in flat.program.segments[0].items)
        assert times == pytest.approx([100.0, 130.0], rel=1e-12)

    def test_negative_time_rejected(self, snapshot, channels):
        inner = event(-200, dds(CH1, amplitude=ex.lit(1, "V")))
        ast = experiment(event(100, inner))
        with pytest.raises(NegativeTime):
            self._flatten(ast, snapshot, channels)


class TestSolve:
    def test_pi_time_quantization_warns(self, snapshot, channels):
        pi_time = ex.Binary("/", ex.lit(3.14159), ex.NamedConstant("DefaultMicrowaveRabiRate"))
        ast = experiment(
            event(0, dds(CH0, amplitude=ex.lit(1, "V"))),
            el.Event(el.StartTime(pi_time, "absolute"),
                     (dds(CH1, amplitude=ex.lit(0, "V")),)),
        )
        ast2, ctx = ctx_for(ast, snapshot, channels)
        for name in ("gate-structure", "gate-layer", "functions", "flatten", "solve"):
            ast2 = run_pass(name, ast2, ctx)
        ticks = sorted(_event_tick(e) for e in ast2.program.segments[0].items)
        assert ticks == [0, 6283]
        assert any("residual" in w.message for w in ctx.warnings)
        resid_warning = next(w for w in ctx.warnings if "residual" in w.message)
        assert "0.18" in resid_warning.message

    def test_strict_mode_raises(self, snapshot, channels):
        pi_time = ex.Binary("/", ex.lit(3.14159), ex.NamedConstant("DefaultMicrowaveRabiRate"))
        ast = experiment(
            el.Event(el.StartTime(pi_time, "absolute"),
                     (dds(CH1, amplitude=ex.lit(0, "V")),)),
        )
        ast2 = with_required_headers(ast)
        ctx = PassContext(
            definitions=Registry.from_definitions(ast2.definitions),
            snapshot=snapshot, channels=channels, strict_ticks=True,
        )
        for name in ("gate-structure", "gate-layer", "functions", "flatten"):
            ast2 = run_pass(name, ast2, ctx)
        with pytest.raises(TickQuantizationError):
            run_pass("solve", ast2, ctx)

    def test_zero_is_tick_zero(self, snapshot, channels):
        ast = experiment(event(0, dds(CH0, amplitude=ex.lit(0, "V"))))
        ast2, ctx = ctx_for(ast, snapshot, channels)
        for name in ("gate-structure", "gate-layer", "functions", "flatten", "solve"):
            ast2 = run_pass(name, ast2, ctx)
        assert _event_tick(ast2.program.segments[0].items[0]) == 0
        assert ctx.warnings == []


class TestChannelize:
    def _lower(self, ast, snapshot, channels):
        ast, ctx = ctx_for(ast, snapshot, channels)
        for name in ("gate-structure", "gate-layer", "functions", "flatten",
                     "solve", "channelize"):
            ast = run_pass(name, ast, ctx)
        return ast, ctx

    def test_two_parameters_two_actions(self, snapshot, channels):
        ast = experiment(event(0, dds(CH0, amplitude=ex.lit(1, "V"),
                                      frequency=ex.lit(200, "MHz"))))
        out, _ = self._lower(ast, snapshot, channels)
        items = out.program.segments[0].items
        assert len(items) == 2
        params = [i.items[0].parameters[0][0] for i in items]
        assert sorted(params) == ["amplitude", "frequency"]

    def test_single_parameter_single_action(self, snapshot, channels):
        ast = experiment(event(0, dds(CH0, phase=ex.lit(1.5))))
        out, _ = self._lower(ast, snapshot, channels)
        assert len(out.program.segments[0].items) == 1

    def test_ising_on_event_gives_seven_actions(self, ising_ast, snapshot, channels):
        # The interaction-on event in isolation: three oscillators,
        # 2 + 2 + 3 numeric parameters.
        on_event = ising_ast.program.segments[0].items[4]
        iso = el.Experiment(
            program=el.Program((el.Segment("main", (
                el.Event(el.StartTime(ex.lit(0, "ns"), "absolute"), on_event.items),
            )),)),
        )
        out, _ = self._lower(iso, snapshot, channels)
        items = out.program.segments[0].items
        assert len(items) == 7
        assert all(_event_tick(e) == 0 for e in items)

    def test_range_warning(self, snapshot, channels):
        ast = experiment(event(0, dds(CH0, amplitude=ex.lit(40, "V"))))
        _, ctx = self._lower(ast, snapshot, channels)
        assert any("outside range" in w.message for w in ctx.warnings)

    def test_unknown_channel_is_compile_error(self, snapshot, channels):
        ast = experiment(event(0, dds("channels.aom.fake.dds0", amplitude=ex.lit(1, "V"))))
        with pytest.raises(LintFailed):
            compile_experiment(ast, snapshot, CompileOptions())


class TestEmit:
    def test_two_writes_then_terminal(self, snapshot, channels):
        ast = experiment(
            event(0, dds(CH0, amplitude=ex.lit(1, "V"))),
            event(10_000, dds(CH0, amplitude=ex.lit(0, "V")), mode="since-last-action"),
        )
        result = compile_experiment(ast, snapshot, CompileOptions(channels=channels))
        stream = result.program.streams[f"{CH0}.amplitude"]
        assert [op.mnemonic for op in stream] == ["SETVALUE", "SETVALUE", "NOP"]
        assert [op.delay for op in stream] == [0, 20000, 0]

    def test_empty_program_compiles_to_nothing(self, snapshot, channels):
        result = compile_experiment(experiment(), snapshot, CompileOptions(channels=channels))
        assert result.program.engines == ()
        assert result.program.values == []

    def test_engine_idle_segment_gets_control_only(self, snapshot, channels):
        segs = (
            el.Segment("a", (event(0, dds(CH0, amplitude=ex.lit(1, "V"))),)),
            el.Segment("b", (event(0, dds(CH1, amplitude=ex.lit(1, "V"))),)),
        )
        result = compile_experiment(experiment(segments=segs), snapshot,
                                    CompileOptions(channels=channels))
        stream = result.program.streams[f"{CH1}.amplitude"]
        # idle in segment a: only the chaining GOTO, then its own write
        assert [op.mnemonic for op in stream] == ["GOTO", "SETVALUE", "NOP"]

    def test_decision_emits_branchlut_with_table(self, snapshot, channels, five_qubit_ast):
        result = compile_experiment(five_qubit_ast, snapshot, CompileOptions(channels=channels))
        program = result.program
        assert len(program.tables) == 5  # four flag rounds plus the NFT table
        table0 = program.tables[0]
        entries = dict(table0.entries)
        assert entries["1"] == list(program.segment_names).index("NFT-SMC")
        assert entries["0"] == list(program.segment_names).index("FT-SMC-1")
        engine = program.engines[0]
        mnemonics = [op.mnemonic for op in program.streams[engine]]
        assert mnemonics.count("BRANCHLUT") == 5
        assert mnemonics[-1] == "NOP"

    def test_branch_offsets_resolve_on_every_engine(self, snapshot, channels, five_qubit_ast):
        program = compile_experiment(
            five_qubit_ast, snapshot, CompileOptions(channels=channels)
        ).program
        for engine in program.engines:
            offsets = program.segment_offsets[engine]
            assert len(offsets) == len(program.segment_names)
            stream = program.streams[engine]
            for op in stream:
                if op.mnemonic == "BRANCHLUT":
                    table = program.tables[op.table]
                    for _, target in table.entries:
                        assert target == HALT_TARGET or 0 <= offsets[target] < len(stream)

    def test_incomplete_table_completed_with_halt(self, snapshot, channels):
        segs = (
            el.Segment(
                "a",
                (event(0, el.MeasureAction("channels.counter.apd0", "m[0]",
                                           ex.lit(1, "us"))),),
                el.Decision((el.ResourceRef("m", 0),),
                            (el.Condition("0", "b"),)),
            ),
            el.Segment("b"),
        )
        result = compile_experiment(
            experiment(segments=segs, resources=[el.ResourceDecl("m", "counter", 1)]),
            snapshot, CompileOptions(channels=channels),
        )
        assert any("halt target" in w.message for w in result.warnings)
        entries = dict(result.program.tables[0].entries)
        assert entries["1"] == HALT_TARGET

    def test_simultaneous_write_rejected(self, snapshot, channels):
        ast = experiment(event(
            0,
            dds(CH0, amplitude=ex.lit(1, "V")),
            dds(CH0, amplitude=ex.lit(2, "V")),
        ))
        with pytest.raises(SimultaneousWrite):
            compile_experiment(ast, snapshot, CompileOptions(channels=channels))

    def test_oversized_delay_split_into_nops(self, snapshot, channels):
        # 10 ms gap = 20e6 ticks, beyond the 24-bit delay field
        ast = experiment(
            event(0, dds(CH0, amplitude=ex.lit(1, "V"))),
            event(10_000_000, dds(CH0, amplitude=ex.lit(0, "V"))),
        )
        result = compile_experiment(ast, snapshot, CompileOptions(channels=channels))
        stream = result.program.streams[f"{CH0}.amplitude"]
        assert stream[1].mnemonic == "NOP" and stream[1].delay == DELAY_MAX
        assert stream[2].mnemonic == "SETVALUE"
        assert sum(op.delay for op in stream) == 20_000_000

    def test_repeats_wrap_loop(self, snapshot, channels):
        ast = experiment(event(0, dds(CH0, amplitude=ex.lit(1, "V"))))
        result = compile_experiment(ast, snapshot,
                                    CompileOptions(channels=channels, repeats=3))
        stream = result.program.streams[f"{CH0}.amplitude"]
        assert [op.mnemonic for op in stream] == \
            ["SETLOOP", "SETVALUE", "DECLOOP", "JNZ", "NOP"]
        assert stream[0].operand == 3
        assert stream[3].operand == 1


class TestPipeline:
    def test_six_dumps_each_lint_clean(self, tmp_path, snapshot, ising_ast, five_qubit_ast):
        for name, ast in (("ising", ising_ast), ("five_qubit", five_qubit_ast)):
            dump_dir = tmp_path / name
            result = compile_experiment(ast, snapshot, CompileOptions(
                dump_dir=dump_dir, dump_stem=name, verify_passes=True,
            ))
            assert len(result.pass_dumps) == 6
            for k, path in enumerate(result.pass_dumps, start=1):
                assert path.name == f"{name}.pass{k}.xml"
                reparsed = parse_experiment(path.read_text())
                assert errors_only(lint(reparsed, Registry(()))) == []

    def test_expressiveness_reduction(self, snapshot, ising_ast):
        result = compile_experiment(ising_ast, snapshot, CompileOptions())
        gone: set = set()
        order = ["gate-structure", "gate-layer", "functions", "flatten", "solve", "channelize"]
        eliminated = {
            "gate-layer": (el.GateCall, el.GateBlock),
            "functions": (el.FunctionCall,),
        }
        for name in order:
            ast_k = result.pass_asts[name]
            for prior in order[: order.index(name) + 1]:
                for kind in eliminated.get(prior, ()):
                    gone.add(kind)
            for kind in gone:
                assert _count_kinds(ast_k.program, (kind,)) == 0, (name, kind)
        # terminal form: literal-only expressions
        terminal = result.pass_asts["channelize"]
        for segment in terminal.program.segments:
            for item in segment.items:
                assert isinstance(item.start_time.value, ex.Literal)

    def test_determinism_byte_identical(self, snapshot, five_qubit_ast):
        a = compile_experiment(five_qubit_ast, snapshot, CompileOptions())
        b = compile_experiment(five_qubit_ast, snapshot, CompileOptions())
        assert a.container_bytes == b.container_bytes

    def test_lint_failure_blocks_pipeline(self, snapshot):
        ast = experiment(segments=(
            el.Segment("a", (), el.Decision(
                (el.ResourceRef("ghost", 0),),
                (el.Condition("0", "nowhere"), el.Condition("1", "a")),
            )),
        ))
        with pytest.raises(LintFailed):
            compile_experiment(ast, snapshot, CompileOptions())

    def test_self_contained_compile_without_registry(self, snapshot, ising_ast, registry):
        included = with_required_headers(ising_ast, registry)
        result = compile_experiment(included, snapshot, CompileOptions(
            auto_headers=False, registry=Registry(()),
        ))
        assert result.program.engines  # compiled with no library access

    def test_prefix_sum_matches_timeline(self, snapshot, five_qubit_ast):
        result = compile_experiment(five_qubit_ast, snapshot, CompileOptions())
        program = result.program
        timeline = extract_timeline(result.pass_asts["channelize"])
        bases = []
        total = 0
        for duration in program.segment_durations:
            bases.append(total)
            total += duration
        for engine in program.engines:
            channel, _, parameter = engine.rpartition(".")
            expected: dict[int, float] = {}
            for seg_i, segment in enumerate(timeline.segments):
                for a in segment.actions:
                    if f"{a.channel}.{a.parameter}" == engine:
                        expected[bases[seg_i] + a.tick] = a.value
            cumulative = 0
            seen: dict[int, float] = {}
            for op in program.streams[engine]:
                cumulative += op.delay
                if op.mnemonic == "SETVALUE":
                    seen[cumulative] = program.values[op.operand]
            assert seen == expected


def _count_kinds(node, kinds) -> int:
    count = 0
    stack = [node]
    while stack:
        current = stack.pop()
        if isinstance(current, kinds):
            count += 1
        if isinstance(current, el.Experiment):
            stack.extend(current.program.segments)  # program body only
        elif isinstance(current, el.Program):
            stack.extend(current.segments)
        elif isinstance(current, el.Segment):
            stack.extend(current.items)
        elif isinstance(current, el.Event):
            stack.extend(current.items)
        elif isinstance(current, el.GateBlock):
            stack.extend(current.items)
    return count


def _event_time_ns(e: el.Event) -> float:
    assert isinstance(e.start_time.value, ex.Literal)
    return e.start_time.value.quantity.in_unit("ns")


def _event_tick(e: el.Event) -> int:
    assert isinstance(e.start_time.value, ex.Literal)
    q = e.start_time.value.quantity
    assert q.unit.symbol == "tick"
    return int(q.value)


def extract_timeline_safe_actions(ast) -> int:
    return _count_kinds(ast.program, el.ACTION_TYPES)
