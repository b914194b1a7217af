import pytest

from pulsestack import elements as el
from pulsestack import expressions as ex
from pulsestack.errors import (
    ArityMismatch,
    DimensionError,
    MissingArgument,
    UnknownFunction,
    UnknownGate,
    UnknownPort,
    UnresolvedName,
    errors_only,
)
from pulsestack.lint import lint
from pulsestack.stdlib import (
    Registry,
    builtin_registry,
    check_call_graph,
    required_headers,
    with_required_headers,
)
from pulsestack.xml_io import serialize_xml, parse_xml


class TestResolveGate:
    def test_cnot_is_a_native_gate_sequence(self, registry):
        instance = registry.resolve_gate("CNOT", qubits=[0, 1])
        assert len(instance.body) == 4  # layered native-rotation/XX sequence
        assert all(isinstance(item, el.GateBlock) for item in instance.body)
        names = [
            call.name
            for block in instance.body
            for call in block.items
        ]
        assert "XX" in names
        # ports are bound to concrete qubit indices
        xx = next(c for b in instance.body for c in b.items if c.name == "XX")
        assert [q.index for q in xx.qubits] == [0, 1]

    def test_arity_mismatch(self, registry):
        with pytest.raises(ArityMismatch):
            registry.resolve_gate("CNOT", qubits=[0])

    def test_unknown_gate(self, registry):
        with pytest.raises(UnknownGate):
            registry.resolve_gate("Fredkin", qubits=[0, 1, 2])

    def test_unknown_port(self, registry):
        with pytest.raises(UnknownPort):
            registry.resolve_gate("CNOT", ports={"Control": 0, "Sideways": 1})

    def test_half_pi_duration_under_seed_snapshot(self, registry, snapshot):
        instance = registry.resolve_gate("XPi/2", ports={"ion": 0})
        duration = ex.evaluate(
            instance.duration, snapshot, registry.calculation_exprs()
        )
        assert duration.in_unit("us") == pytest.approx(1.5708, abs=1e-4)

    def test_port_binding_substitutes_channels(self, registry):
        instance = registry.resolve_gate("XPi/2", ports={"ion": 3})
        call = instance.body[0]
        assert isinstance(call, el.FunctionCall)
        ion_arg = next(a for a in call.arguments if a.name == "ion")
        assert ion_arg.value == ex.lit(3)


class TestResolveFunction:
    def test_doppler_cooling_spans_duration(self, registry, snapshot):
        events = registry.resolve_function("DopplerCooling", duration=ex.lit(3, "ms"))
        assert len(events) == 2
        off = ex.evaluate(events[1].start_time.value, snapshot)
        assert off.in_unit("ms") == pytest.approx(3)

    def test_zero_duration_pair_at_same_time(self, registry, snapshot):
        events = registry.resolve_function("DopplerCooling", duration=ex.lit(0, "ms"))
        t0 = ex.evaluate(events[0].start_time.value, snapshot)
        t1 = ex.evaluate(events[1].start_time.value, snapshot)
        assert t0.si == t1.si == 0.0

    def test_global_readout_counter_window(self, registry, snapshot):
        events = registry.resolve_function(
            "GlobalReadout", duration=ex.lit(0.5, "ms"), resource="r0[0]"
        )
        starts = [i for e in events for i in e.items if isinstance(i, el.CounterStart)]
        stops = [i for e in events for i in e.items if isinstance(i, el.CounterStop)]
        assert len(starts) == 1 and len(stops) == 1
        assert starts[0].resource == "r0[0]"
        stop_event = next(e for e in events if any(isinstance(i, el.CounterStop) for i in e.items))
        gap = ex.evaluate(stop_event.start_time.value, snapshot)
        assert gap.in_unit("ms") == pytest.approx(0.5)

    def test_missing_argument(self, registry):
        with pytest.raises(MissingArgument):
            registry.resolve_function("DopplerCooling")

    def test_wrong_dimension_argument(self, registry):
        with pytest.raises(DimensionError):
            registry.resolve_function("DopplerCooling", duration=ex.lit(3, "MHz"))

    def test_unknown_function(self, registry):
        with pytest.raises(UnknownFunction):
            registry.resolve_function("MagicCooling", duration=ex.lit(1, "ms"))

    def test_default_parameters_apply(self, registry, snapshot):
        events = registry.resolve_function(
            "RotationPulse", ion=0, duration=ex.lit(1, "us")
        )
        action = events[0].items[0]
        assert isinstance(action, el.DDSAction)
        assert action.channel == "channels.microwave.individual0.dds0"
        phase = action.parameter_map()["phase"]
        assert ex.evaluate(phase, snapshot).si == 0.0


class TestRequiredHeaders:
    def test_empty_program(self):
        ast = el.Experiment(program=el.Program((el.Segment("main"),)))
        assert required_headers(ast) == ((), ())

    def test_ising_corpus_closure(self, ising_ast):
        headers, definitions = required_headers(ising_ast)
        names = {h.name for h in headers}
        assert names == {
            "DopplerCooling", "OpticalPumping", "SidebandCooling", "GlobalReadout",
            "XPi/2", "RotationPulse", "DefaultMicrowavePiTime",
        }
        assert {d.name for d in definitions} == names

    def test_cnot_closure_includes_dependencies(self):
        ast = el.Experiment(program=el.Program((el.Segment("main", (
            el.GateBlock((el.GateCall("CNOT", (
                el.QubitBinding(0, "Control"), el.QubitBinding(1, "Target"),
            )),)),
        )),)))
        headers, _ = required_headers(ast)
        names = {h.name for h in headers}
        assert {"CNOT", "XX", "XXPulse", "RotationPulse",
                "YPi/2", "YPi/2Inv", "XPi/2Inv", "DefaultMicrowavePiTime"} <= names

    def test_closure_idempotent(self, ising_ast, registry):
        included = with_required_headers(ising_ast, registry)
        headers2, defs2 = required_headers(included, registry)
        assert headers2 == () and defs2 == ()

    def test_unknown_name_raises(self):
        ast = el.Experiment(program=el.Program((el.Segment("main", (
            el.Event(el.StartTime(ex.lit(0, "ns"), "absolute"),
                     (el.FunctionCall("Mystery"),)),
        )),)))
        with pytest.raises(UnresolvedName):
            required_headers(ast)


class TestRegistryHygiene:
    def test_every_definition_lints_clean(self, registry):
        # Each stdlib body must satisfy the language rules on its own.
        for kind in ("gates", "functions", "calculations"):
            for name, definition in getattr(registry, kind).items():
                host = el.Experiment(
                    program=el.Program((el.Segment("main"),)),
                    definitions=(definition,),
                )
                assert errors_only(lint(host)) == [], f"{kind}/{name}"

    def test_no_call_cycles(self, registry):
        assert check_call_graph(registry) == []

    def test_definitions_round_trip_xml(self, registry):
        for table in ("gates", "functions", "calculations"):
            for definition in getattr(registry, table).values():
                text = serialize_xml(definition)
                assert parse_xml(text) == definition

    def test_user_directory_overrides_by_name(self, tmp_path, registry):
        (tmp_path / "calculations").mkdir()
        (tmp_path / "calculations" / "DefaultMicrowavePiTime.xml").write_text(
            '<?xml version="1.0" encoding="UTF-8"?>\n'
            '<qi:CalculationDefinition name="DefaultMicrowavePiTime"'
            ' xmlns:qi="https://iqc.uwaterloo.ca/quantumion">'
            "<qi:NumericLiteral units=\"us\">7</qi:NumericLiteral>"
            "</qi:CalculationDefinition>\n"
        )
        (tmp_path / "index.json").write_text(
            '{"DefaultMicrowavePiTime": {"kind": "calculation",'
            ' "file": "calculations/DefaultMicrowavePiTime.xml"}}'
        )
        from pulsestack.stdlib import load_registry

        merged = load_registry([tmp_path])
        expr = merged.calculations["DefaultMicrowavePiTime"].expression
        assert expr == ex.lit(7, "us")
        # untouched entries fall through to the builtin library
        assert "CNOT" in merged.gates

    def test_gate_durations_match_flattened_bodies(self, registry, snapshot):
        # The declared nominal duration must agree with the span of the
        # flattened body (within the one-tick layer chaining boundaries).
        from pulsestack.compiler import CompileOptions, compile_experiment

        cases = {
            "XPi/2": [el.QubitBinding(0, "ion")],
            "XX": [el.QubitBinding(0, "Control"), el.QubitBinding(1, "Target")],
            "CNOT": [el.QubitBinding(0, "Control"), el.QubitBinding(1, "Target")],
            "H": [el.QubitBinding(2, "Target")],
        }
        for name, qubits in cases.items():
            gate = registry.gates[name]
            layers = max(1, len(gate.body))
            ast = el.Experiment(program=el.Program((el.Segment("main", (
                el.GateBlock((el.GateCall(name, tuple(qubits)),)),
            )),)))
            result = compile_experiment(ast, snapshot, CompileOptions())
            span_ticks = result.program.segment_durations[0]
            declared = ex.evaluate(gate.duration, snapshot, registry.calculation_exprs())
            declared_ticks = declared.si / 0.5e-9
            # one boundary tick per layer, plus the leading block gap
            assert abs(span_ticks - declared_ticks) <= layers + 2, name
