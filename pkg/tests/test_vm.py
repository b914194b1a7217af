import pytest

from pulsestack.compiler.backend import (
    CompiledProgram,
    DecisionTable,
    HALT_TARGET,
    MeasurementSite,
)
from pulsestack.errors import BudgetExceeded, MalformedTable, PlanExhausted
from pulsestack.isa import Opcode
from pulsestack.vm import (
    MeasurementPlan,
    TraceEvent,
    read_trace,
    read_trace_binary,
    run,
    write_trace,
    write_trace_binary,
)

ENGINE = "channels.aom.raman.individual1.dds0.amplitude"
COUNTER = "channels.counter.apd0.gate"


def program_for(streams: dict[str, list[Opcode]], values: list[float],
                segments: tuple[str, ...] = ("main",),
                offsets: dict[str, list[int]] | None = None,
                durations: list[int] | None = None,
                tables: list[DecisionTable] | None = None,
                sites: list[MeasurementSite] | None = None) -> CompiledProgram:
    engines = tuple(sorted(streams))
    return CompiledProgram(
        engines=engines,
        streams=streams,
        values=values,
        segment_names=segments,
        segment_offsets=offsets or {e: [0] for e in engines},
        segment_durations=durations or [0],
        tables=tables or [],
        sites=sites or [],
        metadata={},
    )


class TestBasics:
    def test_setvalue_timing(self):
        program = program_for(
            {ENGINE: [Opcode.setvalue(0, 0), Opcode.setvalue(20000, 1), Opcode.nop(0)]},
            values=[5.0, 0.0],
        )
        result = run(program)
        events = [(e.tick, e.payload["value"]) for e in result.value_set_events()]
        assert events == [(0, 5.0), (20000, 0.0)]
        assert result.final_tick == 20000

    def test_empty_program_halts_immediately(self):
        program = program_for({}, values=[], offsets={}, segments=())
        result = run(program)
        assert result.trace == []
        assert result.final_tick == 0

    def test_prefix_sum_law_on_stream(self):
        stream = [Opcode.setvalue(3, 0), Opcode.setvalue(5, 0), Opcode.nop(2)]
        program = program_for({ENGINE: stream}, values=[1.0])
        result = run(program)
        ticks = [e.tick for e in result.value_set_events()]
        assert ticks == [3, 8]  # cumulative delays
        halt = [e for e in result.trace if e.kind == "halt"]
        assert halt[0].tick == 10

    def test_budget_zero_raises(self):
        program = program_for({ENGINE: [Opcode.nop(0)]}, values=[])
        with pytest.raises(BudgetExceeded):
            run(program, budget=0)

    def test_budget_exceeded_mid_run(self):
        program = program_for(
            {ENGINE: [Opcode.setvalue(10_000, 0), Opcode.nop(0)]}, values=[1.0]
        )
        with pytest.raises(BudgetExceeded):
            run(program, budget=100)

    def test_zero_delay_spin_hits_instruction_cap(self):
        stream = [Opcode.setloop(0, 1), Opcode.goto(0, 0)]
        program = program_for({ENGINE: stream}, values=[])
        with pytest.raises(BudgetExceeded):
            run(program, instruction_cap=1000)


class TestLoops:
    def _loop_stream(self, n: int) -> list[Opcode]:
        # Canonical counted loop: SETLOOP n, JZ exit, body, DECLOOP, JNZ body
        return [
            Opcode.setloop(0, n),
            Opcode.jz(0, 5),
            Opcode.setvalue(10, 0),  # body start (pc 2)
            Opcode.decloop(0),
            Opcode.jnz(0, 2),
            Opcode.nop(0),
        ]

    @pytest.mark.parametrize("n", [0, 1, 7, 255, 65535])
    def test_loop_body_runs_exactly_n_times(self, n):
        program = program_for({ENGINE: self._loop_stream(n)}, values=[1.0])
        result = run(program, instruction_cap=10_000_000)
        body_runs = len(result.value_set_events())
        assert body_runs == n

    def test_jz_taken_on_zero(self):
        stream = [
            Opcode.setloop(0, 0),
            Opcode.jz(0, 3),
            Opcode.setvalue(0, 0),  # skipped
            Opcode.nop(0),
        ]
        program = program_for({ENGINE: stream}, values=[9.0])
        result = run(program)
        assert result.value_set_events() == []
        assert any(e.kind == "branch-taken" for e in result.trace)

    def test_jnz_not_taken_on_zero(self):
        stream = [
            Opcode.setloop(0, 0),
            Opcode.jnz(0, 0),
            Opcode.setvalue(0, 0),
            Opcode.nop(0),
        ]
        program = program_for({ENGINE: stream}, values=[9.0])
        result = run(program)
        assert len(result.value_set_events()) == 1

    def test_goto_chain_emits_branch_events(self):
        k = 5
        stream = [Opcode.goto(0, i + 1) for i in range(k)] + [Opcode.nop(0)]
        program = program_for({ENGINE: stream}, values=[])
        result = run(program)
        branch_events = [e for e in result.trace
                        if e.kind == "branch-taken" and e.engine == ENGINE]
        assert len(branch_events) == k

    def test_decloop_floors_at_zero(self):
        stream = [
            Opcode.setloop(0, 1),
            Opcode.decloop(0),
            Opcode.decloop(0),
            Opcode.jnz(0, 1),  # counter pinned at zero: not taken
            Opcode.nop(0),
        ]
        program = program_for({ENGINE: stream}, values=[])
        result = run(program)
        assert not any(e.kind == "loop-iteration" for e in result.trace)


class TestMeasurement:
    def _measure_program(self, latency=0, threshold=1,
                         conditions=(("0", 1), ("1", 1))) -> CompiledProgram:
        site = MeasurementSite(0, 0, "channels.counter.apd0", 0, "m[0]", threshold)
        table = DecisionTable(0, (0,), (threshold,), tuple(conditions))
        streams = {
            COUNTER: [
                Opcode.setvalue(0, 0),      # gate open
                Opcode.setvalue(100, 1),    # gate close -> draw
                Opcode.branchlut(0, 0, 0),
                Opcode.nop(0),
            ],
        }
        return program_for(
            streams, values=[1.0, 0.0], segments=("main", "after"),
            offsets={COUNTER: [0, 3]}, durations=[100, 0],
            tables=[table], sites=[site],
        )

    def test_scripted_zero_below_threshold(self):
        program = self._measure_program()
        plan = MeasurementPlan({"sites": {"m[0]": {"counts": [0]}}})
        result = run(program, plan)
        assert result.resources["m[0]"] == 0
        assert result.counts["m[0]"] == 0

    def test_scripted_count_meets_threshold(self):
        program = self._measure_program(threshold=3)
        plan = MeasurementPlan({"sites": {"m[0]": {"counts": [3]}}})
        result = run(program, plan)
        assert result.resources["m[0]"] == 1

    def test_seeded_plan_reproducible(self):
        program = self._measure_program()
        spec = {"sites": {"m[0]": {"seed": 7, "distribution": "poisson", "mean": 2.0}}}
        bits_a = run(program, MeasurementPlan(spec)).resources["m[0]"]
        bits_b = run(program, MeasurementPlan(spec)).resources["m[0]"]
        assert bits_a == bits_b

    def test_plan_exhausted(self):
        program = self._measure_program()
        plan = MeasurementPlan({"sites": {"m[0]": {"counts": [], "cycle": False}}})
        with pytest.raises(PlanExhausted):
            run(program, plan)

    def test_publication_latency_delays_branch(self):
        program = self._measure_program()
        plan = MeasurementPlan({
            "latency_ticks": 50, "sites": {"m[0]": {"counts": [5]}},
        })
        result = run(program, plan)
        published = next(e for e in result.trace if e.kind == "measurement-published")
        assert published.tick == 150  # stop at 100 plus latency
        branch = next(e for e in result.trace
                      if e.kind == "branch-taken" and e.engine == COUNTER)
        assert branch.tick == 150  # stalled until the publication

    def test_branch_halt_target(self):
        program = self._measure_program(conditions=(("0", HALT_TARGET), ("1", 1)))
        plan = MeasurementPlan({"sites": {"m[0]": {"counts": [0]}}})
        result = run(program, plan)
        branch = next(e for e in result.trace
                      if e.kind == "branch-taken" and e.engine == COUNTER)
        assert branch.payload["to"] == "halt"

    def test_missing_publication_deadlocks_as_malformed(self):
        # branch waits on a site that never publishes
        site = MeasurementSite(0, 0, "channels.counter.apd0", 0, "m[0]", 1)
        table = DecisionTable(0, (0,), (1,), (("0", 1), ("1", 1)))
        streams = {ENGINE: [Opcode.branchlut(0, 0, 0), Opcode.nop(0)]}
        program = program_for(streams, values=[], segments=("main", "after"),
                              offsets={ENGINE: [0, 1]}, durations=[0, 0],
                              tables=[table], sites=[site])
        with pytest.raises(MalformedTable):
            run(program)


class TestDDSCore:
    def _ramp_program(self, p0: float, p1: float, window_ticks: int):
        ch = "channels.aom.raman.individual1.dds2"
        streams = {
            f"{ch}.interp_p0": [Opcode.setvalue(0, 0), Opcode.nop(window_ticks)],
            f"{ch}.interp_p1": [Opcode.setvalue(0, 1), Opcode.nop(window_ticks)],
        }
        offsets = {e: [0] for e in streams}
        return program_for(streams, values=[p0, p1],
                           offsets=offsets, durations=[window_ticks])

    def test_linear_ramp_endpoint(self):
        # one sample per ns at 1 GHz sample clock: 10 us -> 10000 samples
        program = self._ramp_program(1.0, -5e-6, 20000)
        result = run(program)
        core = result.dds_core("channels.aom.raman.individual1.dds2")
        assert core.amplitude_at(20000) == pytest.approx(0.95, abs=5e-6)
        assert core.amplitude_at(10000) == pytest.approx(0.975, abs=5e-6)

    def test_zero_slope_constant(self):
        program = self._ramp_program(0.5, 0.0, 1000)
        core = run(program).dds_core("channels.aom.raman.individual1.dds2")
        assert core.amplitude_at(600) == 0.5

    def test_ramp_clamps_to_channel_range(self):
        # slope large enough to leave the +-5 V amplitude range
        program = self._ramp_program(4.9, 0.1, 4000)
        core = run(program).dds_core("channels.aom.raman.individual1.dds2")
        assert core.amplitude_at(4000) == 5.0  # clamped

    def test_amplitude_write_stops_interpolation(self):
        ch = "channels.aom.raman.individual1.dds2"
        streams = {
            f"{ch}.interp_p0": [Opcode.setvalue(0, 0), Opcode.nop(4000)],
            f"{ch}.interp_p1": [Opcode.setvalue(0, 1), Opcode.nop(4000)],
            f"{ch}.amplitude": [Opcode.setvalue(2000, 2), Opcode.nop(2000)],
        }
        program = program_for(streams, values=[1.0, -5e-6, 0.0],
                              offsets={e: [0] for e in streams}, durations=[4000])
        core = run(program).dds_core(ch)
        assert core.amplitude_at(2001) == 0.0
        assert core.amplitude_at(4000) == 0.0

    def test_waveform_sampling(self):
        program = self._ramp_program(1.0, -5e-6, 20000)
        core = run(program).dds_core("channels.aom.raman.individual1.dds2")
        series = core.waveform(0, 20000, points=5)
        assert [t for t, _ in series] == [0, 5000, 10000, 15000, 20000]
        values = [v for _, v in series]
        assert values[0] == 0.0  # amplitude_at reads just before the load at 0
        assert values[1] == pytest.approx(0.9875, abs=5e-6)  # 2500 samples in
        assert values[-1] == pytest.approx(0.95, abs=5e-6)


class TestDeterminism:
    def test_identical_runs_identical_traces(self, snapshot, five_qubit_ast, tmp_path):
        from pulsestack.compiler import CompileOptions, compile_experiment

        program = compile_experiment(five_qubit_ast, snapshot, CompileOptions()).program
        spec = {"default": {"seed": 11, "distribution": "poisson", "mean": 0.5}}
        a = run(program, MeasurementPlan(spec))
        b = run(program, MeasurementPlan(spec))
        assert [e.line() for e in a.trace] == [e.line() for e in b.trace]
        path_a, path_b = tmp_path / "a.trace", tmp_path / "b.trace"
        write_trace(path_a, a.trace)
        write_trace(path_b, b.trace)
        assert path_a.read_bytes() == path_b.read_bytes()

    def test_trace_text_round_trip(self, tmp_path):
        events = [
            TraceEvent(0, ENGINE, "value-set", {"value": 1.5}),
            TraceEvent(7, "global", "branch-taken", {"to": "x", "via": "goto"}),
        ]
        path = tmp_path / "t.trace"
        write_trace(path, events)
        assert read_trace(path) == events

    def test_trace_binary_round_trip(self, tmp_path):
        events = [
            TraceEvent(0, ENGINE, "value-set", {"value": 1.5}),
            TraceEvent(3, ENGINE, "halt", {}),
        ]
        path = tmp_path / "t.bintrace"
        write_trace_binary(path, events)
        assert read_trace_binary(path) == events


class TestBranchCoherence:
    def test_all_engines_land_in_destination_segment(self, snapshot, five_qubit_ast):
        from pulsestack.compiler import CompileOptions, compile_experiment

        program = compile_experiment(five_qubit_ast, snapshot, CompileOptions()).program
        plan = MeasurementPlan({
            "default": {"counts": [0], "cycle": True},
            "sites": {"m[1]": {"counts": [5], "cycle": True}},
        })
        result = run(program, plan)
        assert result.segments_visited == ["FT-SMC-0", "NFT-SMC", "Done"]
        # every engine's branch events name the same destinations in order
        per_engine = {}
        for e in result.trace:
            if e.kind == "branch-taken" and e.engine != "global" and "key" in e.payload:
                per_engine.setdefault(e.engine, []).append(e.payload["to"])
        assert per_engine
        destinations = set(tuple(v) for v in per_engine.values())
        assert len(destinations) == 1


class TestTraceOrdering:
    def test_trace_globally_tick_ordered(self, snapshot, five_qubit_ast):
        from pulsestack.compiler import CompileOptions, compile_experiment

        program = compile_experiment(five_qubit_ast, snapshot, CompileOptions()).program
        plan = MeasurementPlan({
            "latency_ticks": 25,
            "default": {"counts": [0], "cycle": True},
            "sites": {"m[5]": {"counts": [7], "cycle": True}},
        })
        result = run(program, plan)
        ticks = [e.tick for e in result.trace]
        assert ticks == sorted(ticks)
        per_engine: dict[str, int] = {}
        for e in result.trace:
            assert e.tick >= per_engine.get(e.engine, 0)
            per_engine[e.engine] = e.tick

    def test_budget_boundary_inclusive(self):
        program = program_for(
            {ENGINE: [Opcode.setvalue(100, 0), Opcode.nop(0)]}, values=[1.0]
        )
        result = run(program, budget=100)  # final instruction lands exactly on it
        assert result.final_tick == 100
