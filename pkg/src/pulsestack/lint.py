"""Structural validation of programs ahead of compilation.

lint() never raises; every violation becomes a Diagnostic with a
severity and an XPath-like element path. An empty result means all
type invariants hold and the program may enter the pipeline.
"""
from __future__ import annotations

from . import elements as el
from . import expressions as ex
from .channels import ChannelRegistry, builtin_registry as builtin_channels
from .errors import Diagnostic, errors_only
from .stdlib import Registry, check_call_graph, template_fields
from .units import COUNT, DIMENSIONLESS, TIME, DIMENSION_NAMES, dims_name

MAX_EVENT_DEPTH = 32

_COUNTER_ACTIONS = (el.CounterStart, el.CounterStop, el.MeasureAction)


class _Linter:
    def __init__(self, ast: el.Experiment, registry: Registry, channels: ChannelRegistry):
        self.ast = ast
        self.registry = registry
        self.channels = channels
        self.diags: list[Diagnostic] = []
        self.local = Registry.from_definitions(ast.definitions)
        self.known_kinds = registry.name_kinds()
        self.known_kinds.update(self.local.name_kinds())

    def error(self, message: str, path: str) -> None:
        self.diags.append(Diagnostic("error", message, path))

    def warning(self, message: str, path: str) -> None:
        self.diags.append(Diagnostic("warning", message, path))

    # -- entry ------------------------------------------------------------

    def run(self) -> list[Diagnostic]:
        self._resources()
        self._headers()
        self._definitions()
        self._program()
        return self.diags

    # -- sections ----------------------------------------------------------

    def _resources(self) -> None:
        seen: set[str] = set()
        for i, r in enumerate(self.ast.resources):
            if r.name in seen:
                self.error(f"duplicate resource name {r.name!r}",
                           f"/Experiment/Resources/Resource[{i}]")
            seen.add(r.name)

    def _headers(self) -> None:
        for i, h in enumerate(self.ast.headers):
            path = f"/Experiment/Headers/Header[{i}]"
            kind = self.known_kinds.get(h.name)
            if kind is None:
                self.error(f"header {h.name!r} has no definition and is not"
                           " a known library name", path)
            elif kind != h.kind:
                self.error(f"header {h.name!r} declared as {h.kind}, defined as {kind}", path)

    def _definitions(self) -> None:
        seen: set[tuple[str, str]] = set()
        for i, d in enumerate(self.ast.definitions):
            kind = el.definition_kind(d)
            path = f"/Experiment/Definitions/{type(d).__name__}[{i}]"
            if (kind, d.name) in seen:
                self.error(f"duplicate {kind} definition {d.name!r}", path)
            seen.add((kind, d.name))
            self._definition_body(d, path)
        for p in check_call_graph(self.local):
            self.error(f"recursive definitions: {p}", "/Experiment/Definitions")

    def _definition_body(self, d: el.Definition, path: str) -> None:
        if isinstance(d, el.CalculationDefinition):
            self._expression(d.expression, f"{path}/expression", allowed_params=set())
            return
        params = {p.name for p in d.parameters}
        if isinstance(d, el.GateDefinition):
            params |= set(d.ports)
            if len(set(d.ports)) != len(d.ports):
                self.error(f"gate {d.name!r} has duplicate ports", path)
            if d.duration is not None:
                self._expression(d.duration, f"{path}/Duration", allowed_params=params)
            for j, item in enumerate(d.body):
                self._gate_body_item(item, f"{path}/Body[{j}]", params)
        else:
            for j, e in enumerate(d.body):
                self._event(e, f"{path}/Body/Event[{j}]", in_definition=True,
                            allowed_params=params, depth=0)

    def _gate_body_item(self, item, path: str, params: set[str]) -> None:
        if isinstance(item, el.GateBlock):
            for j, sub in enumerate(item.items):
                self._gate_body_item(sub, f"{path}/GateBlock[{j}]", params)
        elif isinstance(item, el.GateCall):
            self._gate_call(item, path, in_definition=True, allowed_params=params)
        elif isinstance(item, el.FunctionCall):
            self._function_call(item, path, in_definition=True, allowed_params=params)
        else:
            self._event(item, path, in_definition=True, allowed_params=params, depth=0)

    def _program(self) -> None:
        names = self.ast.segment_names()
        seen: set[str] = set()
        for i, name in enumerate(names):
            if name in seen:
                self.error(f"duplicate segment name {name!r}",
                           f"/Experiment/Program/Segment[{i}]")
            seen.add(name)
        for i, segment in enumerate(self.ast.program.segments):
            path = f"/Experiment/Program/Segment[{i}]"
            if segment.decision_position is not None:
                self.error("Decision must be the final element of the Segment", path)
            for j, item in enumerate(segment.items):
                if isinstance(item, el.Event):
                    self._event(item, f"{path}/Event[{j}]", in_definition=False,
                                allowed_params=set(), depth=0)
                else:
                    self._gate_block(item, f"{path}/GateBlock[{j}]")
            if segment.decision is not None:
                self._decision(segment.decision, f"{path}/Decision", set(names))

    def _decision(self, decision: el.Decision, path: str, segment_names: set[str]) -> None:
        for ref in decision.resources:
            self._resource_ref(str(ref), path)
        width = len(decision.resources)
        states: set[str] = set()
        for k, cond in enumerate(decision.conditions):
            cpath = f"{path}/Condition[{k}]"
            if cond.state in states:
                self.error(f"duplicate condition state {cond.state!r}", cpath)
            states.add(cond.state)
            if not set(cond.state) <= {"0", "1"} or not cond.state:
                self.error(f"condition state {cond.state!r} is not a bitstring", cpath)
            elif len(cond.state) != width:
                self.error(
                    f"condition state {cond.state!r} has width {len(cond.state)},"
                    f" decision reads {width} resource bit(s)", cpath)
            if cond.destination_segment not in segment_names:
                self.error(
                    f"destination segment {cond.destination_segment!r} does not exist",
                    cpath)
        if decision.threshold is not None:
            self._expression(decision.threshold, f"{path}/Threshold", set(),
                             want_dims=(COUNT, DIMENSIONLESS), what="threshold")

    def _gate_block(self, block: el.GateBlock, path: str) -> None:
        for j, item in enumerate(block.items):
            if isinstance(item, el.GateBlock):
                self._gate_block(item, f"{path}/GateBlock[{j}]")
            else:
                self._gate_call(item, f"{path}/GateCall[{j}]",
                                in_definition=False, allowed_params=set())

    def _gate_call(self, call: el.GateCall, path: str, in_definition: bool,
                   allowed_params: set[str]) -> None:
        kind = self.known_kinds.get(call.name)
        if kind is None:
            self.error(f"unknown gate {call.name!r}", path)
            return
        if kind != "gate":
            self.error(f"{call.name!r} is a {kind}, called as a gate", path)
            return
        gate = self.local.gates.get(call.name) or self.registry.gates.get(call.name)
        assert gate is not None
        if len(call.qubits) != gate.arity:
            self.error(
                f"gate {call.name!r} takes {gate.arity} qubit(s),"
                f" got {len(call.qubits)}", path)
        for q in call.qubits:
            if q.port is not None and q.port not in gate.ports:
                self.error(f"gate {call.name!r} has no port {q.port!r}", path)
            if q.ref is not None:
                if not in_definition:
                    self.error("qubit ref bindings are only valid inside definitions", path)
                elif q.ref not in allowed_params:
                    self.error(f"qubit ref {q.ref!r} is not a declared port/parameter", path)
        self._call_arguments(call.arguments, gate.parameters, path, in_definition,
                             allowed_params)

    def _function_call(self, call: el.FunctionCall, path: str, in_definition: bool,
                       allowed_params: set[str]) -> None:
        kind = self.known_kinds.get(call.name)
        if kind is None:
            self.error(f"unknown function {call.name!r}", path)
            return
        if kind != "function":
            self.error(f"{call.name!r} is a {kind}, called as a function", path)
            return
        fn = self.local.functions.get(call.name) or self.registry.functions.get(call.name)
        assert fn is not None
        self._call_arguments(call.arguments, fn.parameters, path, in_definition,
                             allowed_params)

    def _call_arguments(self, args, params, path: str, in_definition: bool,
                        allowed_params: set[str]) -> None:
        declared = {p.name: p for p in params}
        supplied: set[str] = set()
        for a in args:
            if a.name in supplied:
                self.error(f"argument {a.name!r} supplied twice", path)
            supplied.add(a.name)
            p = declared.get(a.name)
            if p is None:
                self.error(f"unknown argument {a.name!r}", path)
                continue
            if p.dimension == "resource":
                if a.ref is None:
                    self.error(f"argument {a.name!r} must be a resource reference", path)
                elif in_definition:
                    self._template_ok(a.ref, path, allowed_params, what="resource reference")
                else:
                    self._resource_ref(a.ref, path)
            else:
                if a.value is None:
                    self.error(f"argument {a.name!r} must be an expression", path)
                else:
                    want = DIMENSION_NAMES.get(p.dimension)
                    self._expression(
                        a.value, path, allowed_params,
                        want_dims=None if want is None else (want,),
                        what=f"argument {a.name!r}")
        for name, p in declared.items():
            if p.default is None and name not in supplied:
                self.error(f"missing argument {name!r}", path)

    def _event(self, event: el.Event, path: str, in_definition: bool,
               allowed_params: set[str], depth: int) -> None:
        if depth > MAX_EVENT_DEPTH:
            self.error(f"event nesting exceeds depth {MAX_EVENT_DEPTH}", path)
            return
        self._expression(event.start_time.value, f"{path}/StartTime", allowed_params,
                         want_dims=(TIME,), what="start time")
        for j, item in enumerate(event.items):
            cpath = f"{path}/{type(item).__name__}[{j}]"
            if isinstance(item, el.Event):
                self._event(item, cpath, in_definition, allowed_params, depth + 1)
            elif isinstance(item, el.FunctionCall):
                self._function_call(item, cpath, in_definition, allowed_params)
            elif isinstance(item, el.GateCall):
                self._gate_call(item, cpath, in_definition, allowed_params)
            else:
                self._action(item, cpath, in_definition, allowed_params)

    def _action(self, action: el.Action, path: str, in_definition: bool,
                allowed_params: set[str]) -> None:
        channel = action.channel  # type: ignore[union-attr]
        self._channel(channel, path, in_definition, allowed_params,
                      expected_kind="counter" if isinstance(action, _COUNTER_ACTIONS) else
                      ("ttl" if isinstance(action, el.TTLSet) else "dds"))
        if isinstance(action, el.DDSAction):
            if action.interp_type is not None and action.interp_type != "polynomial":
                self.error(f"unsupported interp_type {action.interp_type!r}", path)
            for name, expr in action.parameters:
                if name not in el.DDSAction.PARAMETER_NAMES:
                    self.error(f"unknown DDS parameter {name!r}", path)
                    continue
                from .channels import ACTION_PARAM_DIMS
                self._expression(expr, f"{path}/{name}", allowed_params,
                                 want_dims=(ACTION_PARAM_DIMS[name],), what=name)
        elif isinstance(action, el.CounterStart):
            if action.resource is not None:
                if in_definition:
                    self._template_ok(action.resource, path, allowed_params,
                                      what="resource reference")
                else:
                    self._resource_ref(action.resource, path)
            if action.threshold is not None:
                self._expression(action.threshold, f"{path}/Threshold", allowed_params,
                                 want_dims=(COUNT, DIMENSIONLESS), what="threshold")
        elif isinstance(action, el.MeasureAction):
            if in_definition:
                self._template_ok(action.resource, path, allowed_params,
                                  what="resource reference")
            else:
                self._resource_ref(action.resource, path)
            self._expression(action.duration, f"{path}/Duration", allowed_params,
                             want_dims=(TIME,), what="duration")
            if action.threshold is not None:
                self._expression(action.threshold, f"{path}/Threshold", allowed_params,
                                 want_dims=(COUNT, DIMENSIONLESS), what="threshold")
        elif isinstance(action, el.TTLSet):
            self._expression(action.level, f"{path}/Level", allowed_params,
                             want_dims=(DIMENSIONLESS,), what="level")

    # -- leaf checks --------------------------------------------------------

    def _channel(self, channel: str, path: str, in_definition: bool,
                 allowed_params: set[str], expected_kind: str) -> None:
        fields = template_fields(channel)
        if fields:
            if not in_definition:
                self.error(f"channel template {channel!r} outside a definition", path)
                return
            bad = fields - allowed_params
            if bad:
                self.error(f"channel template fields {sorted(bad)} are not"
                           " declared parameters", path)
            if not el.channel_name_ok(channel, allow_templates=True):
                self.error(f"bad channel name {channel!r}", path)
            return
        if not el.channel_name_ok(channel):
            self.error(f"bad channel name {channel!r}", path)
            return
        descriptor = self.channels.get(channel)
        if descriptor is None:
            self.error(f"channel {channel!r} is not in the machine registry", path)
            return
        if descriptor.kind != expected_kind:
            self.error(
                f"channel {channel!r} is a {descriptor.kind} channel,"
                f" action needs {expected_kind}", path)

    def _template_ok(self, text: str, path: str, allowed_params: set[str],
                     what: str) -> None:
        bad = template_fields(text) - allowed_params
        if bad:
            self.error(f"{what} template fields {sorted(bad)} are not declared", path)

    def _resource_ref(self, text: str, path: str) -> None:
        if template_fields(text):
            self.error(f"resource template {text!r} outside a definition", path)
            return
        try:
            refs = el.ResourceRef.parse_list(text)
        except ValueError as e:
            self.error(str(e), path)
            return
        for ref in refs:
            decl = self.ast.resource_decl(ref.name)
            if decl is None:
                self.error(f"resource {ref.name!r} is not declared", path)
            elif not (0 <= ref.index < decl.length):
                self.error(
                    f"resource index {ref.index} out of range for"
                    f" {ref.name!r} (length {decl.length})", path)

    def _expression(self, expr: ex.Expression, path: str, allowed_params: set[str],
                    want_dims: tuple | None = None, what: str = "expression") -> None:
        for problem in ex.check_boolean_mixing(expr):
            self.error(problem, path)
        params = ex.parameter_names(expr)
        bad = params - allowed_params
        if bad:
            if allowed_params:
                self.error(f"undeclared parameter reference {sorted(bad)}", path)
            else:
                self.error(
                    f"parameter reference {sorted(bad)} outside a definition", path)
        unknown_calcs = {
            n.name for n in ex.walk(expr)
            if isinstance(n, ex.NamedCalculation) and self.known_kinds.get(n.name) != "calculation"
        }
        for name in sorted(unknown_calcs):
            self.error(f"unknown calculation {name!r}", path)
        if want_dims is None or params or ex.free_names(expr):
            return
        try:
            got = ex.infer_dims(expr)
        except Exception as e:
            self.error(str(e), path)
            return
        if got is None or got not in want_dims:
            self.error(
                f"{what} must be {' or '.join(dims_name(d) for d in want_dims)},"
                f" got {'boolean' if got is None else dims_name(got)}", path)


def lint(
    ast: el.Experiment,
    registry: Registry | None = None,
    channels: ChannelRegistry | None = None,
) -> list[Diagnostic]:
    """Validate a program; returns diagnostics (empty means clean)."""
    from .stdlib import builtin_registry

    return _Linter(
        ast,
        registry if registry is not None else builtin_registry(),
        channels if channels is not None else builtin_channels(),
    ).run()


def lint_clean(ast: el.Experiment, registry: Registry | None = None,
               channels: ChannelRegistry | None = None) -> bool:
    return not errors_only(lint(ast, registry, channels))
