"""Standard library: named calculations, timing functions, gate definitions.

Definitions live as XML fixture files (one per definition, listed in an
index file) and are loaded into an immutable registry. User-supplied
definition directories override builtin entries by name.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources as importlib_resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from . import elements as el
from . import expressions as ex
from .errors import (
    ArityMismatch,
    DimensionError,
    MissingArgument,
    RecursionLimit,
    SchemaError,
    StdlibError,
    UnknownFunction,
    UnknownGate,
    UnknownPort,
    UnresolvedName,
)
from .units import DIMENSIONLESS, DIMENSION_NAMES, dims_name

_TEMPLATE_RE = re.compile(r"\{([A-Za-z_][A-Za-z0-9_]*)\}")


@dataclass(frozen=True)
class BoundArg:
    """One resolved call argument: an expression, template text, or both."""

    expr: ex.Expression | None = None
    text: str | None = None


Bindings = dict[str, BoundArg]


def bind_text(template: str, bindings: Bindings, context: str) -> str:
    """Substitute {name} template fields in channel/resource strings."""

    def repl(m: re.Match) -> str:
        name = m.group(1)
        bound = bindings.get(name)
        if bound is None or bound.text is None:
            raise UnresolvedName(f"template field {{{name}}} unbound in {context}")
        return bound.text

    return _TEMPLATE_RE.sub(repl, template)


def template_fields(template: str) -> set[str]:
    return set(_TEMPLATE_RE.findall(template))


def _expr_bindings(bindings: Bindings) -> dict[str, ex.Expression]:
    return {k: v.expr for k, v in bindings.items() if v.expr is not None}


def _sub_expr(expr: ex.Expression, bindings: Bindings) -> ex.Expression:
    exprs = _expr_bindings(bindings)
    # Leave unrelated ParameterRefs (none should remain after expansion).
    present = ex.parameter_names(expr) & set(exprs)
    if not present and not ex.parameter_names(expr):
        return expr
    return ex.substitute(expr, exprs)


def bind_action(action: el.Action, bindings: Bindings) -> el.Action:
    if isinstance(action, el.DDSAction):
        return el.DDSAction(
            bind_text(action.channel, bindings, "DDSAction channel"),
            tuple((n, _sub_expr(e, bindings)) for n, e in action.parameters),
            action.interp_type,
        )
    if isinstance(action, el.CounterStart):
        return el.CounterStart(
            bind_text(action.channel, bindings, "CounterStart channel"),
            None if action.resource is None
            else bind_text(action.resource, bindings, "CounterStart resource"),
            None if action.threshold is None else _sub_expr(action.threshold, bindings),
        )
    if isinstance(action, el.CounterStop):
        return el.CounterStop(bind_text(action.channel, bindings, "CounterStop channel"))
    if isinstance(action, el.MeasureAction):
        return el.MeasureAction(
            bind_text(action.channel, bindings, "Measure channel"),
            bind_text(action.resource, bindings, "Measure resource"),
            _sub_expr(action.duration, bindings),
            None if action.threshold is None else _sub_expr(action.threshold, bindings),
        )
    if isinstance(action, el.TTLSet):
        return el.TTLSet(
            bind_text(action.channel, bindings, "TTLSet channel"),
            _sub_expr(action.level, bindings),
        )
    raise TypeError(f"not an action: {action!r}")


def bind_arguments(args: tuple[el.Argument, ...], bindings: Bindings) -> tuple[el.Argument, ...]:
    out = []
    for a in args:
        out.append(el.Argument(
            a.name,
            None if a.value is None else _sub_expr(a.value, bindings),
            None if a.ref is None else bind_text(a.ref, bindings, f"argument {a.name}"),
        ))
    return tuple(out)


def bind_event(event: el.Event, bindings: Bindings) -> el.Event:
    items: list[el.EventItem] = []
    for item in event.items:
        if isinstance(item, el.Event):
            items.append(bind_event(item, bindings))
        elif isinstance(item, el.FunctionCall):
            items.append(el.FunctionCall(item.name, bind_arguments(item.arguments, bindings)))
        else:
            items.append(bind_action(item, bindings))
    return el.Event(
        el.StartTime(_sub_expr(event.start_time.value, bindings), event.start_time.mode),
        tuple(items),
    )


def bind_gate_item(item, bindings: Bindings):
    if isinstance(item, el.GateBlock):
        return el.GateBlock(tuple(bind_gate_item(i, bindings) for i in item.items))
    if isinstance(item, el.GateCall):
        qubits = []
        for q in item.qubits:
            if q.ref is not None:
                bound = bindings.get(q.ref)
                if bound is None or bound.text is None:
                    raise UnresolvedName(f"qubit ref {q.ref!r} unbound in {item.name}")
                qubits.append(el.QubitBinding(int(bound.text), q.port))
            else:
                qubits.append(q)
        return el.GateCall(item.name, tuple(qubits), bind_arguments(item.arguments, bindings))
    if isinstance(item, el.FunctionCall):
        return el.FunctionCall(item.name, bind_arguments(item.arguments, bindings))
    if isinstance(item, el.Event):
        return bind_event(item, bindings)
    raise TypeError(f"not a gate body item: {item!r}")


def _closed_int(expr: ex.Expression) -> int | None:
    """Integer value of a closed dimensionless expression, else None."""
    if ex.free_names(expr) or ex.parameter_names(expr):
        return None
    try:
        value = ex.evaluate(expr)
    except ex.UnresolvedName:  # type: ignore[attr-defined]
        return None
    except Exception:
        return None
    if isinstance(value, bool):
        return None
    if value.dims != DIMENSIONLESS or value.si != int(value.si):
        return None
    return int(value.si)


def _check_dimension(arg_name: str, expr: ex.Expression, dimension: str, context: str) -> None:
    if dimension in ("resource",):
        raise DimensionError(f"{context}: parameter {arg_name!r} takes a resource reference")
    want = DIMENSION_NAMES.get(dimension)
    if want is None:
        return
    if ex.free_names(expr) or ex.parameter_names(expr):
        return  # open expression: checked after symbol solving
    got = ex.infer_dims(expr)
    if got is None or got != want:
        raise DimensionError(
            f"{context}: parameter {arg_name!r} expects {dimension},"
            f" got {'boolean' if got is None else dims_name(got)}"
        )


def make_bindings(
    parameters: tuple[el.ParameterDecl, ...],
    arguments: tuple[el.Argument, ...],
    context: str,
    extra: Bindings | None = None,
) -> Bindings:
    """Match call arguments against declared parameters, applying defaults."""
    bindings: Bindings = dict(extra or {})
    supplied = {a.name: a for a in arguments}
    declared = {p.name for p in parameters}
    for a in arguments:
        if a.name not in declared:
            raise MissingArgument(f"{context}: unknown argument {a.name!r}")
    for p in parameters:
        arg = supplied.get(p.name)
        if arg is None:
            if p.default is None:
                if p.dimension == "resource":
                    raise MissingArgument(f"{context}: missing resource argument {p.name!r}")
                raise MissingArgument(f"{context}: missing argument {p.name!r}")
            bindings[p.name] = BoundArg(expr=p.default)
            continue
        if p.dimension == "resource":
            if arg.ref is None:
                raise DimensionError(f"{context}: argument {p.name!r} must be a resource reference")
            bindings[p.name] = BoundArg(text=arg.ref)
            continue
        if arg.value is None:
            raise DimensionError(f"{context}: argument {p.name!r} must be an expression")
        _check_dimension(p.name, arg.value, p.dimension, context)
        n = _closed_int(arg.value)
        bindings[p.name] = BoundArg(expr=arg.value, text=None if n is None else str(n))
    return bindings


@dataclass(frozen=True)
class GateInstance:
    """A gate body with ports and parameters bound to concrete values."""

    name: str
    body: tuple
    duration: ex.Expression | None


class Registry:
    """Immutable lookup of gate, function, and calculation definitions."""

    def __init__(self, definitions: Iterable[el.Definition]):
        self.gates: dict[str, el.GateDefinition] = {}
        self.functions: dict[str, el.FunctionDefinition] = {}
        self.calculations: dict[str, el.CalculationDefinition] = {}
        for d in definitions:
            self._add(d)

    def _add(self, d: el.Definition) -> None:
        if isinstance(d, el.GateDefinition):
            self.gates[d.name] = d
        elif isinstance(d, el.FunctionDefinition):
            self.functions[d.name] = d
        elif isinstance(d, el.CalculationDefinition):
            self.calculations[d.name] = d
        else:
            raise TypeError(f"not a definition: {d!r}")

    @classmethod
    def from_definitions(cls, definitions: Iterable[el.Definition]) -> "Registry":
        return cls(definitions)

    def merged_with(self, overrides: "Registry") -> "Registry":
        merged = Registry(())
        for table in ("gates", "functions", "calculations"):
            getattr(merged, table).update(getattr(self, table))
            getattr(merged, table).update(getattr(overrides, table))
        return merged

    def name_kinds(self) -> dict[str, str]:
        kinds: dict[str, str] = {}
        kinds.update({n: "gate" for n in self.gates})
        kinds.update({n: "function" for n in self.functions})
        kinds.update({n: "calculation" for n in self.calculations})
        return kinds

    def lookup(self, name: str) -> el.Definition | None:
        return (
            self.gates.get(name)
            or self.functions.get(name)
            or self.calculations.get(name)
        )

    def calculation_exprs(self) -> dict[str, ex.Expression]:
        return {n: d.expression for n, d in self.calculations.items()}

    # -- resolution -------------------------------------------------------

    def gate_bindings(
        self,
        gate: el.GateDefinition,
        qubits: Sequence[el.QubitBinding],
        arguments: tuple[el.Argument, ...] = (),
    ) -> Bindings:
        if len(qubits) != gate.arity:
            raise ArityMismatch(
                f"gate {gate.name!r} takes {gate.arity} qubit(s), got {len(qubits)}"
            )
        port_map: dict[str, int] = {}
        unnamed: list[int] = []
        for q in qubits:
            if q.index is None:
                raise UnresolvedName(f"gate {gate.name!r}: unbound qubit ref {q.ref!r}")
            if q.port is None:
                unnamed.append(q.index)
            else:
                if q.port not in gate.ports:
                    raise UnknownPort(f"gate {gate.name!r} has no port {q.port!r}")
                if q.port in port_map:
                    raise ArityMismatch(f"gate {gate.name!r}: port {q.port!r} bound twice")
                port_map[q.port] = q.index
        free_ports = [p for p in gate.ports if p not in port_map]
        if len(unnamed) != len(free_ports):
            raise ArityMismatch(
                f"gate {gate.name!r}: {len(unnamed)} positional qubit(s)"
                f" for {len(free_ports)} free port(s)"
            )
        port_map.update(dict(zip(free_ports, unnamed)))
        extra: Bindings = {
            port: BoundArg(expr=ex.lit(index), text=str(index))
            for port, index in port_map.items()
        }
        return make_bindings(gate.parameters, arguments, f"gate {gate.name!r}", extra)

    def resolve_gate(
        self,
        name: str,
        qubits: Sequence[int] | None = None,
        ports: Mapping[str, int] | None = None,
        arguments: tuple[el.Argument, ...] = (),
    ) -> GateInstance:
        gate = self.gates.get(name)
        if gate is None:
            raise UnknownGate(f"unknown gate {name!r}")
        calls: list[el.QubitBinding] = []
        for index in qubits or ():
            calls.append(el.QubitBinding(index))
        for port, index in (ports or {}).items():
            calls.append(el.QubitBinding(index, port))
        bindings = self.gate_bindings(gate, calls, arguments)
        body = tuple(bind_gate_item(item, bindings) for item in gate.body)
        duration = None if gate.duration is None else _sub_expr(gate.duration, bindings)
        return GateInstance(name, body, duration)

    def resolve_function(
        self,
        name: str,
        arguments: tuple[el.Argument, ...] = (),
        **kw_exprs: ex.Expression | str | int,
    ) -> tuple[el.Event, ...]:
        fn = self.functions.get(name)
        if fn is None:
            raise UnknownFunction(f"unknown function {name!r}")
        args = list(arguments)
        for key, value in kw_exprs.items():
            if isinstance(value, str):
                args.append(el.Argument(key, ref=value))
            elif isinstance(value, int):
                args.append(el.Argument(key, ex.lit(value)))
            else:
                args.append(el.Argument(key, value))
        bindings = make_bindings(fn.parameters, tuple(args), f"function {name!r}")
        return tuple(bind_event(e, bindings) for e in fn.body)


# -- fixture loading ----------------------------------------------------------


def _parse_definition(text: str, origin: str) -> el.Definition:
    from .xml_io import parse_xml

    node = parse_xml(text)
    if not isinstance(node, (el.GateDefinition, el.FunctionDefinition, el.CalculationDefinition)):
        raise SchemaError(f"{origin}: root element is not a definition")
    return node


def load_directory(root: Path) -> Registry:
    """Load definitions per the index file (name -> kind/file)."""
    index_path = root / "index.json"
    index = json.loads(index_path.read_text(encoding="utf-8"))
    definitions = []
    for name, entry in index.items():
        text = (root / entry["file"]).read_text(encoding="utf-8")
        d = _parse_definition(text, str(root / entry["file"]))
        if d.name != name:
            raise StdlibError(
                f"index names {name!r} but {entry['file']} defines {d.name!r}"
            )
        if el.definition_kind(d) != entry["kind"]:
            raise StdlibError(f"index kind mismatch for {name!r}")
        definitions.append(d)
    return Registry(definitions)


_builtin_cache: Registry | None = None


def builtin_registry() -> Registry:
    global _builtin_cache
    if _builtin_cache is None:
        root = importlib_resources.files("pulsestack.data").joinpath("stdlib")
        with importlib_resources.as_file(root) as path:
            _builtin_cache = load_directory(Path(path))
    return _builtin_cache


def load_registry(extra_dirs: Sequence[str | Path] = ()) -> Registry:
    registry = builtin_registry()
    for d in extra_dirs:
        registry = registry.merged_with(load_directory(Path(d)))
    return registry


# -- header auto-inclusion ------------------------------------------------------


def _expression_calc_names(expr: ex.Expression) -> set[str]:
    return {n.name for n in ex.walk(expr) if isinstance(n, ex.NamedCalculation)}


def _names_in_event(event: el.Event) -> set[tuple[str, str]]:
    found: set[tuple[str, str]] = set()
    found |= {("calculation", n) for n in _expression_calc_names(event.start_time.value)}
    for item in event.items:
        if isinstance(item, el.Event):
            found |= _names_in_event(item)
        elif isinstance(item, el.FunctionCall):
            found.add(("function", item.name))
            for a in item.arguments:
                if a.value is not None:
                    found |= {("calculation", n) for n in _expression_calc_names(a.value)}
        else:
            found |= _names_in_action(item)
    return found


def _names_in_action(action: el.Action) -> set[tuple[str, str]]:
    found: set[tuple[str, str]] = set()
    exprs: list[ex.Expression] = []
    if isinstance(action, el.DDSAction):
        exprs += [e for _, e in action.parameters]
    elif isinstance(action, el.CounterStart):
        if action.threshold is not None:
            exprs.append(action.threshold)
    elif isinstance(action, el.MeasureAction):
        exprs.append(action.duration)
        if action.threshold is not None:
            exprs.append(action.threshold)
    elif isinstance(action, el.TTLSet):
        exprs.append(action.level)
    for e in exprs:
        found |= {("calculation", n) for n in _expression_calc_names(e)}
    return found


def _names_in_gate_item(item) -> set[tuple[str, str]]:
    found: set[tuple[str, str]] = set()
    if isinstance(item, el.GateBlock):
        for i in item.items:
            found |= _names_in_gate_item(i)
    elif isinstance(item, el.GateCall):
        found.add(("gate", item.name))
        for a in item.arguments:
            if a.value is not None:
                found |= {("calculation", n) for n in _expression_calc_names(a.value)}
    elif isinstance(item, el.FunctionCall):
        found.add(("function", item.name))
        for a in item.arguments:
            if a.value is not None:
                found |= {("calculation", n) for n in _expression_calc_names(a.value)}
    elif isinstance(item, el.Event):
        found |= _names_in_event(item)
    return found


def _names_in_definition(d: el.Definition) -> set[tuple[str, str]]:
    found: set[tuple[str, str]] = set()
    if isinstance(d, el.GateDefinition):
        for item in d.body:
            found |= _names_in_gate_item(item)
        if d.duration is not None:
            found |= {("calculation", n) for n in _expression_calc_names(d.duration)}
        for p in d.parameters:
            if p.default is not None:
                found |= {("calculation", n) for n in _expression_calc_names(p.default)}
    elif isinstance(d, el.FunctionDefinition):
        for e in d.body:
            found |= _names_in_event(e)
        for p in d.parameters:
            if p.default is not None:
                found |= {("calculation", n) for n in _expression_calc_names(p.default)}
    else:
        found |= {("calculation", n) for n in _expression_calc_names(d.expression)}
    return found


def program_call_names(ast: el.Experiment) -> set[tuple[str, str]]:
    """(kind, name) pairs directly referenced by the program body."""
    found: set[tuple[str, str]] = set()
    for segment in ast.program.segments:
        for item in segment.items:
            if isinstance(item, el.Event):
                found |= _names_in_event(item)
            else:
                found |= _names_in_gate_item(item)
        if segment.decision is not None and segment.decision.threshold is not None:
            found |= {
                ("calculation", n)
                for n in _expression_calc_names(segment.decision.threshold)
            }
    if ast.initial_setup is not None:
        for _, expr in ast.initial_setup.parameters:
            found |= {("calculation", n) for n in _expression_calc_names(expr)}
    return found


def required_headers(
    ast: el.Experiment,
    registry: Registry | None = None,
) -> tuple[tuple[el.HeaderDecl, ...], tuple[el.Definition, ...]]:
    """Transitive closure of every stdlib name the program uses.

    Returns the header declarations and the definitions that must
    accompany the program so that compilation needs no registry access.
    Names already defined in the program are not duplicated.
    """
    registry = registry or builtin_registry()
    local = Registry.from_definitions(ast.definitions)
    todo = list(program_call_names(ast))
    seen: set[tuple[str, str]] = set()
    headers: list[el.HeaderDecl] = []
    definitions: list[el.Definition] = []
    while todo:
        kind, name = todo.pop()
        if (kind, name) in seen:
            continue
        seen.add((kind, name))
        definition = local.lookup(name)
        from_registry = False
        if definition is None:
            definition = registry.lookup(name)
            from_registry = True
        if definition is None:
            raise UnresolvedName(f"unknown {kind} name {name!r}")
        if el.definition_kind(definition) != kind:
            raise UnresolvedName(
                f"{name!r} is a {el.definition_kind(definition)}, referenced as a {kind}"
            )
        if from_registry:
            headers.append(el.HeaderDecl(name, kind))
            definitions.append(definition)
        todo.extend(_names_in_definition(definition))
    headers_sorted = tuple(sorted(headers, key=lambda h: (h.kind, h.name)))
    definitions_sorted = tuple(
        sorted(definitions, key=lambda d: (el.definition_kind(d), d.name))
    )
    return headers_sorted, definitions_sorted


def with_required_headers(ast: el.Experiment, registry: Registry | None = None) -> el.Experiment:
    """Auto-include headers and definitions so the program is self-contained."""
    headers, definitions = required_headers(ast, registry)
    if not headers and not definitions:
        return ast
    have = {h.name for h in ast.headers}
    new_headers = ast.headers + tuple(h for h in headers if h.name not in have)
    new_defs = ast.definitions + definitions
    return el.Experiment(
        program=ast.program,
        resources=ast.resources,
        initial_setup=ast.initial_setup,
        headers=new_headers,
        definitions=new_defs,
    )


def check_call_graph(registry: Registry) -> list[str]:
    """Reject cyclic gate/function/calculation reference graphs."""
    problems: list[str] = []
    graph: dict[tuple[str, str], set[tuple[str, str]]] = {}
    for kind, table in (
        ("gate", registry.gates),
        ("function", registry.functions),
        ("calculation", registry.calculations),
    ):
        for name, d in table.items():
            graph[(kind, name)] = _names_in_definition(d)

    WHITE, GRAY, BLACK = 0, 1, 2
    color: dict[tuple[str, str], int] = {}

    def visit(node: tuple[str, str], stack: list[str]) -> None:
        state = color.get(node, WHITE)
        if state == GRAY:
            problems.append("cycle: " + " -> ".join(stack + [node[1]]))
            return
        if state == BLACK:
            return
        color[node] = GRAY
        for nxt in graph.get(node, ()):
            if nxt in graph:
                visit(nxt, stack + [node[1]])
        color[node] = BLACK

    for node in graph:
        visit(node, [])
    return problems
