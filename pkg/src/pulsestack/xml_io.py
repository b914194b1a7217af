"""XML wire form: parsing into the typed AST and canonical serialization.

Every language element lives in the ``qi`` namespace. Serialization is
canonical (2-space indent, lexicographically sorted attributes) so that
golden-file comparisons are stable.
"""
from __future__ import annotations

import xml.etree.ElementTree as ET
from xml.sax.saxutils import escape, quoteattr

from . import elements as el
from . import expressions as ex
from .errors import SchemaError, WellFormednessError
from .units import Quantity, format_number, lookup_unit

NAMESPACE = "https://iqc.uwaterloo.ca/quantumion"
PREFIX = "qi"

_BINARY_TAGS = {
    "AdditionOperator": "+",
    "SubtractionOperator": "-",
    "MultiplicationOperator": "*",
    "DivisionOperator": "/",
    "PowerOperator": "^",
}
_COMPARE_TAGS = {
    "EqualOperator": "==",
    "NotEqualOperator": "!=",
    "LessThanOperator": "<",
    "LessEqualOperator": "<=",
    "GreaterThanOperator": ">",
    "GreaterEqualOperator": ">=",
}
_BOOL_TAGS = {"AndOperator": "and", "OrOperator": "or", "NotOperator": "not"}
_OP_TO_BINARY_TAG = {v: k for k, v in _BINARY_TAGS.items()}
_OP_TO_COMPARE_TAG = {v: k for k, v in _COMPARE_TAGS.items()}
_OP_TO_BOOL_TAG = {v: k for k, v in _BOOL_TAGS.items()}

_DDS_PARAM_TAGS = {
    "Amplitude": "amplitude",
    "Frequency": "frequency",
    "Phase": "phase",
    "InterpP0": "interp_p0",
    "InterpP1": "interp_p1",
}
_DDS_PARAM_TO_TAG = {v: k for k, v in _DDS_PARAM_TAGS.items()}

EXPRESSION_TAGS = (
    {"NumericLiteral", "BooleanLiteral", "NamedConstant", "NamedCalculation",
     "ParameterRef", "NegationOperator"}
    | set(_BINARY_TAGS)
    | set(_COMPARE_TAGS)
    | set(_BOOL_TAGS)
)

EXPRESSION_NODE_TYPES = (
    ex.Literal, ex.BooleanLiteral, ex.NamedConstant, ex.NamedCalculation,
    ex.ParameterRef, ex.Unary, ex.Binary, ex.Compare, ex.Bool,
)


def _local(tag: str, path: str) -> str:
    if not tag.startswith("{" + NAMESPACE + "}"):
        raise SchemaError(f"element {tag!r} is not in the qi namespace (at {path})")
    return tag[len(NAMESPACE) + 2 :]


def _text(elem: ET.Element, path: str) -> str:
    parts = [elem.text or ""] + [(c.tail or "") for c in elem]
    if len(elem):
        raise SchemaError(f"unexpected children in text element at {path}")
    return "".join(parts).strip()


def _no_text(elem: ET.Element, path: str) -> None:
    chunks = [elem.text or ""] + [(c.tail or "") for c in elem]
    if any(chunk.strip() for chunk in chunks):
        raise SchemaError(f"unexpected text content at {path}")


def _attrs(elem: ET.Element, path: str, required: tuple[str, ...] = (),
           optional: tuple[str, ...] = ()) -> dict[str, str]:
    out: dict[str, str] = {}
    for key, value in elem.attrib.items():
        if key.startswith("{"):  # foreign-namespace attribute
            raise SchemaError(f"unknown attribute {key!r} at {path}")
        if key not in required and key not in optional:
            raise SchemaError(f"unknown attribute {key!r} at {path}")
        out[key] = value
    for key in required:
        if key not in out:
            raise SchemaError(f"missing attribute {key!r} at {path}")
    return out


class _Parser:
    """Recursive-descent mapping from namespaced elements to AST nodes."""

    def parse_any(self, elem: ET.Element, path: str = "/") -> object:
        name = _local(elem.tag, path)
        path = f"{path}{name}" if path.endswith("/") else f"{path}/{name}"
        if name == "Experiment":
            return self.experiment(elem, path)
        if name in EXPRESSION_TAGS:
            return self.expression(elem, path)
        handler = getattr(self, "_elem_" + name, None)
        if handler is None:
            raise SchemaError(f"unknown element {name!r} at {path}")
        return handler(elem, path)

    # -- expressions ----------------------------------------------------

    def expression(self, elem: ET.Element, path: str) -> ex.Expression:
        name = _local(elem.tag, path)
        if name == "NumericLiteral":
            a = _attrs(elem, path, optional=("units",))
            text = _text(elem, path)
            try:
                value = float(text)
            except ValueError:
                raise SchemaError(f"bad numeric literal {text!r} at {path}") from None
            try:
                unit = lookup_unit(a.get("units"))
            except KeyError as e:
                raise SchemaError(f"{e} at {path}") from None
            try:
                return ex.Literal(Quantity(value, unit))
            except ValueError as e:
                raise SchemaError(f"{e} at {path}") from None
        if name == "BooleanLiteral":
            _attrs(elem, path)
            text = _text(elem, path).lower()
            if text not in ("true", "false"):
                raise SchemaError(f"bad boolean literal {text!r} at {path}")
            return ex.BooleanLiteral(text == "true")
        if name == "NamedConstant":
            a = _attrs(elem, path, required=("name",), optional=("date", "date_mode"))
            _no_text(elem, path)
            return ex.NamedConstant(a["name"], self._date_selector(a, path))
        if name == "NamedCalculation":
            a = _attrs(elem, path, required=("name",))
            _no_text(elem, path)
            return ex.NamedCalculation(a["name"])
        if name == "ParameterRef":
            a = _attrs(elem, path, required=("name",))
            _no_text(elem, path)
            return ex.ParameterRef(a["name"])
        children = [
            self.expression(c, f"{path}/{_local(c.tag, path)}[{i}]")
            for i, c in enumerate(elem)
        ]
        _attrs(elem, path)
        _no_text(elem, path)
        if name == "NegationOperator":
            self._arity(children, 1, path)
            return ex.Unary("neg", children[0])
        if name in _BINARY_TAGS:
            self._arity(children, 2, path)
            return ex.Binary(_BINARY_TAGS[name], children[0], children[1])
        if name in _COMPARE_TAGS:
            self._arity(children, 2, path)
            return ex.Compare(_COMPARE_TAGS[name], children[0], children[1])
        if name in _BOOL_TAGS:
            if name == "NotOperator":
                self._arity(children, 1, path)
            elif len(children) < 2:
                raise SchemaError(f"{name} needs at least two operands at {path}")
            return ex.Bool(_BOOL_TAGS[name], tuple(children))
        raise SchemaError(f"unknown expression element {name!r} at {path}")

    @staticmethod
    def _arity(children: list, n: int, path: str) -> None:
        if len(children) != n:
            raise SchemaError(f"expected {n} operand(s), got {len(children)} at {path}")

    @staticmethod
    def _date_selector(attrs: dict[str, str], path: str) -> ex.DateSelector:
        date = attrs.get("date", "most-recent")
        mode = attrs.get("date_mode")
        if date == "most-recent":
            if mode is not None:
                raise SchemaError(f"date_mode requires a concrete date at {path}")
            return ex.MOST_RECENT
        try:
            ts = ex.parse_timestamp(date)
        except ValueError as e:
            raise SchemaError(f"{e} at {path}") from None
        if mode not in (None, "exact", "latest-before"):
            raise SchemaError(f"bad date_mode {mode!r} at {path}")
        return ex.DateSelector(mode or "exact", ts)

    def _child_expression(self, elem: ET.Element, path: str) -> ex.Expression:
        kids = list(elem)
        if len(kids) != 1:
            raise SchemaError(f"expected exactly one expression child at {path}")
        _no_text(elem, path)
        return self.expression(kids[0], f"{path}/{_local(kids[0].tag, path)}")

    # -- structural elements ---------------------------------------------

    def experiment(self, elem: ET.Element, path: str) -> el.Experiment:
        _attrs(elem, path)
        _no_text(elem, path)
        resources: tuple[el.ResourceDecl, ...] = ()
        setup: el.InitialSetup | None = None
        headers: tuple[el.HeaderDecl, ...] = ()
        definitions: tuple[el.Definition, ...] = ()
        program: el.Program | None = None
        seen: set[str] = set()
        for child in elem:
            name = _local(child.tag, path)
            cpath = f"{path}/{name}"
            if name in seen:
                raise SchemaError(f"duplicate {name} section at {cpath}")
            seen.add(name)
            if name == "Resources":
                resources = self._resources(child, cpath)
            elif name == "InitialSetup":
                setup = self._initial_setup(child, cpath)
            elif name == "Headers":
                headers = self._headers(child, cpath)
            elif name == "Definitions":
                definitions = self._definitions(child, cpath)
            elif name == "Program":
                program = self._elem_Program(child, cpath)
            else:
                raise SchemaError(f"unknown element {name!r} at {cpath}")
        if program is None:
            raise SchemaError(f"Experiment requires a Program at {path}")
        return el.Experiment(
            program=program,
            resources=resources,
            initial_setup=setup,
            headers=headers,
            definitions=definitions,
        )

    def _resources(self, elem: ET.Element, path: str) -> tuple[el.ResourceDecl, ...]:
        _attrs(elem, path)
        _no_text(elem, path)
        out = []
        for i, child in enumerate(elem):
            name = _local(child.tag, path)
            cpath = f"{path}/{name}[{i}]"
            if name != "Resource":
                raise SchemaError(f"unknown element {name!r} at {cpath}")
            a = _attrs(child, cpath, required=("name",), optional=("kind", "length"))
            _no_text(child, cpath)
            try:
                out.append(
                    el.ResourceDecl(
                        a["name"], a.get("kind", "counter"), int(a.get("length", "1"))
                    )
                )
            except ValueError as e:
                raise SchemaError(f"{e} at {cpath}") from None
        return tuple(out)

    def _initial_setup(self, elem: ET.Element, path: str) -> el.InitialSetup:
        a = _attrs(elem, path, optional=("use_predefined",))
        _no_text(elem, path)
        params = []
        for i, child in enumerate(elem):
            name = _local(child.tag, path)
            cpath = f"{path}/{name}[{i}]"
            if name != "Parameter":
                raise SchemaError(f"unknown element {name!r} at {cpath}")
            pa = _attrs(child, cpath, required=("name",), optional=("dimension",))
            params.append((pa["name"], self._child_expression(child, cpath)))
        return el.InitialSetup(a.get("use_predefined"), tuple(params))

    def _headers(self, elem: ET.Element, path: str) -> tuple[el.HeaderDecl, ...]:
        _attrs(elem, path)
        _no_text(elem, path)
        out = []
        for i, child in enumerate(elem):
            name = _local(child.tag, path)
            cpath = f"{path}/{name}[{i}]"
            if name != "Header":
                raise SchemaError(f"unknown element {name!r} at {cpath}")
            a = _attrs(child, cpath, required=("name", "kind"))
            _no_text(child, cpath)
            try:
                out.append(el.HeaderDecl(a["name"], a["kind"]))
            except ValueError as e:
                raise SchemaError(f"{e} at {cpath}") from None
        return tuple(out)

    def _definitions(self, elem: ET.Element, path: str) -> tuple[el.Definition, ...]:
        _attrs(elem, path)
        _no_text(elem, path)
        out: list[el.Definition] = []
        for i, child in enumerate(elem):
            name = _local(child.tag, path)
            cpath = f"{path}/{name}[{i}]"
            if name == "GateDefinition":
                out.append(self._gate_definition(child, cpath))
            elif name == "FunctionDefinition":
                out.append(self._function_definition(child, cpath))
            elif name == "CalculationDefinition":
                a = _attrs(child, cpath, required=("name",))
                out.append(
                    el.CalculationDefinition(a["name"], self._child_expression(child, cpath))
                )
            else:
                raise SchemaError(f"unknown element {name!r} at {cpath}")
        return tuple(out)

    def _parameter_decl(self, elem: ET.Element, path: str) -> el.ParameterDecl:
        a = _attrs(elem, path, required=("name",), optional=("dimension",))
        kids = list(elem)
        default = None
        if kids:
            default = self._child_expression(elem, path)
        else:
            _no_text(elem, path)
        return el.ParameterDecl(a["name"], a.get("dimension", "dimensionless"), default)

    def _gate_definition(self, elem: ET.Element, path: str) -> el.GateDefinition:
        a = _attrs(elem, path, required=("name",))
        _no_text(elem, path)
        ports: list[str] = []
        params: list[el.ParameterDecl] = []
        duration: ex.Expression | None = None
        body: tuple = ()
        for i, child in enumerate(elem):
            name = _local(child.tag, path)
            cpath = f"{path}/{name}[{i}]"
            if name == "Port":
                pa = _attrs(child, cpath, required=("name",))
                _no_text(child, cpath)
                ports.append(pa["name"])
            elif name == "Parameter":
                params.append(self._parameter_decl(child, cpath))
            elif name == "Duration":
                _attrs(child, cpath)
                duration = self._child_expression(child, cpath)
            elif name == "Body":
                _attrs(child, cpath)
                _no_text(child, cpath)
                body = tuple(
                    self._gate_body_item(c, f"{cpath}/{_local(c.tag, cpath)}[{j}]")
                    for j, c in enumerate(child)
                )
            else:
                raise SchemaError(f"unknown element {name!r} at {cpath}")
        return el.GateDefinition(
            name=a["name"], ports=tuple(ports), body=body,
            parameters=tuple(params), duration=duration,
        )

    def _gate_body_item(self, elem: ET.Element, path: str):
        name = _local(elem.tag, path)
        if name == "GateCall":
            return self._elem_GateCall(elem, path)
        if name == "GateBlock":
            return self._elem_GateBlock(elem, path)
        if name == "FunctionCall":
            return self._elem_FunctionCall(elem, path)
        if name == "Event":
            return self._elem_Event(elem, path)
        raise SchemaError(f"element {name!r} not allowed in a gate body at {path}")

    def _function_definition(self, elem: ET.Element, path: str) -> el.FunctionDefinition:
        a = _attrs(elem, path, required=("name",))
        _no_text(elem, path)
        params: list[el.ParameterDecl] = []
        body: list[el.Event] = []
        for i, child in enumerate(elem):
            name = _local(child.tag, path)
            cpath = f"{path}/{name}[{i}]"
            if name == "Parameter":
                params.append(self._parameter_decl(child, cpath))
            elif name == "Body":
                _attrs(child, cpath)
                _no_text(child, cpath)
                for j, c in enumerate(child):
                    cname = _local(c.tag, cpath)
                    if cname != "Event":
                        raise SchemaError(
                            f"function bodies contain only Events, got {cname!r}"
                            f" at {cpath}/{cname}[{j}]"
                        )
                    body.append(self._elem_Event(c, f"{cpath}/Event[{j}]"))
            else:
                raise SchemaError(f"unknown element {name!r} at {cpath}")
        return el.FunctionDefinition(a["name"], tuple(body), tuple(params))

    def _elem_Program(self, elem: ET.Element, path: str) -> el.Program:
        _attrs(elem, path)
        _no_text(elem, path)
        segments = []
        for i, child in enumerate(elem):
            name = _local(child.tag, path)
            cpath = f"{path}/Segment[{i}]"
            if name != "Segment":
                raise SchemaError(f"unknown element {name!r} at {path}/{name}[{i}]")
            segments.append(self._segment(child, cpath, default_name=f"segment-{i + 1}"))
        return el.Program(tuple(segments))

    def _segment(self, elem: ET.Element, path: str, default_name: str) -> el.Segment:
        a = _attrs(elem, path, optional=("name",))
        _no_text(elem, path)
        items: list = []
        decision: el.Decision | None = None
        decision_at: int | None = None
        for i, child in enumerate(elem):
            name = _local(child.tag, path)
            cpath = f"{path}/{name}[{i}]"
            if name == "Event":
                items.append(self._elem_Event(child, cpath))
            elif name == "GateBlock":
                items.append(self._elem_GateBlock(child, cpath))
            elif name == "Decision":
                if decision is not None:
                    raise SchemaError(f"multiple Decision elements at {cpath}")
                decision = self._elem_Decision(child, cpath)
                decision_at = len(items)
            else:
                raise SchemaError(f"unknown element {name!r} at {cpath}")
        if decision is not None and decision_at == len(items):
            decision_at = None  # final position is the well-formed case
        return el.Segment(a.get("name", default_name), tuple(items), decision, decision_at)

    def _elem_Event(self, elem: ET.Element, path: str) -> el.Event:
        _attrs(elem, path)
        _no_text(elem, path)
        kids = list(elem)
        if not kids or _local(kids[0].tag, path) != "StartTime":
            raise SchemaError(f"Event requires a leading StartTime at {path}")
        start = self._start_time(kids[0], f"{path}/StartTime")
        items: list[el.EventItem] = []
        for i, child in enumerate(kids[1:]):
            name = _local(child.tag, path)
            cpath = f"{path}/{name}[{i}]"
            if name == "Event":
                items.append(self._elem_Event(child, cpath))
            elif name == "FunctionCall":
                items.append(self._elem_FunctionCall(child, cpath))
            elif name == "GateCall":
                items.append(self._elem_GateCall(child, cpath))
            elif name in ("DDSAction", "CounterStart", "CounterStop", "Measure", "TTLSet"):
                items.append(self._action(child, name, cpath))
            else:
                raise SchemaError(f"element {name!r} not allowed in an Event at {cpath}")
        return el.Event(start, tuple(items))

    def _start_time(self, elem: ET.Element, path: str) -> el.StartTime:
        a = _attrs(elem, path, optional=("stype",))
        mode = a.get("stype", el.DEFAULT_START_MODE)
        if mode not in el.START_TIME_MODES:
            raise SchemaError(f"bad stype {mode!r} at {path}")
        return el.StartTime(self._child_expression(elem, path), mode)

    def _action(self, elem: ET.Element, name: str, path: str) -> el.Action:
        if name == "DDSAction":
            a = _attrs(elem, path, required=("channel",), optional=("interp_type",))
            _no_text(elem, path)
            params: list[tuple[str, ex.Expression]] = []
            for i, child in enumerate(elem):
                tag = _local(child.tag, path)
                cpath = f"{path}/{tag}[{i}]"
                if tag not in _DDS_PARAM_TAGS:
                    raise SchemaError(f"unknown DDS parameter {tag!r} at {cpath}")
                _attrs(child, cpath)
                params.append((_DDS_PARAM_TAGS[tag], self._child_expression(child, cpath)))
            seen = [p for p, _ in params]
            if len(seen) != len(set(seen)):
                raise SchemaError(f"duplicate DDS parameter at {path}")
            if not params:
                raise SchemaError(f"DDSAction needs at least one parameter at {path}")
            return el.DDSAction(a["channel"], tuple(params), a.get("interp_type"))
        if name == "CounterStart":
            a = _attrs(elem, path, required=("channel",), optional=("resource",))
            threshold = self._optional_threshold(elem, path)
            return el.CounterStart(a["channel"], a.get("resource"), threshold)
        if name == "CounterStop":
            a = _attrs(elem, path, required=("channel",))
            _no_text(elem, path)
            if len(elem):
                raise SchemaError(f"CounterStop takes no children at {path}")
            return el.CounterStop(a["channel"])
        if name == "Measure":
            a = _attrs(elem, path, required=("channel", "resource"))
            duration: ex.Expression | None = None
            threshold: ex.Expression | None = None
            for i, child in enumerate(elem):
                tag = _local(child.tag, path)
                cpath = f"{path}/{tag}[{i}]"
                if tag == "Duration":
                    _attrs(child, cpath)
                    duration = self._child_expression(child, cpath)
                elif tag == "Threshold":
                    _attrs(child, cpath)
                    threshold = self._child_expression(child, cpath)
                else:
                    raise SchemaError(f"unknown element {tag!r} at {cpath}")
            if duration is None:
                raise SchemaError(f"Measure requires a Duration at {path}")
            return el.MeasureAction(a["channel"], a["resource"], duration, threshold)
        if name == "TTLSet":
            a = _attrs(elem, path, required=("channel",))
            kids = list(elem)
            if len(kids) != 1 or _local(kids[0].tag, path) != "Level":
                raise SchemaError(f"TTLSet requires exactly one Level child at {path}")
            _attrs(kids[0], f"{path}/Level")
            return el.TTLSet(a["channel"], self._child_expression(kids[0], f"{path}/Level"))
        raise SchemaError(f"unknown action {name!r} at {path}")

    def _optional_threshold(self, elem: ET.Element, path: str) -> ex.Expression | None:
        kids = list(elem)
        if not kids:
            _no_text(elem, path)
            return None
        if len(kids) == 1 and _local(kids[0].tag, path) == "Threshold":
            _attrs(kids[0], f"{path}/Threshold")
            return self._child_expression(kids[0], f"{path}/Threshold")
        raise SchemaError(f"only a Threshold child is allowed at {path}")

    def _arguments(self, elems: list[ET.Element], path: str) -> tuple[el.Argument, ...]:
        out = []
        for i, child in enumerate(elems):
            cpath = f"{path}/Argument[{i}]"
            a = _attrs(child, cpath, required=("name",), optional=("ref",))
            kids = list(child)
            if "ref" in a and kids:
                raise SchemaError(f"Argument takes a ref or a value, not both at {cpath}")
            value = self._child_expression(child, cpath) if kids else None
            if value is None and "ref" not in a:
                raise SchemaError(f"Argument needs a ref or a value at {cpath}")
            out.append(el.Argument(a["name"], value, a.get("ref")))
        return tuple(out)

    def _elem_FunctionCall(self, elem: ET.Element, path: str) -> el.FunctionCall:
        a = _attrs(elem, path, required=("name",))
        _no_text(elem, path)
        args = []
        for child in elem:
            tag = _local(child.tag, path)
            if tag != "Argument":
                raise SchemaError(f"unknown element {tag!r} at {path}/{tag}")
            args.append(child)
        return el.FunctionCall(a["name"], self._arguments(args, path))

    def _elem_GateCall(self, elem: ET.Element, path: str) -> el.GateCall:
        a = _attrs(elem, path, required=("name",))
        _no_text(elem, path)
        qubits: list[el.QubitBinding] = []
        args: list[ET.Element] = []
        for i, child in enumerate(elem):
            tag = _local(child.tag, path)
            cpath = f"{path}/{tag}[{i}]"
            if tag == "Qubit":
                qa = _attrs(child, cpath, optional=("port", "ref"))
                text = _text(child, cpath)
                if "ref" in qa:
                    if text:
                        raise SchemaError(f"Qubit takes a ref or an index, not both at {cpath}")
                    qubits.append(el.QubitBinding(None, qa.get("port"), qa["ref"]))
                else:
                    try:
                        idx = int(text)
                    except ValueError:
                        raise SchemaError(f"bad qubit index {text!r} at {cpath}") from None
                    qubits.append(el.QubitBinding(idx, qa.get("port")))
            elif tag == "Argument":
                args.append(child)
            else:
                raise SchemaError(f"unknown element {tag!r} at {cpath}")
        return el.GateCall(a["name"], tuple(qubits), self._arguments(args, path))

    def _elem_GateBlock(self, elem: ET.Element, path: str) -> el.GateBlock:
        _attrs(elem, path)
        _no_text(elem, path)
        items: list[el.GateItem] = []
        for i, child in enumerate(elem):
            tag = _local(child.tag, path)
            cpath = f"{path}/{tag}[{i}]"
            if tag == "GateCall":
                items.append(self._elem_GateCall(child, cpath))
            elif tag == "GateBlock":
                items.append(self._elem_GateBlock(child, cpath))
            else:
                raise SchemaError(
                    f"element {tag!r} not allowed in a GateBlock at {cpath}"
                )
        return el.GateBlock(tuple(items))

    def _elem_Decision(self, elem: ET.Element, path: str) -> el.Decision:
        a = _attrs(elem, path, required=("resource",))
        _no_text(elem, path)
        try:
            resources = el.ResourceRef.parse_list(a["resource"])
        except ValueError as e:
            raise SchemaError(f"{e} at {path}") from None
        threshold: ex.Expression | None = None
        conditions: list[el.Condition] = []
        for i, child in enumerate(elem):
            tag = _local(child.tag, path)
            cpath = f"{path}/{tag}[{i}]"
            if tag == "Threshold":
                _attrs(child, cpath)
                threshold = self._child_expression(child, cpath)
            elif tag == "Condition":
                ca = _attrs(child, cpath, required=("state", "destination_segment"))
                _no_text(child, cpath)
                conditions.append(el.Condition(ca["state"], ca["destination_segment"]))
            else:
                raise SchemaError(f"unknown element {tag!r} at {cpath}")
        if not conditions:
            raise SchemaError(f"Decision requires at least one Condition at {path}")
        return el.Decision(resources, tuple(conditions), threshold)

    def _elem_CalculationDefinition(self, elem: ET.Element, path: str) -> el.CalculationDefinition:
        a = _attrs(elem, path, required=("name",))
        return el.CalculationDefinition(a["name"], self._child_expression(elem, path))

    # aliases used by parse_any dispatch
    _elem_StartTime = _start_time
    _elem_GateDefinition = _gate_definition
    _elem_FunctionDefinition = _function_definition


def parse_xml(document: str) -> object:
    """Parse a document into its typed AST node.

    A ``qi:Experiment`` root yields an Experiment; any other known root
    element (an expression fragment, an Event, ...) yields its node type.
    """
    try:
        root = ET.fromstring(document)
    except ET.ParseError as e:
        raise WellFormednessError(str(e)) from None
    return _Parser().parse_any(root)


def parse_experiment(document: str, check_references: bool = False) -> el.Experiment:
    """Parse a full program document.

    With check_references the dangling-name checks normally reported by
    lint (segment and resource references) raise ReferenceError_
    immediately; the default leaves them to lint diagnostics.
    """
    node = parse_xml(document)
    if not isinstance(node, el.Experiment):
        raise SchemaError("document root is not qi:Experiment")
    if check_references:
        _check_references(node)
    return node


def _check_references(ast: el.Experiment) -> None:
    from .errors import ReferenceError_

    segment_names = set(ast.segment_names())
    declared = {r.name: r.length for r in ast.resources}
    for segment in ast.program.segments:
        if segment.decision is None:
            continue
        for cond in segment.decision.conditions:
            if cond.destination_segment not in segment_names:
                raise ReferenceError_(
                    f"segment {segment.name!r}: destination segment"
                    f" {cond.destination_segment!r} does not exist"
                )
        for ref in segment.decision.resources:
            if ref.name not in declared:
                raise ReferenceError_(f"resource {ref.name!r} is not declared")
            if not 0 <= ref.index < declared[ref.name]:
                raise ReferenceError_(f"resource index {ref} out of range")


def parse_expression(document: str) -> ex.Expression:
    node = parse_xml(document)
    if isinstance(node, EXPRESSION_NODE_TYPES):
        return node  # type: ignore[return-value]
    raise SchemaError("document root is not an expression element")


# -- serialization ------------------------------------------------------------


class _X:
    """Lightweight emit node: tag, attrs, children or text."""

    __slots__ = ("tag", "attrs", "children", "text")

    def __init__(self, tag: str, attrs: dict[str, str] | None = None,
                 children: list["_X"] | None = None, text: str | None = None):
        self.tag = tag
        self.attrs = attrs or {}
        self.children = children or []
        self.text = text


def _emit_expression(expr: ex.Expression) -> _X:
    if isinstance(expr, ex.Literal):
        q = expr.quantity
        attrs = {"units": q.unit.symbol} if q.unit.symbol else {}
        return _X("NumericLiteral", attrs, text=format_number(q.value))
    if isinstance(expr, ex.BooleanLiteral):
        return _X("BooleanLiteral", text="true" if expr.value else "false")
    if isinstance(expr, ex.NamedConstant):
        attrs = {"name": expr.name}
        if expr.date.mode != "most-recent":
            attrs["date"] = ex.format_timestamp(expr.date.at)  # type: ignore[arg-type]
            if expr.date.mode != "exact":
                attrs["date_mode"] = expr.date.mode
        return _X("NamedConstant", attrs)
    if isinstance(expr, ex.NamedCalculation):
        return _X("NamedCalculation", {"name": expr.name})
    if isinstance(expr, ex.ParameterRef):
        return _X("ParameterRef", {"name": expr.name})
    if isinstance(expr, ex.Unary):
        return _X("NegationOperator", children=[_emit_expression(expr.child)])
    if isinstance(expr, ex.Binary):
        return _X(
            _OP_TO_BINARY_TAG[expr.op],
            children=[_emit_expression(expr.left), _emit_expression(expr.right)],
        )
    if isinstance(expr, ex.Compare):
        return _X(
            _OP_TO_COMPARE_TAG[expr.op],
            children=[_emit_expression(expr.left), _emit_expression(expr.right)],
        )
    if isinstance(expr, ex.Bool):
        return _X(
            _OP_TO_BOOL_TAG[expr.op],
            children=[_emit_expression(c) for c in expr.children],
        )
    raise TypeError(f"not an expression node: {expr!r}")


def _wrap_expr(tag: str, expr: ex.Expression, attrs: dict[str, str] | None = None) -> _X:
    return _X(tag, attrs, children=[_emit_expression(expr)])


def _emit_action(action: el.Action) -> _X:
    if isinstance(action, el.DDSAction):
        attrs = {"channel": action.channel}
        if action.interp_type is not None:
            attrs["interp_type"] = action.interp_type
        children = [
            _wrap_expr(_DDS_PARAM_TO_TAG[name], expr) for name, expr in action.parameters
        ]
        return _X("DDSAction", attrs, children)
    if isinstance(action, el.CounterStart):
        attrs = {"channel": action.channel}
        if action.resource is not None:
            attrs["resource"] = action.resource
        children = [_wrap_expr("Threshold", action.threshold)] if action.threshold else []
        return _X("CounterStart", attrs, children)
    if isinstance(action, el.CounterStop):
        return _X("CounterStop", {"channel": action.channel})
    if isinstance(action, el.MeasureAction):
        attrs = {"channel": action.channel, "resource": action.resource}
        children = [_wrap_expr("Duration", action.duration)]
        if action.threshold is not None:
            children.append(_wrap_expr("Threshold", action.threshold))
        return _X("Measure", attrs, children)
    if isinstance(action, el.TTLSet):
        return _X("TTLSet", {"channel": action.channel}, [_wrap_expr("Level", action.level)])
    raise TypeError(f"not an action: {action!r}")


def _emit_arguments(args: tuple[el.Argument, ...]) -> list[_X]:
    out = []
    for arg in args:
        attrs = {"name": arg.name}
        if arg.ref is not None:
            attrs["ref"] = arg.ref
            out.append(_X("Argument", attrs))
        else:
            out.append(_wrap_expr("Argument", arg.value, attrs))  # type: ignore[arg-type]
    return out


def _emit_event(event: el.Event) -> _X:
    children = [
        _wrap_expr("StartTime", event.start_time.value, {"stype": event.start_time.mode})
    ]
    for item in event.items:
        children.append(_emit_event_item(item))
    return _X("Event", None, children)


def _emit_event_item(item: el.EventItem) -> _X:
    if isinstance(item, el.Event):
        return _emit_event(item)
    if isinstance(item, el.FunctionCall):
        return _X("FunctionCall", {"name": item.name}, _emit_arguments(item.arguments))
    if isinstance(item, el.GateCall):
        return _emit_gate_call(item)
    return _emit_action(item)  # type: ignore[arg-type]


def _emit_gate_call(call: el.GateCall) -> _X:
    children: list[_X] = []
    for q in call.qubits:
        attrs = {"port": q.port} if q.port else {}
        if q.ref is not None:
            attrs["ref"] = q.ref
            children.append(_X("Qubit", attrs))
        else:
            children.append(_X("Qubit", attrs, text=str(q.index)))
    children.extend(_emit_arguments(call.arguments))
    return _X("GateCall", {"name": call.name}, children)


def _emit_gate_item(item: el.GateItem) -> _X:
    if isinstance(item, el.GateCall):
        return _emit_gate_call(item)
    return _X("GateBlock", None, [_emit_gate_item(i) for i in item.items])


def _emit_decision(decision: el.Decision) -> _X:
    attrs = {"resource": " ".join(str(r) for r in decision.resources)}
    children: list[_X] = []
    if decision.threshold is not None:
        children.append(_wrap_expr("Threshold", decision.threshold))
    for cond in decision.conditions:
        children.append(
            _X("Condition", {"state": cond.state, "destination_segment": cond.destination_segment})
        )
    return _X("Decision", attrs, children)


def _emit_segment(segment: el.Segment) -> _X:
    children: list[_X] = []
    for item in segment.items:
        if isinstance(item, el.Event):
            children.append(_emit_event(item))
        else:
            children.append(_emit_gate_item(item))
    if segment.decision is not None:
        children.append(_emit_decision(segment.decision))
    return _X("Segment", {"name": segment.name}, children)


def _emit_parameter_decl(p: el.ParameterDecl) -> _X:
    attrs = {"name": p.name}
    if p.dimension != "dimensionless":
        attrs["dimension"] = p.dimension
    children = [_emit_expression(p.default)] if p.default is not None else []
    return _X("Parameter", attrs, children)


def _emit_definition(d: el.Definition) -> _X:
    if isinstance(d, el.GateDefinition):
        children: list[_X] = [_X("Port", {"name": p}) for p in d.ports]
        children += [_emit_parameter_decl(p) for p in d.parameters]
        if d.duration is not None:
            children.append(_wrap_expr("Duration", d.duration))
        body = []
        for item in d.body:
            if isinstance(item, el.GateCall):
                body.append(_emit_gate_call(item))
            elif isinstance(item, el.GateBlock):
                body.append(_emit_gate_item(item))
            elif isinstance(item, el.FunctionCall):
                body.append(_X("FunctionCall", {"name": item.name}, _emit_arguments(item.arguments)))
            else:
                body.append(_emit_event(item))
        children.append(_X("Body", None, body))
        return _X("GateDefinition", {"name": d.name}, children)
    if isinstance(d, el.FunctionDefinition):
        children = [_emit_parameter_decl(p) for p in d.parameters]
        children.append(_X("Body", None, [_emit_event(e) for e in d.body]))
        return _X("FunctionDefinition", {"name": d.name}, children)
    return _wrap_expr("CalculationDefinition", d.expression, {"name": d.name})


def _emit_experiment(exp: el.Experiment) -> _X:
    children: list[_X] = []
    if exp.resources:
        children.append(
            _X("Resources", None, [
                _X("Resource", {
                    "kind": r.kind, "length": str(r.length), "name": r.name,
                })
                for r in exp.resources
            ])
        )
    if exp.initial_setup is not None:
        attrs = {}
        if exp.initial_setup.use_predefined is not None:
            attrs["use_predefined"] = exp.initial_setup.use_predefined
        children.append(
            _X("InitialSetup", attrs, [
                _wrap_expr("Parameter", value, {"name": name})
                for name, value in exp.initial_setup.parameters
            ])
        )
    if exp.headers:
        children.append(
            _X("Headers", None, [
                _X("Header", {"kind": h.kind, "name": h.name}) for h in exp.headers
            ])
        )
    if exp.definitions:
        children.append(
            _X("Definitions", None, [_emit_definition(d) for d in exp.definitions])
        )
    children.append(_X("Program", None, [_emit_segment(s) for s in exp.program.segments]))
    return _X("Experiment", None, children)


def _emit_any(node: object) -> _X:
    if isinstance(node, el.Experiment):
        return _emit_experiment(node)
    if isinstance(node, (el.GateDefinition, el.FunctionDefinition, el.CalculationDefinition)):
        return _emit_definition(node)
    if isinstance(node, el.Event):
        return _emit_event(node)
    if isinstance(node, el.Segment):
        return _emit_segment(node)
    if isinstance(node, el.GateBlock) or isinstance(node, el.GateCall):
        return _emit_gate_item(node)
    if isinstance(node, el.Decision):
        return _emit_decision(node)
    if isinstance(node, el.ACTION_TYPES):
        return _emit_action(node)  # type: ignore[arg-type]
    if isinstance(node, el.FunctionCall):
        return _X("FunctionCall", {"name": node.name}, _emit_arguments(node.arguments))
    return _emit_expression(node)  # type: ignore[arg-type]


def _render(node: _X, lines: list[str], indent: int) -> None:
    pad = "  " * indent
    attrs = "".join(f" {k}={quoteattr(v)}" for k, v in sorted(node.attrs.items()))
    tag = f"{PREFIX}:{node.tag}"
    if not node.children and node.text is None:
        lines.append(f"{pad}<{tag}{attrs}/>")
    elif not node.children:
        lines.append(f"{pad}<{tag}{attrs}>{escape(node.text)}</{tag}>")
    else:
        lines.append(f"{pad}<{tag}{attrs}>")
        for child in node.children:
            _render(child, lines, indent + 1)
        lines.append(f"{pad}</{tag}>")


def serialize_xml(node: object, declaration: bool = True) -> str:
    """Canonical XML for any AST node (2-space indent, sorted attributes)."""
    x = _emit_any(node)
    x.attrs = dict(x.attrs)
    x.attrs["xmlns:" + PREFIX] = NAMESPACE
    lines: list[str] = []
    if declaration:
        lines.append('<?xml version="1.0" encoding="UTF-8"?>')
    _render(x, lines, 0)
    return "\n".join(lines) + "\n"
