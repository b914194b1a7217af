"""Machine-readable description of the language's element set.

One table describes every element: its attributes, child model, and
text content. The parser and linter enforce it; the JSON export feeds
the binding code generator so element classes track the schema 1:1.
"""
from __future__ import annotations

import json

from .xml_io import NAMESPACE, PREFIX

# kind: expression | action | structure
# content: none | number | boolean | int
# children: free-form model string, or list of child element names
ELEMENTS: dict[str, dict] = {
    # -- expressions ------------------------------------------------------
    "NumericLiteral": {
        "kind": "expression", "content": "number",
        "attrs": [{"name": "units", "required": False}],
    },
    "BooleanLiteral": {"kind": "expression", "content": "boolean", "attrs": []},
    "NamedConstant": {
        "kind": "expression", "content": "none",
        "attrs": [
            {"name": "name", "required": True},
            {"name": "date", "required": False},
            {"name": "date_mode", "required": False},
        ],
    },
    "NamedCalculation": {
        "kind": "expression", "content": "none",
        "attrs": [{"name": "name", "required": True}],
    },
    "ParameterRef": {
        "kind": "expression", "content": "none",
        "attrs": [{"name": "name", "required": True}],
    },
    "NegationOperator": {"kind": "expression", "operands": 1, "attrs": []},
    "AdditionOperator": {"kind": "expression", "operator": "+", "operands": 2, "attrs": []},
    "SubtractionOperator": {"kind": "expression", "operator": "-", "operands": 2, "attrs": []},
    "MultiplicationOperator": {"kind": "expression", "operator": "*", "operands": 2, "attrs": []},
    "DivisionOperator": {"kind": "expression", "operator": "/", "operands": 2, "attrs": []},
    "PowerOperator": {"kind": "expression", "operator": "^", "operands": 2, "attrs": []},
    "EqualOperator": {"kind": "expression", "operator": "==", "operands": 2, "attrs": []},
    "NotEqualOperator": {"kind": "expression", "operator": "!=", "operands": 2, "attrs": []},
    "LessThanOperator": {"kind": "expression", "operator": "<", "operands": 2, "attrs": []},
    "LessEqualOperator": {"kind": "expression", "operator": "<=", "operands": 2, "attrs": []},
    "GreaterThanOperator": {"kind": "expression", "operator": ">", "operands": 2, "attrs": []},
    "GreaterEqualOperator": {"kind": "expression", "operator": ">=", "operands": 2, "attrs": []},
    "AndOperator": {"kind": "expression", "operator": "and", "operands": "2+", "attrs": []},
    "OrOperator": {"kind": "expression", "operator": "or", "operands": "2+", "attrs": []},
    "NotOperator": {"kind": "expression", "operator": "not", "operands": 1, "attrs": []},
    # -- actions -----------------------------------------------------------
    "DDSAction": {
        "kind": "action",
        "attrs": [
            {"name": "channel", "required": True},
            {"name": "interp_type", "required": False},
        ],
        "children": ["Amplitude", "Frequency", "Phase", "InterpP0", "InterpP1"],
    },
    "Amplitude": {"kind": "wrapper", "attrs": [], "children": "expression"},
    "Frequency": {"kind": "wrapper", "attrs": [], "children": "expression"},
    "Phase": {"kind": "wrapper", "attrs": [], "children": "expression"},
    "InterpP0": {"kind": "wrapper", "attrs": [], "children": "expression"},
    "InterpP1": {"kind": "wrapper", "attrs": [], "children": "expression"},
    "CounterStart": {
        "kind": "action",
        "attrs": [
            {"name": "channel", "required": True},
            {"name": "resource", "required": False},
        ],
        "children": ["Threshold"],
    },
    "CounterStop": {
        "kind": "action", "attrs": [{"name": "channel", "required": True}], "children": [],
    },
    "Measure": {
        "kind": "action",
        "attrs": [
            {"name": "channel", "required": True},
            {"name": "resource", "required": True},
        ],
        "children": ["Duration", "Threshold"],
    },
    "TTLSet": {
        "kind": "action", "attrs": [{"name": "channel", "required": True}],
        "children": ["Level"],
    },
    "Level": {"kind": "wrapper", "attrs": [], "children": "expression"},
    "Threshold": {"kind": "wrapper", "attrs": [], "children": "expression"},
    "Duration": {"kind": "wrapper", "attrs": [], "children": "expression"},
    # -- structure ------------------------------------------------------------
    "Experiment": {
        "kind": "structure", "attrs": [],
        "children": ["Resources", "InitialSetup", "Headers", "Definitions", "Program"],
    },
    "Resources": {"kind": "structure", "attrs": [], "children": ["Resource"]},
    "Resource": {
        "kind": "structure",
        "attrs": [
            {"name": "name", "required": True},
            {"name": "kind", "required": False},
            {"name": "length", "required": False},
        ],
        "children": [],
    },
    "InitialSetup": {
        "kind": "structure",
        "attrs": [{"name": "use_predefined", "required": False}],
        "children": ["Parameter"],
    },
    "Parameter": {
        "kind": "structure",
        "attrs": [
            {"name": "name", "required": True},
            {"name": "dimension", "required": False},
        ],
        "children": "expression?",
    },
    "Headers": {"kind": "structure", "attrs": [], "children": ["Header"]},
    "Header": {
        "kind": "structure",
        "attrs": [
            {"name": "name", "required": True},
            {"name": "kind", "required": True},
        ],
        "children": [],
    },
    "Definitions": {
        "kind": "structure", "attrs": [],
        "children": ["GateDefinition", "FunctionDefinition", "CalculationDefinition"],
    },
    "GateDefinition": {
        "kind": "structure", "attrs": [{"name": "name", "required": True}],
        "children": ["Port", "Parameter", "Duration", "Body"],
    },
    "FunctionDefinition": {
        "kind": "structure", "attrs": [{"name": "name", "required": True}],
        "children": ["Parameter", "Body"],
    },
    "CalculationDefinition": {
        "kind": "structure", "attrs": [{"name": "name", "required": True}],
        "children": "expression",
    },
    "Port": {"kind": "structure", "attrs": [{"name": "name", "required": True}], "children": []},
    "Body": {"kind": "structure", "attrs": [], "children": "items"},
    "Program": {"kind": "structure", "attrs": [], "children": ["Segment"]},
    "Segment": {
        "kind": "structure", "attrs": [{"name": "name", "required": False}],
        "children": ["Event", "GateBlock", "Decision"],
    },
    "Event": {
        "kind": "structure", "attrs": [],
        "children": ["StartTime", "DDSAction", "CounterStart", "CounterStop",
                     "Measure", "TTLSet", "FunctionCall", "GateCall", "Event"],
    },
    "StartTime": {
        "kind": "structure",
        "attrs": [{"name": "stype", "required": False}],
        "children": "expression",
    },
    "GateBlock": {"kind": "structure", "attrs": [], "children": ["GateCall", "GateBlock"]},
    "GateCall": {
        "kind": "structure", "attrs": [{"name": "name", "required": True}],
        "children": ["Qubit", "Argument"],
    },
    "Qubit": {
        "kind": "structure", "content": "int",
        "attrs": [
            {"name": "port", "required": False},
            {"name": "ref", "required": False},
        ],
        "children": [],
    },
    "Argument": {
        "kind": "structure",
        "attrs": [
            {"name": "name", "required": True},
            {"name": "ref", "required": False},
        ],
        "children": "expression?",
    },
    "FunctionCall": {
        "kind": "structure", "attrs": [{"name": "name", "required": True}],
        "children": ["Argument"],
    },
    "Decision": {
        "kind": "structure", "attrs": [{"name": "resource", "required": True}],
        "children": ["Threshold", "Condition"],
    },
    "Condition": {
        "kind": "structure",
        "attrs": [
            {"name": "state", "required": True},
            {"name": "destination_segment", "required": True},
        ],
        "children": [],
    },
}

START_TIME_MODES = ("absolute", "since-previous-event", "since-last-action")


def export() -> dict:
    return {
        "namespace": NAMESPACE,
        "prefix": PREFIX,
        "start_time_modes": list(START_TIME_MODES),
        "elements": ELEMENTS,
    }


def export_json(indent: int = 2) -> str:
    return json.dumps(export(), indent=indent, sort_keys=True) + "\n"
