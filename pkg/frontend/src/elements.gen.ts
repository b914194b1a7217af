// GENERATED FILE - run `npm run generate` to rebuild. Source of truth:
// the toolchain language schema (data/schema.json).
/* eslint-disable */
import {
  Attrs,
  AttrValue,
  ElementSpec,
  Expression,
  ExpressionLike,
  TypeMismatch,
  XmlElement,
  formatNumber,
  registerFactories,
  registerSchema,
  toExpression,
} from "./base.js";

export const SCHEMA: Record<string, ElementSpec> = {
  "AdditionOperator": {
    "attrs": [],
    "kind": "expression",
    "operands": 2,
    "operator": "+"
  },
  "Amplitude": {
    "attrs": [],
    "children": "expression",
    "kind": "wrapper"
  },
  "AndOperator": {
    "attrs": [],
    "kind": "expression",
    "operands": "2+",
    "operator": "and"
  },
  "Argument": {
    "attrs": [
      {
        "name": "name",
        "required": true
      },
      {
        "name": "ref",
        "required": false
      }
    ],
    "children": "expression?",
    "kind": "structure"
  },
  "Body": {
    "attrs": [],
    "children": "items",
    "kind": "structure"
  },
  "BooleanLiteral": {
    "attrs": [],
    "content": "boolean",
    "kind": "expression"
  },
  "CalculationDefinition": {
    "attrs": [
      {
        "name": "name",
        "required": true
      }
    ],
    "children": "expression",
    "kind": "structure"
  },
  "Condition": {
    "attrs": [
      {
        "name": "state",
        "required": true
      },
      {
        "name": "destination_segment",
        "required": true
      }
    ],
    "children": [],
    "kind": "structure"
  },
  "CounterStart": {
    "attrs": [
      {
        "name": "channel",
        "required": true
      },
      {
        "name": "resource",
        "required": false
      }
    ],
    "children": [
      "Threshold"
    ],
    "kind": "action"
  },
  "CounterStop": {
    "attrs": [
      {
        "name": "channel",
        "required": true
      }
    ],
    "children": [],
    "kind": "action"
  },
  "DDSAction": {
    "attrs": [
      {
        "name": "channel",
        "required": true
      },
      {
        "name": "interp_type",
        "required": false
      }
    ],
    "children": [
      "Amplitude",
      "Frequency",
      "Phase",
      "InterpP0",
      "InterpP1"
    ],
    "kind": "action"
  },
  "Decision": {
    "attrs": [
      {
        "name": "resource",
        "required": true
      }
    ],
    "children": [
      "Threshold",
      "Condition"
    ],
    "kind": "structure"
  },
  "Definitions": {
    "attrs": [],
    "children": [
      "GateDefinition",
      "FunctionDefinition",
      "CalculationDefinition"
    ],
    "kind": "structure"
  },
  "DivisionOperator": {
    "attrs": [],
    "kind": "expression",
    "operands": 2,
    "operator": "/"
  },
  "Duration": {
    "attrs": [],
    "children": "expression",
    "kind": "wrapper"
  },
  "EqualOperator": {
    "attrs": [],
    "kind": "expression",
    "operands": 2,
    "operator": "=="
  },
  "Event": {
    "attrs": [],
    "children": [
      "StartTime",
      "DDSAction",
      "CounterStart",
      "CounterStop",
      "Measure",
      "TTLSet",
      "FunctionCall",
      "GateCall",
      "Event"
    ],
    "kind": "structure"
  },
  "Experiment": {
    "attrs": [],
    "children": [
      "Resources",
      "InitialSetup",
      "Headers",
      "Definitions",
      "Program"
    ],
    "kind": "structure"
  },
  "Frequency": {
    "attrs": [],
    "children": "expression",
    "kind": "wrapper"
  },
  "FunctionCall": {
    "attrs": [
      {
        "name": "name",
        "required": true
      }
    ],
    "children": [
      "Argument"
    ],
    "kind": "structure"
  },
  "FunctionDefinition": {
    "attrs": [
      {
        "name": "name",
        "required": true
      }
    ],
    "children": [
      "Parameter",
      "Body"
    ],
    "kind": "structure"
  },
  "GateBlock": {
    "attrs": [],
    "children": [
      "GateCall",
      "GateBlock"
    ],
    "kind": "structure"
  },
  "GateCall": {
    "attrs": [
      {
        "name": "name",
        "required": true
      }
    ],
    "children": [
      "Qubit",
      "Argument"
    ],
    "kind": "structure"
  },
  "GateDefinition": {
    "attrs": [
      {
        "name": "name",
        "required": true
      }
    ],
    "children": [
      "Port",
      "Parameter",
      "Duration",
      "Body"
    ],
    "kind": "structure"
  },
  "GreaterEqualOperator": {
    "attrs": [],
    "kind": "expression",
    "operands": 2,
    "operator": ">="
  },
  "GreaterThanOperator": {
    "attrs": [],
    "kind": "expression",
    "operands": 2,
    "operator": ">"
  },
  "Header": {
    "attrs": [
      {
        "name": "name",
        "required": true
      },
      {
        "name": "kind",
        "required": true
      }
    ],
    "children": [],
    "kind": "structure"
  },
  "Headers": {
    "attrs": [],
    "children": [
      "Header"
    ],
    "kind": "structure"
  },
  "InitialSetup": {
    "attrs": [
      {
        "name": "use_predefined",
        "required": false
      }
    ],
    "children": [
      "Parameter"
    ],
    "kind": "structure"
  },
  "InterpP0": {
    "attrs": [],
    "children": "expression",
    "kind": "wrapper"
  },
  "InterpP1": {
    "attrs": [],
    "children": "expression",
    "kind": "wrapper"
  },
  "LessEqualOperator": {
    "attrs": [],
    "kind": "expression",
    "operands": 2,
    "operator": "<="
  },
  "LessThanOperator": {
    "attrs": [],
    "kind": "expression",
    "operands": 2,
    "operator": "<"
  },
  "Level": {
    "attrs": [],
    "children": "expression",
    "kind": "wrapper"
  },
  "Measure": {
    "attrs": [
      {
        "name": "channel",
        "required": true
      },
      {
        "name": "resource",
        "required": true
      }
    ],
    "children": [
      "Duration",
      "Threshold"
    ],
    "kind": "action"
  },
  "MultiplicationOperator": {
    "attrs": [],
    "kind": "expression",
    "operands": 2,
    "operator": "*"
  },
  "NamedCalculation": {
    "attrs": [
      {
        "name": "name",
        "required": true
      }
    ],
    "content": "none",
    "kind": "expression"
  },
  "NamedConstant": {
    "attrs": [
      {
        "name": "name",
        "required": true
      },
      {
        "name": "date",
        "required": false
      },
      {
        "name": "date_mode",
        "required": false
      }
    ],
    "content": "none",
    "kind": "expression"
  },
  "NegationOperator": {
    "attrs": [],
    "kind": "expression",
    "operands": 1
  },
  "NotEqualOperator": {
    "attrs": [],
    "kind": "expression",
    "operands": 2,
    "operator": "!="
  },
  "NotOperator": {
    "attrs": [],
    "kind": "expression",
    "operands": 1,
    "operator": "not"
  },
  "NumericLiteral": {
    "attrs": [
      {
        "name": "units",
        "required": false
      }
    ],
    "content": "number",
    "kind": "expression"
  },
  "OrOperator": {
    "attrs": [],
    "kind": "expression",
    "operands": "2+",
    "operator": "or"
  },
  "Parameter": {
    "attrs": [
      {
        "name": "name",
        "required": true
      },
      {
        "name": "dimension",
        "required": false
      }
    ],
    "children": "expression?",
    "kind": "structure"
  },
  "ParameterRef": {
    "attrs": [
      {
        "name": "name",
        "required": true
      }
    ],
    "content": "none",
    "kind": "expression"
  },
  "Phase": {
    "attrs": [],
    "children": "expression",
    "kind": "wrapper"
  },
  "Port": {
    "attrs": [
      {
        "name": "name",
        "required": true
      }
    ],
    "children": [],
    "kind": "structure"
  },
  "PowerOperator": {
    "attrs": [],
    "kind": "expression",
    "operands": 2,
    "operator": "^"
  },
  "Program": {
    "attrs": [],
    "children": [
      "Segment"
    ],
    "kind": "structure"
  },
  "Qubit": {
    "attrs": [
      {
        "name": "port",
        "required": false
      },
      {
        "name": "ref",
        "required": false
      }
    ],
    "children": [],
    "content": "int",
    "kind": "structure"
  },
  "Resource": {
    "attrs": [
      {
        "name": "name",
        "required": true
      },
      {
        "name": "kind",
        "required": false
      },
      {
        "name": "length",
        "required": false
      }
    ],
    "children": [],
    "kind": "structure"
  },
  "Resources": {
    "attrs": [],
    "children": [
      "Resource"
    ],
    "kind": "structure"
  },
  "Segment": {
    "attrs": [
      {
        "name": "name",
        "required": false
      }
    ],
    "children": [
      "Event",
      "GateBlock",
      "Decision"
    ],
    "kind": "structure"
  },
  "StartTime": {
    "attrs": [
      {
        "name": "stype",
        "required": false
      }
    ],
    "children": "expression",
    "kind": "structure"
  },
  "SubtractionOperator": {
    "attrs": [],
    "kind": "expression",
    "operands": 2,
    "operator": "-"
  },
  "TTLSet": {
    "attrs": [
      {
        "name": "channel",
        "required": true
      }
    ],
    "children": [
      "Level"
    ],
    "kind": "action"
  },
  "Threshold": {
    "attrs": [],
    "children": "expression",
    "kind": "wrapper"
  }
};

registerSchema(SCHEMA);

export const START_TIME_MODES = ["absolute","since-previous-event","since-last-action"] as const;
export type StartTimeMode = (typeof START_TIME_MODES)[number];

export class AdditionOperator extends Expression {
  readonly exprKind = "numeric" as const;
  constructor(left: ExpressionLike, right: ExpressionLike) {
    super("AdditionOperator", {}, [toExpression(left), toExpression(right)]);
  }
}

export class Amplitude extends XmlElement {
  constructor(value: ExpressionLike) {
    super("Amplitude", {}, [toExpression(value)]);
  }
}

export class AndOperator extends Expression {
  readonly exprKind = "boolean" as const;
  constructor(...operands: ExpressionLike[]) {
    if (operands.length < 2) {
      throw new TypeMismatch("AndOperator needs at least two operands");
    }
    super("AndOperator", {}, operands.map(toExpression));
  }
}

export class Argument extends XmlElement {
  constructor(attrs: Attrs = {}, value?: ExpressionLike) {
    super("Argument", attrs, value === undefined ? [] : [toExpression(value)]);
  }
}

export class Body extends XmlElement {
  constructor(attrs: Attrs = {}, ...children: XmlElement[]) {
    super("Body", attrs, children);
  }
}

export class BooleanLiteral extends Expression {
  readonly exprKind = "boolean" as const;
  constructor(value: boolean) {
    super("BooleanLiteral", {}, [], value ? "true" : "false");
  }
}

export class CalculationDefinition extends XmlElement {
  constructor(attrs: Attrs, value: ExpressionLike) {
    super("CalculationDefinition", attrs, [toExpression(value)]);
  }
}

export class Condition extends XmlElement {
  constructor(attrs: Attrs = {}, ...children: XmlElement[]) {
    super("Condition", attrs, children);
  }
}

export class CounterStart extends XmlElement {
  constructor(attrs: Attrs = {}, ...children: XmlElement[]) {
    super("CounterStart", attrs, children);
  }
}

export class CounterStop extends XmlElement {
  constructor(attrs: Attrs = {}, ...children: XmlElement[]) {
    super("CounterStop", attrs, children);
  }
}

export class DDSAction extends XmlElement {
  constructor(attrs: Attrs = {}, ...children: XmlElement[]) {
    super("DDSAction", attrs, children);
  }
}

export class Decision extends XmlElement {
  constructor(attrs: Attrs = {}, ...children: XmlElement[]) {
    super("Decision", attrs, children);
  }
}

export class Definitions extends XmlElement {
  constructor(attrs: Attrs = {}, ...children: XmlElement[]) {
    super("Definitions", attrs, children);
  }
}

export class DivisionOperator extends Expression {
  readonly exprKind = "numeric" as const;
  constructor(left: ExpressionLike, right: ExpressionLike) {
    super("DivisionOperator", {}, [toExpression(left), toExpression(right)]);
  }
}

export class Duration extends XmlElement {
  constructor(value: ExpressionLike) {
    super("Duration", {}, [toExpression(value)]);
  }
}

export class EqualOperator extends Expression {
  readonly exprKind = "boolean" as const;
  constructor(left: ExpressionLike, right: ExpressionLike) {
    super("EqualOperator", {}, [toExpression(left), toExpression(right)]);
  }
}

export class Event extends XmlElement {
  constructor(attrs: Attrs = {}, ...children: XmlElement[]) {
    super("Event", attrs, children);
  }
}

export class Experiment extends XmlElement {
  constructor(attrs: Attrs = {}, ...children: XmlElement[]) {
    super("Experiment", attrs, children);
  }
}

export class Frequency extends XmlElement {
  constructor(value: ExpressionLike) {
    super("Frequency", {}, [toExpression(value)]);
  }
}

export class FunctionCall extends XmlElement {
  constructor(attrs: Attrs = {}, ...children: XmlElement[]) {
    super("FunctionCall", attrs, children);
  }
}

export class FunctionDefinition extends XmlElement {
  constructor(attrs: Attrs = {}, ...children: XmlElement[]) {
    super("FunctionDefinition", attrs, children);
  }
}

export class GateBlock extends XmlElement {
  constructor(attrs: Attrs = {}, ...children: XmlElement[]) {
    super("GateBlock", attrs, children);
  }
}

export class GateCall extends XmlElement {
  constructor(attrs: Attrs = {}, ...children: XmlElement[]) {
    super("GateCall", attrs, children);
  }
}

export class GateDefinition extends XmlElement {
  constructor(attrs: Attrs = {}, ...children: XmlElement[]) {
    super("GateDefinition", attrs, children);
  }
}

export class GreaterEqualOperator extends Expression {
  readonly exprKind = "boolean" as const;
  constructor(left: ExpressionLike, right: ExpressionLike) {
    super("GreaterEqualOperator", {}, [toExpression(left), toExpression(right)]);
  }
}

export class GreaterThanOperator extends Expression {
  readonly exprKind = "boolean" as const;
  constructor(left: ExpressionLike, right: ExpressionLike) {
    super("GreaterThanOperator", {}, [toExpression(left), toExpression(right)]);
  }
}

export class Header extends XmlElement {
  constructor(attrs: Attrs = {}, ...children: XmlElement[]) {
    super("Header", attrs, children);
  }
}

export class Headers extends XmlElement {
  constructor(attrs: Attrs = {}, ...children: XmlElement[]) {
    super("Headers", attrs, children);
  }
}

export class InitialSetup extends XmlElement {
  constructor(attrs: Attrs = {}, ...children: XmlElement[]) {
    super("InitialSetup", attrs, children);
  }
}

export class InterpP0 extends XmlElement {
  constructor(value: ExpressionLike) {
    super("InterpP0", {}, [toExpression(value)]);
  }
}

export class InterpP1 extends XmlElement {
  constructor(value: ExpressionLike) {
    super("InterpP1", {}, [toExpression(value)]);
  }
}

export class LessEqualOperator extends Expression {
  readonly exprKind = "boolean" as const;
  constructor(left: ExpressionLike, right: ExpressionLike) {
    super("LessEqualOperator", {}, [toExpression(left), toExpression(right)]);
  }
}

export class LessThanOperator extends Expression {
  readonly exprKind = "boolean" as const;
  constructor(left: ExpressionLike, right: ExpressionLike) {
    super("LessThanOperator", {}, [toExpression(left), toExpression(right)]);
  }
}

export class Level extends XmlElement {
  constructor(value: ExpressionLike) {
    super("Level", {}, [toExpression(value)]);
  }
}

export class Measure extends XmlElement {
  constructor(attrs: Attrs = {}, ...children: XmlElement[]) {
    super("Measure", attrs, children);
  }
}

export class MultiplicationOperator extends Expression {
  readonly exprKind = "numeric" as const;
  constructor(left: ExpressionLike, right: ExpressionLike) {
    super("MultiplicationOperator", {}, [toExpression(left), toExpression(right)]);
  }
}

export class NamedCalculation extends Expression {
  readonly exprKind = "numeric" as const;
  constructor(name: string) {
    super("NamedCalculation", { name }, []);
  }
}

export class NamedConstant extends Expression {
  readonly exprKind = "numeric" as const;
  constructor(name: string, opts: { date?: AttrValue; date_mode?: AttrValue } = {}) {
    super("NamedConstant", { name, ...opts }, []);
  }
}

export class NegationOperator extends Expression {
  readonly exprKind = "numeric" as const;
  constructor(operand: ExpressionLike) {
    super("NegationOperator", {}, [toExpression(operand)]);
  }
}

export class NotEqualOperator extends Expression {
  readonly exprKind = "boolean" as const;
  constructor(left: ExpressionLike, right: ExpressionLike) {
    super("NotEqualOperator", {}, [toExpression(left), toExpression(right)]);
  }
}

export class NotOperator extends Expression {
  readonly exprKind = "boolean" as const;
  constructor(operand: ExpressionLike) {
    super("NotOperator", {}, [toExpression(operand)]);
  }
}

export class NumericLiteral extends Expression {
  readonly exprKind = "numeric" as const;
  constructor(value: number, units?: string) {
    super("NumericLiteral", units === undefined ? {} : { units }, [], formatNumber(value));
  }
}

export class OrOperator extends Expression {
  readonly exprKind = "boolean" as const;
  constructor(...operands: ExpressionLike[]) {
    if (operands.length < 2) {
      throw new TypeMismatch("OrOperator needs at least two operands");
    }
    super("OrOperator", {}, operands.map(toExpression));
  }
}

export class Parameter extends XmlElement {
  constructor(attrs: Attrs = {}, value?: ExpressionLike) {
    super("Parameter", attrs, value === undefined ? [] : [toExpression(value)]);
  }
}

export class ParameterRef extends Expression {
  readonly exprKind = "numeric" as const;
  constructor(name: string) {
    super("ParameterRef", { name }, []);
  }
}

export class Phase extends XmlElement {
  constructor(value: ExpressionLike) {
    super("Phase", {}, [toExpression(value)]);
  }
}

export class Port extends XmlElement {
  constructor(attrs: Attrs = {}, ...children: XmlElement[]) {
    super("Port", attrs, children);
  }
}

export class PowerOperator extends Expression {
  readonly exprKind = "numeric" as const;
  constructor(left: ExpressionLike, right: ExpressionLike) {
    super("PowerOperator", {}, [toExpression(left), toExpression(right)]);
  }
}

export class Program extends XmlElement {
  constructor(attrs: Attrs = {}, ...children: XmlElement[]) {
    super("Program", attrs, children);
  }
}

export class Qubit extends XmlElement {
  constructor(index: number | null, attrs: Attrs = {}) {
    super("Qubit", attrs, [], index === null ? null : String(index));
  }
}

export class Resource extends XmlElement {
  constructor(attrs: Attrs = {}, ...children: XmlElement[]) {
    super("Resource", attrs, children);
  }
}

export class Resources extends XmlElement {
  constructor(attrs: Attrs = {}, ...children: XmlElement[]) {
    super("Resources", attrs, children);
  }
}

export class Segment extends XmlElement {
  constructor(attrs: Attrs = {}, ...children: XmlElement[]) {
    super("Segment", attrs, children);
  }
}

export class StartTime extends XmlElement {
  constructor(value: ExpressionLike, attrs: Attrs = {}) {
    super("StartTime", attrs, [toExpression(value)]);
  }
}

export class SubtractionOperator extends Expression {
  readonly exprKind = "numeric" as const;
  constructor(left: ExpressionLike, right: ExpressionLike) {
    super("SubtractionOperator", {}, [toExpression(left), toExpression(right)]);
  }
}

export class TTLSet extends XmlElement {
  constructor(attrs: Attrs = {}, ...children: XmlElement[]) {
    super("TTLSet", attrs, children);
  }
}

export class Threshold extends XmlElement {
  constructor(value: ExpressionLike) {
    super("Threshold", {}, [toExpression(value)]);
  }
}

registerFactories({
  literal: (value) => new NumericLiteral(value),
  binary: (op, left, right) => {
    switch (op) {
      case "+": return new AdditionOperator(left, right);
      case "/": return new DivisionOperator(left, right);
      case "*": return new MultiplicationOperator(left, right);
      case "^": return new PowerOperator(left, right);
      case "-": return new SubtractionOperator(left, right);
      default: throw new TypeMismatch(`unknown arithmetic operator ${op}`);
    }
  },
  compare: (op, left, right) => {
    switch (op) {
      case "==": return new EqualOperator(left, right);
      case ">=": return new GreaterEqualOperator(left, right);
      case ">": return new GreaterThanOperator(left, right);
      case "<=": return new LessEqualOperator(left, right);
      case "<": return new LessThanOperator(left, right);
      case "!=": return new NotEqualOperator(left, right);
      default: throw new TypeMismatch(`unknown comparison operator ${op}`);
    }
  },
  bool: (op, operands) => {
    switch (op) {
      case "and": return new AndOperator(...operands);
      case "not": return new NotOperator(operands[0]);
      case "or": return new OrOperator(...operands);
      default: throw new TypeMismatch(`unknown boolean operator ${op}`);
    }
  },
  negate: (operand) => new NegationOperator(operand),
});
