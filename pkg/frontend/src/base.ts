/**
 * Element base classes and the canonical XML emitter.
 *
 * The emitter mirrors the toolchain's canonical form exactly: 2-space
 * indentation, lexicographically sorted attributes, self-closed empty
 * elements, and inline text content.
 */

export const NAMESPACE = "https://iqc.uwaterloo.ca/quantumion";
export const PREFIX = "qi";

export type AttrValue = string | number | boolean;
export type Attrs = Record<string, AttrValue>;

export interface AttrSpec {
  name: string;
  required: boolean;
}

export interface ElementSpec {
  kind: string;
  attrs: AttrSpec[];
  children?: string[] | string;
  content?: string;
  operator?: string;
  operands?: number | string;
}

export class SchemaViolation extends Error {}

/** A required child or attribute is missing at encode time. */
export class IncompleteElement extends Error {}

/** Boolean and numeric subtrees mixed outside a comparison. */
export class TypeMismatch extends Error {}

let schema: Record<string, ElementSpec> = {};

export function registerSchema(table: Record<string, ElementSpec>): void {
  schema = table;
}

export function schemaFor(tag: string): ElementSpec {
  const spec = schema[tag];
  if (spec === undefined) throw new SchemaViolation(`unknown element ${tag}`);
  return spec;
}

export function formatNumber(v: number): string {
  if (Number.isInteger(v) && Math.abs(v) < 1e15) return String(v);
  return String(v);
}

function escapeText(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

function escapeAttr(text: string): string {
  return escapeText(text).replace(/"/g, "&quot;");
}

function attrString(value: AttrValue): string {
  if (typeof value === "boolean") return value ? "true" : "false";
  if (typeof value === "number") return formatNumber(value);
  return value;
}

export class XmlElement {
  readonly tag: string;
  readonly attrs: Record<string, string>;
  readonly children: XmlElement[];
  readonly text: string | null;

  constructor(tag: string, attrs: Attrs = {}, children: XmlElement[] = [],
              text: string | null = null) {
    const spec = schemaFor(tag);
    const allowed = new Set(spec.attrs.map((a) => a.name));
    this.attrs = {};
    for (const [key, value] of Object.entries(attrs)) {
      if (value === undefined || value === null) continue;
      if (!allowed.has(key)) {
        throw new SchemaViolation(`${tag} has no attribute ${key}`);
      }
      this.attrs[key] = attrString(value);
    }
    if (Array.isArray(spec.children)) {
      const tags = new Set(spec.children);
      for (const child of children) {
        if (!tags.has(child.tag)) {
          throw new SchemaViolation(`${tag} does not allow ${child.tag} children`);
        }
      }
    }
    this.tag = tag;
    this.children = children;
    this.text = text;
  }

  /** Validations deferred until the element tree is emitted. */
  protected validate(): void {
    const spec = schemaFor(this.tag);
    for (const attr of spec.attrs) {
      if (attr.required && !(attr.name in this.attrs)) {
        throw new IncompleteElement(`${this.tag} requires attribute ${attr.name}`);
      }
    }
    if (this.tag === "Event") {
      if (this.children.length === 0 || this.children[0].tag !== "StartTime") {
        throw new IncompleteElement("Event requires a leading StartTime");
      }
    }
    for (const child of this.children) child.validate();
  }

  private emit(lines: string[], indent: number, extraAttrs: Attrs): void {
    const pad = "  ".repeat(indent);
    const merged: Record<string, string> = { ...this.attrs };
    for (const [key, value] of Object.entries(extraAttrs)) {
      merged[key] = attrString(value);
    }
    const attrs = Object.keys(merged)
      .sort()
      .map((key) => ` ${key}="${escapeAttr(merged[key])}"`)
      .join("");
    const tag = `${PREFIX}:${this.tag}`;
    if (this.children.length === 0 && this.text === null) {
      lines.push(`${pad}<${tag}${attrs}/>`);
    } else if (this.children.length === 0) {
      lines.push(`${pad}<${tag}${attrs}>${escapeText(this.text!)}</${tag}>`);
    } else {
      lines.push(`${pad}<${tag}${attrs}>`);
      for (const child of this.children) child.emit(lines, indent + 1, {});
      lines.push(`${pad}</${tag}>`);
    }
  }

  /** Canonical XML for this element, namespace declared on the root. */
  encodeXml(): string {
    this.validate();
    const lines: string[] = [];
    this.emit(lines, 0, { [`xmlns:${PREFIX}`]: NAMESPACE });
    return lines.join("\n");
  }

  /** Full document form: XML declaration plus trailing newline. */
  encodeDocument(): string {
    return `<?xml version="1.0" encoding="UTF-8"?>\n${this.encodeXml()}\n`;
  }
}

// -- symbolic algebra ---------------------------------------------------------

export type ExpressionKind = "numeric" | "boolean";
export type ExpressionLike = Expression | number;

interface OperatorFactories {
  literal: (value: number) => Expression;
  binary: (op: string, left: Expression, right: Expression) => Expression;
  compare: (op: string, left: Expression, right: Expression) => Expression;
  bool: (op: string, operands: Expression[]) => Expression;
  negate: (operand: Expression) => Expression;
}

let factories: OperatorFactories | null = null;

export function registerFactories(f: OperatorFactories): void {
  factories = f;
}

function ops(): OperatorFactories {
  if (factories === null) throw new Error("operator factories not registered");
  return factories;
}

export function toExpression(value: ExpressionLike): Expression {
  if (typeof value === "number") return ops().literal(value);
  return value;
}

export abstract class Expression extends XmlElement {
  abstract readonly exprKind: ExpressionKind;

  private numeric(side: ExpressionLike, op: string): Expression {
    const expr = toExpression(side);
    if (expr.exprKind !== "numeric") {
      throw new TypeMismatch(`boolean operand under arithmetic '${op}'`);
    }
    return expr;
  }

  private boolOperand(side: Expression, op: string): Expression {
    if (side.exprKind !== "boolean") {
      throw new TypeMismatch(`numeric operand under boolean '${op}'`);
    }
    return side;
  }

  plus(other: ExpressionLike): Expression {
    return ops().binary("+", this.numeric(this, "+"), this.numeric(other, "+"));
  }

  minus(other: ExpressionLike): Expression {
    return ops().binary("-", this.numeric(this, "-"), this.numeric(other, "-"));
  }

  times(other: ExpressionLike): Expression {
    return ops().binary("*", this.numeric(this, "*"), this.numeric(other, "*"));
  }

  dividedBy(other: ExpressionLike): Expression {
    return ops().binary("/", this.numeric(this, "/"), this.numeric(other, "/"));
  }

  toThe(exponent: ExpressionLike): Expression {
    return ops().binary("^", this.numeric(this, "^"), this.numeric(exponent, "^"));
  }

  negated(): Expression {
    return ops().negate(this.numeric(this, "neg"));
  }

  eq(other: ExpressionLike): Expression {
    return ops().compare("==", this.numeric(this, "=="), this.numeric(other, "=="));
  }

  ne(other: ExpressionLike): Expression {
    return ops().compare("!=", this.numeric(this, "!="), this.numeric(other, "!="));
  }

  lt(other: ExpressionLike): Expression {
    return ops().compare("<", this.numeric(this, "<"), this.numeric(other, "<"));
  }

  le(other: ExpressionLike): Expression {
    return ops().compare("<=", this.numeric(this, "<="), this.numeric(other, "<="));
  }

  gt(other: ExpressionLike): Expression {
    return ops().compare(">", this.numeric(this, ">"), this.numeric(other, ">"));
  }

  ge(other: ExpressionLike): Expression {
    return ops().compare(">=", this.numeric(this, ">="), this.numeric(other, ">="));
  }

  and(other: Expression): Expression {
    return ops().bool("and", [this.boolOperand(this, "and"), this.boolOperand(other, "and")]);
  }

  or(other: Expression): Expression {
    return ops().bool("or", [this.boolOperand(this, "or"), this.boolOperand(other, "or")]);
  }

  not(): Expression {
    return ops().bool("not", [this.boolOperand(this, "not")]);
  }
}
