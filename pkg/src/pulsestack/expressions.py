"""Unit-aware symbolic expression trees.

Expressions stay symbolic until evaluated against a calibration snapshot:
literals carry units, named constants and named calculations are late
bound, and dimensional analysis is enforced at every operator.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime
from typing import Iterator, Mapping, Union

from .errors import DimensionError, DivisionByZero, TypeMismatch, UnresolvedName
from .units import (
    DIMENSIONLESS,
    Dims,
    Quantity,
    dims_div,
    dims_mul,
    dims_name,
    dims_pow,
    lookup_unit,
    si_quantity,
)

ARITH_OPS = ("+", "-", "*", "/", "^")
COMPARE_OPS = ("==", "!=", "<", "<=", ">", ">=")
BOOL_OPS = ("and", "or", "not")


@dataclass(frozen=True)
class DateSelector:
    """Which calibration record a named constant refers to."""

    mode: str = "most-recent"  # "most-recent" | "exact" | "latest-before"
    at: datetime | None = None

    def __post_init__(self):
        if self.mode not in ("most-recent", "exact", "latest-before"):
            raise ValueError(f"bad date selector mode {self.mode!r}")
        if self.mode != "most-recent" and self.at is None:
            raise ValueError(f"selector {self.mode!r} requires a timestamp")


MOST_RECENT = DateSelector()


@dataclass(frozen=True)
class Literal:
    quantity: Quantity


@dataclass(frozen=True)
class BooleanLiteral:
    value: bool


@dataclass(frozen=True)
class NamedConstant:
    name: str
    date: DateSelector = MOST_RECENT


@dataclass(frozen=True)
class NamedCalculation:
    name: str


@dataclass(frozen=True)
class ParameterRef:
    """Placeholder for a definition parameter, substituted at expansion."""

    name: str


@dataclass(frozen=True)
class Unary:
    op: str  # "neg"
    child: "Expression"


@dataclass(frozen=True)
class Binary:
    op: str  # one of ARITH_OPS
    left: "Expression"
    right: "Expression"


@dataclass(frozen=True)
class Compare:
    op: str  # one of COMPARE_OPS
    left: "Expression"
    right: "Expression"


@dataclass(frozen=True)
class Bool:
    op: str  # one of BOOL_OPS
    children: tuple["Expression", ...]


Expression = Union[
    Literal,
    BooleanLiteral,
    NamedConstant,
    NamedCalculation,
    ParameterRef,
    Unary,
    Binary,
    Compare,
    Bool,
]


def lit(value: float, unit_symbol: str | None = None) -> Literal:
    return Literal(Quantity(value, lookup_unit(unit_symbol)))


class SnapshotLike:
    """What evaluate() needs from a calibration snapshot."""

    def lookup(self, name: str, selector: DateSelector) -> Quantity:  # pragma: no cover
        raise NotImplementedError


class EmptySnapshot(SnapshotLike):
    def lookup(self, name: str, selector: DateSelector) -> Quantity:
        raise UnresolvedName(f"name {name!r} cannot resolve without a snapshot")


EMPTY_SNAPSHOT = EmptySnapshot()


def walk(expr: Expression) -> Iterator[Expression]:
    """Yield every node in the tree, parents before children."""
    yield expr
    if isinstance(expr, Unary):
        yield from walk(expr.child)
    elif isinstance(expr, (Binary, Compare)):
        yield from walk(expr.left)
        yield from walk(expr.right)
    elif isinstance(expr, Bool):
        for c in expr.children:
            yield from walk(c)


def free_names(expr: Expression) -> set[str]:
    """Names of every NamedConstant and NamedCalculation in the tree."""
    return {
        n.name for n in walk(expr) if isinstance(n, (NamedConstant, NamedCalculation))
    }


def parameter_names(expr: Expression) -> set[str]:
    return {n.name for n in walk(expr) if isinstance(n, ParameterRef)}


def substitute(expr: Expression, bindings: Mapping[str, Expression]) -> Expression:
    """Replace ParameterRef leaves by the bound argument expressions."""
    if isinstance(expr, ParameterRef):
        try:
            return bindings[expr.name]
        except KeyError:
            raise UnresolvedName(f"unbound parameter {expr.name!r}") from None
    if isinstance(expr, Unary):
        return Unary(expr.op, substitute(expr.child, bindings))
    if isinstance(expr, Binary):
        return Binary(expr.op, substitute(expr.left, bindings), substitute(expr.right, bindings))
    if isinstance(expr, Compare):
        return Compare(expr.op, substitute(expr.left, bindings), substitute(expr.right, bindings))
    if isinstance(expr, Bool):
        return Bool(expr.op, tuple(substitute(c, bindings) for c in expr.children))
    return expr


def expand_calculations(
    expr: Expression,
    calculations: Mapping[str, Expression],
    _depth: int = 0,
) -> Expression:
    """Macro-expand NamedCalculation references to their defining expressions."""
    if _depth > 32:
        raise UnresolvedName("calculation expansion exceeded depth 32 (cycle?)")
    if isinstance(expr, NamedCalculation):
        try:
            body = calculations[expr.name]
        except KeyError:
            raise UnresolvedName(f"unknown calculation {expr.name!r}") from None
        return expand_calculations(body, calculations, _depth + 1)
    if isinstance(expr, Unary):
        return Unary(expr.op, expand_calculations(expr.child, calculations, _depth))
    if isinstance(expr, Binary):
        return Binary(
            expr.op,
            expand_calculations(expr.left, calculations, _depth),
            expand_calculations(expr.right, calculations, _depth),
        )
    if isinstance(expr, Compare):
        return Compare(
            expr.op,
            expand_calculations(expr.left, calculations, _depth),
            expand_calculations(expr.right, calculations, _depth),
        )
    if isinstance(expr, Bool):
        return Bool(
            expr.op,
            tuple(expand_calculations(c, calculations, _depth) for c in expr.children),
        )
    return expr


def _require_quantity(v: Quantity | bool, context: str) -> Quantity:
    if isinstance(v, bool):
        raise TypeMismatch(f"boolean operand in {context}")
    return v


def _require_bool(v: Quantity | bool, context: str) -> bool:
    if not isinstance(v, bool):
        raise TypeMismatch(f"numeric operand in {context}")
    return v


def _int_exponent(expr: Expression) -> int:
    # Exponents are restricted to dimensionless integer literals so that
    # dimension inference stays decidable.
    if isinstance(expr, Literal) and expr.quantity.dims == DIMENSIONLESS:
        v = expr.quantity.si
        if v == int(v):
            return int(v)
    raise DimensionError("exponent must be a dimensionless integer literal")


def evaluate(
    expr: Expression,
    snapshot: SnapshotLike = EMPTY_SNAPSHOT,
    calculations: Mapping[str, Expression] | None = None,
) -> Quantity | bool:
    """Evaluate to a Quantity (numeric trees) or bool (boolean trees).

    Addition/subtraction require identical dims; multiplication and
    division combine dims; comparisons require identical dims and yield
    booleans. Raises UnresolvedName, DimensionError, DivisionByZero or
    TypeMismatch.
    """
    calcs = calculations or {}
    if isinstance(expr, Literal):
        return expr.quantity
    if isinstance(expr, BooleanLiteral):
        return expr.value
    if isinstance(expr, NamedConstant):
        return snapshot.lookup(expr.name, expr.date)
    if isinstance(expr, NamedCalculation):
        return evaluate(expand_calculations(expr, calcs), snapshot, calcs)
    if isinstance(expr, ParameterRef):
        raise UnresolvedName(f"unbound parameter {expr.name!r}")
    if isinstance(expr, Unary):
        child = _require_quantity(evaluate(expr.child, snapshot, calcs), "negation")
        return si_quantity(-child.si, child.dims)
    if isinstance(expr, Binary):
        left = _require_quantity(evaluate(expr.left, snapshot, calcs), f"'{expr.op}'")
        if expr.op == "^":
            n = _int_exponent(expr.right)
            return si_quantity(left.si**n, dims_pow(left.dims, n))
        right = _require_quantity(evaluate(expr.right, snapshot, calcs), f"'{expr.op}'")
        if expr.op in ("+", "-"):
            if left.dims != right.dims:
                raise DimensionError(
                    f"cannot apply '{expr.op}' to {dims_name(left.dims)}"
                    f" and {dims_name(right.dims)}"
                )
            si = left.si + right.si if expr.op == "+" else left.si - right.si
            return si_quantity(si, left.dims)
        if expr.op == "*":
            return si_quantity(left.si * right.si, dims_mul(left.dims, right.dims))
        if expr.op == "/":
            if right.si == 0.0:
                raise DivisionByZero("division by zero")
            return si_quantity(left.si / right.si, dims_div(left.dims, right.dims))
        raise ValueError(f"unknown arithmetic op {expr.op!r}")
    if isinstance(expr, Compare):
        left = _require_quantity(evaluate(expr.left, snapshot, calcs), "comparison")
        right = _require_quantity(evaluate(expr.right, snapshot, calcs), "comparison")
        if left.dims != right.dims:
            raise DimensionError(
                f"cannot compare {dims_name(left.dims)} with {dims_name(right.dims)}"
            )
        a, b = left.si, right.si
        return {
            "==": a == b,
            "!=": a != b,
            "<": a < b,
            "<=": a <= b,
            ">": a > b,
            ">=": a >= b,
        }[expr.op]
    if isinstance(expr, Bool):
        vals = [_require_bool(evaluate(c, snapshot, calcs), f"'{expr.op}'") for c in expr.children]
        if expr.op == "not":
            if len(vals) != 1:
                raise TypeMismatch("'not' takes exactly one operand")
            return not vals[0]
        return all(vals) if expr.op == "and" else any(vals)
    raise TypeError(f"not an expression node: {expr!r}")


def infer_dims(
    expr: Expression,
    name_dims: Mapping[str, Dims] | None = None,
) -> Dims | None:
    """Static dimension of a numeric tree; None marks boolean trees.

    Unknown names default to dimensionless unless listed in name_dims.
    """
    nd = name_dims or {}
    if isinstance(expr, Literal):
        return expr.quantity.dims
    if isinstance(expr, BooleanLiteral):
        return None
    if isinstance(expr, (NamedConstant, NamedCalculation, ParameterRef)):
        return nd.get(expr.name, DIMENSIONLESS)
    if isinstance(expr, Unary):
        return infer_dims(expr.child, nd)
    if isinstance(expr, Binary):
        left = infer_dims(expr.left, nd)
        if left is None:
            raise TypeMismatch("boolean operand in arithmetic")
        if expr.op == "^":
            return dims_pow(left, _int_exponent(expr.right))
        right = infer_dims(expr.right, nd)
        if right is None:
            raise TypeMismatch("boolean operand in arithmetic")
        if expr.op in ("+", "-"):
            if left != right:
                raise DimensionError(
                    f"'{expr.op}' over {dims_name(left)} and {dims_name(right)}"
                )
            return left
        return dims_mul(left, right) if expr.op == "*" else dims_div(left, right)
    if isinstance(expr, (Compare, Bool)):
        return None
    raise TypeError(f"not an expression node: {expr!r}")


def _is_literal_one(expr: Expression) -> bool:
    return (
        isinstance(expr, Literal)
        and expr.quantity.dims == DIMENSIONLESS
        and expr.quantity.si == 1.0
    )


def _is_literal_zero(expr: Expression) -> bool:
    return isinstance(expr, Literal) and expr.quantity.si == 0.0


def _all_literal(*exprs: Expression) -> bool:
    return all(isinstance(e, (Literal, BooleanLiteral)) for e in exprs)


def simplify(expr: Expression) -> Expression:
    """Fold literal-only subtrees and trivial identities.

    The result evaluates identically under every snapshot.
    """
    if isinstance(expr, Unary):
        child = simplify(expr.child)
        if _all_literal(child):
            return Literal(evaluate(Unary(expr.op, child)))  # type: ignore[arg-type]
        return Unary(expr.op, child)
    if isinstance(expr, Binary):
        left = simplify(expr.left)
        right = simplify(expr.right)
        folded = Binary(expr.op, left, right)
        if _all_literal(left, right):
            return Literal(evaluate(folded))  # type: ignore[arg-type]
        if expr.op == "*":
            if _is_literal_one(left):
                return right
            if _is_literal_one(right):
                return left
        if expr.op == "/" and _is_literal_one(right):
            return left
        if expr.op == "-" and _is_literal_zero(right) and _same_dims_zero_safe(left, right):
            return left
        if expr.op == "+" and _is_literal_zero(right) and _same_dims_zero_safe(left, right):
            return left
        if expr.op == "+" and _is_literal_zero(left) and _same_dims_zero_safe(right, left):
            return right
        return folded
    if isinstance(expr, Compare):
        left = simplify(expr.left)
        right = simplify(expr.right)
        if _all_literal(left, right):
            return BooleanLiteral(bool(evaluate(Compare(expr.op, left, right))))
        return Compare(expr.op, left, right)
    if isinstance(expr, Bool):
        children = tuple(simplify(c) for c in expr.children)
        if _all_literal(*children):
            return BooleanLiteral(bool(evaluate(Bool(expr.op, children))))
        return Bool(expr.op, children)
    return expr


def _same_dims_zero_safe(kept: Expression, zero: Expression) -> bool:
    # x + 0 may only drop the zero when dims agree; a dimension mismatch
    # must keep failing at evaluation time.
    assert isinstance(zero, Literal)
    try:
        kd = infer_dims(kept)
    except (DimensionError, TypeMismatch):
        return False
    return kd is not None and kd == zero.quantity.dims


def expression_kind(expr: Expression) -> str:
    """"boolean" for trees that evaluate to bool, else "numeric"."""
    if isinstance(expr, (BooleanLiteral, Compare, Bool)):
        return "boolean"
    return "numeric"


def check_boolean_mixing(expr: Expression) -> list[str]:
    """Structural rule: boolean and numeric subtrees only meet at a Compare.

    Returns human-readable violation messages (empty when clean).
    """
    problems: list[str] = []

    def visit(node: Expression) -> None:
        if isinstance(node, Unary):
            if expression_kind(node.child) == "boolean":
                problems.append("negation applied to a boolean subtree")
            visit(node.child)
        elif isinstance(node, Binary):
            for side in (node.left, node.right):
                if expression_kind(side) == "boolean":
                    problems.append(f"boolean operand under arithmetic '{node.op}'")
                visit(side)
        elif isinstance(node, Compare):
            for side in (node.left, node.right):
                if expression_kind(side) == "boolean":
                    problems.append("comparison over a boolean subtree")
                visit(side)
        elif isinstance(node, Bool):
            for c in node.children:
                if expression_kind(c) != "boolean":
                    problems.append(f"numeric operand under boolean '{node.op}'")
                visit(c)

    visit(expr)
    return problems


def parse_timestamp(text: str) -> datetime:
    """Accept ISO-8601 or the display form YYYY-MM-DD-HH-MM[-SS]."""
    try:
        return datetime.fromisoformat(text)
    except ValueError:
        pass
    parts = text.split("-")
    if len(parts) in (5, 6) and all(p.isdigit() for p in parts):
        nums = [int(p) for p in parts]
        return datetime(*nums)  # type: ignore[arg-type]
    raise ValueError(f"unrecognized timestamp {text!r}")


def format_timestamp(ts: datetime) -> str:
    return ts.isoformat(timespec="seconds")
