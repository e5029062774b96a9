"""JSON-based symbolic expression language for referring utterances.

An expression names a target category and constrains it with relation
clauses; each clause anchors on nested sub-expressions. The relation
vocabulary is closed and every relation has a fixed arity.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

__all__ = [
    "ExpressionError",
    "UNARY_RELATIONS",
    "BINARY_RELATIONS",
    "TERNARY_RELATIONS",
    "ALL_RELATIONS",
    "relation_arity",
    "normalize_relation_name",
    "RelationClause",
    "SymbolicExpression",
    "parse_expression",
    "expression_from_dict",
    "expression_to_dict",
    "serialize_expression",
    "collect_conditions",
]

UNARY_RELATIONS = (
    "large", "small", "high", "low",
    "on_the_floor", "against_the_wall", "at_the_corner",
)
BINARY_RELATIONS = ("near", "far", "above", "below", "left", "right", "front", "behind")
TERNARY_RELATIONS = ("between",)
ALL_RELATIONS = UNARY_RELATIONS + BINARY_RELATIONS + TERNARY_RELATIONS

_ARITY = {name: 1 for name in UNARY_RELATIONS}
_ARITY.update({name: 2 for name in BINARY_RELATIONS})
_ARITY.update({name: 3 for name in TERNARY_RELATIONS})

MAX_DEPTH = 8


class ExpressionError(ValueError):
    """Raised for malformed symbolic expressions."""


def normalize_relation_name(name: str) -> str:
    """Unify spacing so e.g. "On the Floor" matches "on_the_floor"."""
    return "_".join(name.casefold().replace("-", " ").replace("_", " ").split())


def relation_arity(name: str) -> int:
    """Arity of a canonical relation name (1, 2 or 3)."""
    try:
        return _ARITY[name]
    except KeyError:
        raise ExpressionError(
            f"unknown relation {name!r}; known relations: {', '.join(ALL_RELATIONS)}"
        ) from None


@dataclass(frozen=True)
class RelationClause:
    """One spatial constraint: a relation, its anchors, and an optional negation."""

    relation: str
    anchors: tuple["SymbolicExpression", ...] = ()
    negative: bool = False

    def __post_init__(self) -> None:
        arity = relation_arity(self.relation)
        if len(self.anchors) != arity - 1:
            raise ExpressionError(
                f"relation {self.relation!r} takes {arity - 1} anchor(s), "
                f"got {len(self.anchors)}"
            )


@dataclass(frozen=True)
class SymbolicExpression:
    """Target category plus relation clauses; anchors recurse."""

    category: str
    relations: tuple[RelationClause, ...] = ()

    def __post_init__(self) -> None:
        if not self.category:
            raise ExpressionError("category must be a non-empty string")

    def depth(self) -> int:
        best = 1
        for clause in self.relations:
            for anchor in clause.anchors:
                best = max(best, 1 + anchor.depth())
        return best


def _clause_from_dict(raw: object, depth: int, path: str) -> RelationClause:
    if not isinstance(raw, dict):
        raise ExpressionError(f"{path}: clause must be an object")
    name = raw.get("relation_name", raw.get("relation"))
    if not isinstance(name, str):
        raise ExpressionError(f"{path}: missing relation_name")
    canonical = normalize_relation_name(name)
    if canonical not in _ARITY:
        raise ExpressionError(
            f"{path}: unknown relation {name!r}; known relations: {', '.join(ALL_RELATIONS)}"
        )
    # the wire format uses both "anchors" and "objects" for the anchor list
    anchors_raw = raw.get("anchors", raw.get("objects", []))
    if not isinstance(anchors_raw, list):
        raise ExpressionError(f"{path}: anchors must be a list")
    anchors = tuple(
        _expr_from_dict(a, depth + 1, f"{path}.anchors[{k}]")
        for k, a in enumerate(anchors_raw)
    )
    negative = raw.get("negative", False)
    if not isinstance(negative, bool):
        raise ExpressionError(f"{path}: negative must be a boolean")
    arity = _ARITY[canonical]
    if len(anchors) != arity - 1:
        raise ExpressionError(
            f"{path}: relation {canonical!r} takes {arity - 1} anchor(s), got {len(anchors)}"
        )
    return RelationClause(relation=canonical, anchors=anchors, negative=negative)


def _expr_from_dict(raw: object, depth: int, path: str) -> SymbolicExpression:
    if depth > MAX_DEPTH:
        raise ExpressionError(f"{path}: expression nesting exceeds depth {MAX_DEPTH}")
    if not isinstance(raw, dict):
        raise ExpressionError(f"{path}: expected an object")
    category = raw.get("category")
    if not isinstance(category, str) or not category:
        raise ExpressionError(f"{path}: missing category")
    relations_raw = raw.get("relations", [])
    if not isinstance(relations_raw, list):
        raise ExpressionError(f"{path}: relations must be a list")
    clauses = tuple(
        _clause_from_dict(c, depth, f"{path}.relations[{k}]")
        for k, c in enumerate(relations_raw)
    )
    return SymbolicExpression(category=category, relations=clauses)


def expression_from_dict(raw: object) -> SymbolicExpression:
    return _expr_from_dict(raw, 1, "$")


def parse_expression(text: str) -> SymbolicExpression:
    """Parse and validate the expression wire format."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ExpressionError(
            f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from None
    return expression_from_dict(raw)


def expression_to_dict(expr: SymbolicExpression) -> dict:
    """Canonical dict: keys category, relations; clause keys relation_name, anchors, negative."""
    return {
        "category": expr.category,
        "relations": [
            {
                "relation_name": clause.relation,
                "anchors": [expression_to_dict(a) for a in clause.anchors],
                "negative": clause.negative,
            }
            for clause in expr.relations
        ],
    }


def serialize_expression(expr: SymbolicExpression) -> str:
    """Canonical one-line JSON; parse(serialize(x)) structurally equals x."""
    return json.dumps(expression_to_dict(expr), ensure_ascii=False)


def collect_conditions(expr: SymbolicExpression) -> list[tuple[str, RelationClause]]:
    """Flatten to (target-category, clause) pairs, depth-first, root first."""
    out: list[tuple[str, RelationClause]] = []

    def walk(node: SymbolicExpression) -> None:
        for clause in node.relations:
            out.append((node.category, clause))
            for anchor in clause.anchors:
                walk(anchor)

    walk(expr)
    return out
