"""Yellow-page registry and matchmaking: the admin service's core.

A single-instance registry maps agent addresses to attribute maps; searches
are conjunctive constraint filters with a deterministic result order.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from typing import Any, Union

AttributeValue = Union[str, int, float, bool]

OPERATORS = frozenset({"eq", "ne", "lt", "le", "gt", "ge", "in_set"})

_ORDERED = {"lt", "le", "gt", "ge"}


class InvalidQuery(Exception):
    """Unknown operator or type-mismatched operand."""


@dataclass(frozen=True)
class Constraint:
    attribute: str
    operator: str
    operand: Any

    def to_wire(self) -> list:
        operand = sorted(self.operand) if self.operator == "in_set" else self.operand
        return [self.attribute, self.operator, operand]

    @classmethod
    def from_wire(cls, item: list) -> "Constraint":
        if not isinstance(item, (list, tuple)) or len(item) != 3:
            raise InvalidQuery(f"constraint must be [attribute, operator, operand]: {item!r}")
        return cls(str(item[0]), str(item[1]), item[2])


@dataclass(frozen=True)
class Query:
    """Conjunction of constraints; empty list matches every description."""

    constraints: tuple[Constraint, ...] = ()

    @classmethod
    def of(cls, *constraints: Constraint) -> "Query":
        return cls(tuple(constraints))

    def to_wire(self) -> list:
        return [c.to_wire() for c in self.constraints]

    @classmethod
    def from_wire(cls, items: list) -> "Query":
        return cls(tuple(Constraint.from_wire(i) for i in items))


@dataclass
class ServiceDescription:
    agent: str
    attributes: dict[str, AttributeValue] = field(default_factory=dict)
    registered_at: int = 0


def _check_constraint(constraint: Constraint) -> None:
    if constraint.operator not in OPERATORS:
        raise InvalidQuery(f"unknown operator {constraint.operator!r}")
    if not constraint.attribute:
        raise InvalidQuery("constraint attribute must be non-empty")
    if constraint.operator == "in_set":
        if not isinstance(constraint.operand, (list, tuple, set, frozenset)):
            raise InvalidQuery("in_set operand must be a collection")


def _comparable(value: Any, operand: Any) -> bool:
    if isinstance(value, bool) or isinstance(operand, bool):
        return type(value) is type(operand)
    if isinstance(value, (int, float)) and isinstance(operand, (int, float)):
        return True
    return type(value) is type(operand)


def constraint_matches(constraint: Constraint, attributes: dict[str, AttributeValue]) -> bool:
    """Evaluate one constraint against an attribute map.

    A missing attribute never matches. Ordered operators on type-mismatched
    operands raise InvalidQuery rather than silently failing.
    """
    _check_constraint(constraint)
    if constraint.attribute not in attributes:
        return False
    value = attributes[constraint.attribute]
    op, operand = constraint.operator, constraint.operand
    if op == "in_set":
        return any(_comparable(value, item) and value == item for item in operand)
    if op in _ORDERED and not _comparable(value, operand):
        raise InvalidQuery(
            f"operand {operand!r} not comparable with attribute value {value!r}"
        )
    if not _comparable(value, operand):
        return op == "ne"
    if op == "eq":
        return value == operand
    if op == "ne":
        return value != operand
    if op == "lt":
        return value < operand
    if op == "le":
        return value <= operand
    if op == "gt":
        return value > operand
    return value >= operand


class Registry:
    """Serialized registration store with snapshot-consistent searches."""

    def __init__(self):
        self._lock = threading.Lock()
        self._descriptions: dict[str, ServiceDescription] = {}

    def register(self, desc: ServiceDescription) -> None:
        for name in desc.attributes:
            if not name:
                raise InvalidQuery("attribute names must be non-empty")
        with self._lock:
            self._descriptions[desc.agent] = ServiceDescription(
                agent=desc.agent,
                attributes=dict(desc.attributes),
                registered_at=desc.registered_at,
            )

    def deregister(self, agent: str) -> None:
        with self._lock:
            self._descriptions.pop(agent, None)

    def search(self, query: Query) -> list[str]:
        with self._lock:
            snapshot = {a: dict(d.attributes) for a, d in self._descriptions.items()}
        matches = []
        for agent in snapshot:
            if all(constraint_matches(c, snapshot[agent]) for c in query.constraints):
                matches.append(agent)
        return sorted(matches)

    def snapshot_json(self) -> str:
        with self._lock:
            doc = {
                agent: {
                    "attributes": dict(sorted(d.attributes.items())),
                    "registered_at": d.registered_at,
                }
                for agent, d in sorted(self._descriptions.items())
            }
        return json.dumps(doc, sort_keys=True, indent=2)
