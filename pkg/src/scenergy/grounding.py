"""Resolving noun phrases to scene entities.

The default implementation matches symbolically on entity names and colors.
The ``Grounder`` protocol keeps the interface pluggable so a perception-based
resolver can replace it without touching the planner.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, runtime_checkable

from .errors import AmbiguityError, GroundingError
from .parser import FilterNode, render_filter, singularize
from .scene import Box, Scene


@dataclass(frozen=True)
class GroundingResult:
    """Entities denoted by one noun phrase, with their current boxes."""

    node: FilterNode
    ids: tuple[str, ...]
    boxes: tuple[Box, ...]

    def __post_init__(self):
        if len(self.ids) != len(self.boxes):
            raise GroundingError("ids and boxes must align")


@runtime_checkable
class Grounder(Protocol):
    def ground(self, node: FilterNode, scene: Scene) -> GroundingResult: ...


def _matches(node: FilterNode, name: str, color: str) -> bool:
    if singularize(name.lower()) != node.noun:
        return False
    return node.color is None or color.lower() == node.color


class SymbolicGrounder:
    """Exact name/color matching; ids are returned sorted for determinism."""

    def ground(self, node: FilterNode, scene: Scene) -> GroundingResult:
        matched = sorted(
            (e for e in scene.entities if _matches(node, e.name, e.color)),
            key=lambda e: e.id,
        )
        if not matched:
            raise GroundingError(
                f"no entity in the scene matches '{render_filter(node)}'"
            )
        if node.quantifier == "one" and len(matched) > 1:
            candidates = ", ".join(e.id for e in matched)
            raise AmbiguityError(
                f"'{render_filter(node)}' is ambiguous: candidates {candidates}"
            )
        return GroundingResult(
            node=node,
            ids=tuple(e.id for e in matched),
            boxes=tuple(e.box for e in matched),
        )


_DEFAULT = SymbolicGrounder()


def ground(node: FilterNode, scene: Scene) -> GroundingResult:
    """Ground one noun phrase with the default symbolic grounder."""
    return _DEFAULT.ground(node, scene)


def ground_program(program, scene: Scene, grounder: Grounder | None = None):
    """Ground every noun phrase in a program.

    Returns a dict keyed by FilterNode (nodes are frozen and hashable), so
    repeated phrases resolve once and identically.
    """
    resolver = grounder if grounder is not None else _DEFAULT
    results: dict[FilterNode, GroundingResult] = {}

    def visit(node: FilterNode) -> None:
        if node not in results:
            results[node] = resolver.ground(node, scene)

    for goal in program.goals:
        if hasattr(goal, "subject"):
            visit(goal.subject)
            visit(goal.referent)
        else:
            visit(goal.members)
            if goal.constraint is not None:
                visit(goal.constraint[1])
    return results
