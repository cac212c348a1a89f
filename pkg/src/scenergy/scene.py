"""Workspace, entities, boxes, and their JSON serialization.

The workspace is a unit square viewed from above: +x points right, +y points
away from the viewer ("behind"), so an entity that should end up *above*
another in the overhead image has the larger y. Boxes are axis-aligned and
stored as (min-corner, max-corner) pairs, called ``tl``/``br`` throughout.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import SceneFormatError, SceneValidationError


@dataclass(frozen=True)
class Box:
    """Axis-aligned rectangle: ``tl`` is the min corner, ``br`` the max corner."""

    tl: tuple[float, float]
    br: tuple[float, float]

    @property
    def center(self) -> tuple[float, float]:
        return ((self.tl[0] + self.br[0]) / 2.0, (self.tl[1] + self.br[1]) / 2.0)

    @property
    def size(self) -> tuple[float, float]:
        return (self.br[0] - self.tl[0], self.br[1] - self.tl[1])

    @property
    def area(self) -> float:
        w, h = self.size
        return max(0.0, w) * max(0.0, h)

    def is_valid(self) -> bool:
        return self.tl[0] < self.br[0] and self.tl[1] < self.br[1]


def box_from_center(center, size) -> Box:
    cx, cy = float(center[0]), float(center[1])
    w, h = float(size[0]), float(size[1])
    return Box((cx - w / 2.0, cy - h / 2.0), (cx + w / 2.0, cy + h / 2.0))


UNIT_WORKSPACE = Box((0.0, 0.0), (1.0, 1.0))


def intersection_area(a: Box, b: Box) -> float:
    w = min(a.br[0], b.br[0]) - max(a.tl[0], b.tl[0])
    h = min(a.br[1], b.br[1]) - max(a.tl[1], b.tl[1])
    if w <= 0.0 or h <= 0.0:
        return 0.0
    return w * h


def iou(a: Box, b: Box) -> float:
    """Intersection over union; exactly 1.0 for identical boxes, 0.0 when disjoint."""
    inter = intersection_area(a, b)
    if inter == 0.0:
        return 0.0
    return inter / (a.area + b.area - inter)


def contains(inner: Box, outer: Box) -> bool:
    """True when ``inner`` lies fully within ``outer`` (boundary contact allowed)."""
    return (
        inner.tl[0] >= outer.tl[0]
        and inner.tl[1] >= outer.tl[1]
        and inner.br[0] <= outer.br[0]
        and inner.br[1] <= outer.br[1]
    )


@dataclass(frozen=True)
class Entity:
    """One named, colored box in the scene.

    ``z`` is the optional vertical interval (z_min, z_max) for 3D concepts;
    ``theta`` the optional in-plane orientation in (-pi, pi].
    """

    id: str
    name: str
    color: str
    center: tuple[float, float]
    size: tuple[float, float]
    z: tuple[float, float] | None = None
    theta: float | None = None

    @property
    def box(self) -> Box:
        return box_from_center(self.center, self.size)

    def validate(self) -> None:
        if not self.id:
            raise SceneValidationError("entity with empty id")
        if self.size[0] <= 0.0 or self.size[1] <= 0.0:
            raise SceneValidationError(f"entity '{self.id}': non-positive size {self.size}")
        if self.z is not None and not self.z[0] < self.z[1]:
            raise SceneValidationError(f"entity '{self.id}': z interval {self.z} is empty")
        if self.theta is not None and not (-math.pi < self.theta <= math.pi):
            raise SceneValidationError(
                f"entity '{self.id}': theta {self.theta} outside (-pi, pi]"
            )
        for v in (*self.center, *self.size):
            if not math.isfinite(v):
                raise SceneValidationError(f"entity '{self.id}': non-finite geometry")


@dataclass(frozen=True)
class Scene:
    """An immutable set of entities in a rectangular workspace."""

    entities: tuple[Entity, ...]
    workspace: Box = UNIT_WORKSPACE
    seed: int | None = None

    def validate(self) -> None:
        seen: set[str] = set()
        for e in self.entities:
            e.validate()
            if e.id in seen:
                raise SceneValidationError(f"duplicate entity id '{e.id}'")
            seen.add(e.id)
        if not self.workspace.is_valid():
            raise SceneValidationError(f"degenerate workspace {self.workspace}")

    def entity(self, eid: str) -> Entity:
        for e in self.entities:
            if e.id == eid:
                return e
        raise SceneValidationError(f"no entity with id '{eid}'")

    def has(self, eid: str) -> bool:
        return any(e.id == eid for e in self.entities)

    def with_entity(self, entity: Entity) -> "Scene":
        """A copy of the scene with the same-id entity replaced."""
        if not self.has(entity.id):
            raise SceneValidationError(f"no entity with id '{entity.id}'")
        updated = tuple(entity if e.id == entity.id else e for e in self.entities)
        return replace(self, entities=updated)


# ---------------------------------------------------------------------------
# JSON serialization

_REQUIRED_ENTITY_FIELDS = ("id", "name", "color", "center", "size")


def _pair(raw, path: str) -> tuple[float, float]:
    if not isinstance(raw, (list, tuple)) or len(raw) != 2:
        raise SceneFormatError(f"{path}: expected a pair, got {raw!r}")
    try:
        return (float(raw[0]), float(raw[1]))
    except (TypeError, ValueError) as exc:
        raise SceneFormatError(f"{path}: expected numbers, got {raw!r}") from exc


def scene_from_dict(doc: dict) -> Scene:
    if not isinstance(doc, dict):
        raise SceneFormatError("root: expected an object")
    ws_doc = doc.get("workspace")
    if not isinstance(ws_doc, dict) or "w" not in ws_doc or "h" not in ws_doc:
        raise SceneFormatError("workspace: expected an object with 'w' and 'h'")
    workspace = Box((0.0, 0.0), (float(ws_doc["w"]), float(ws_doc["h"])))
    ents_doc = doc.get("entities")
    if not isinstance(ents_doc, list):
        raise SceneFormatError("entities: expected a list")
    entities = []
    for i, ent in enumerate(ents_doc):
        path = f"entities[{i}]"
        if not isinstance(ent, dict):
            raise SceneFormatError(f"{path}: expected an object")
        for key in _REQUIRED_ENTITY_FIELDS:
            if key not in ent:
                raise SceneFormatError(f"{path}.{key}: missing field")
        z = None
        if ent.get("z") is not None:
            z = _pair(ent["z"], f"{path}.z")
        theta = None
        if ent.get("theta") is not None:
            try:
                theta = float(ent["theta"])
            except (TypeError, ValueError) as exc:
                raise SceneFormatError(f"{path}.theta: expected a number") from exc
        entities.append(
            Entity(
                id=str(ent["id"]),
                name=str(ent["name"]),
                color=str(ent["color"]),
                center=_pair(ent["center"], f"{path}.center"),
                size=_pair(ent["size"], f"{path}.size"),
                z=z,
                theta=theta,
            )
        )
    seed = doc.get("seed")
    scene = Scene(entities=tuple(entities), workspace=workspace,
                  seed=None if seed is None else int(seed))
    scene.validate()
    return scene


def scene_to_dict(scene: Scene) -> dict:
    doc: dict = {
        "workspace": {"w": scene.workspace.br[0], "h": scene.workspace.br[1]},
        "entities": [],
    }
    if scene.seed is not None:
        doc["seed"] = scene.seed
    for e in scene.entities:
        ent: dict = {
            "id": e.id,
            "name": e.name,
            "color": e.color,
            "center": [e.center[0], e.center[1]],
            "size": [e.size[0], e.size[1]],
        }
        if e.z is not None:
            ent["z"] = [e.z[0], e.z[1]]
        if e.theta is not None:
            ent["theta"] = e.theta
        doc["entities"].append(ent)
    return doc


def load_scene(data: bytes | str) -> Scene:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise SceneFormatError(f"root: invalid JSON ({exc})") from exc
    return scene_from_dict(doc)


def save_scene(scene: Scene) -> bytes:
    return json.dumps(scene_to_dict(scene), indent=2).encode("utf-8")


# ---------------------------------------------------------------------------
# array views used by energies, samplers, and generators


def centers_array(scene: Scene, ids) -> np.ndarray:
    return np.array([scene.entity(i).center for i in ids], dtype=np.float64)


def sizes_array(scene: Scene, ids) -> np.ndarray:
    return np.array([scene.entity(i).size for i in ids], dtype=np.float64)


def center3(entity: Entity) -> tuple[float, float, float]:
    """3D center; entities without a z interval sit on the floor plane."""
    if entity.z is None:
        return (entity.center[0], entity.center[1], 0.0)
    return (entity.center[0], entity.center[1], (entity.z[0] + entity.z[1]) / 2.0)


def thickness(entity: Entity) -> float:
    return 0.0 if entity.z is None else entity.z[1] - entity.z[0]
