"""Compiling programs into energy expressions and planning goal layouts.

A parsed program plus its groundings compiles to an ``EnergyExpression`` — a
flat sum of energy terms, each naming a trained concept and the entity ids it
scores. Planning then runs the inference sampler jointly over every movable
entity's coordinates on that summed energy and reads the optimized centers
back into a ``GoalLayout``.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .ebm import ConceptKind, EBMParams, energy_graph, param_leaves
from .errors import CompileError, PlanningError
from .langevin import INFER_PRESET, SamplerConfig, Trajectory, sample
from .parser import BinaryEBMNode, MultiAryEBMNode, Program
from .scene import Entity, Scene

#: center displacement (normalized units) below which an entity counts as unmoved
TAU_MOVE = 0.02


@dataclass(frozen=True)
class Term:
    """One energy term: a concept applied to an ordered tuple of entities."""

    kind: ConceptKind
    entity_ids: tuple[str, ...]

    def __post_init__(self):
        n = len(self.entity_ids)
        if self.kind.is_binary and n != 2:
            raise CompileError(f"{self.kind.value} term needs 2 entities, got {n}")
        if self.kind.is_multiary and n < 3:
            raise CompileError(
                f"{self.kind.value} term needs at least 3 entities, got {n}"
            )


@dataclass(frozen=True)
class EnergyExpression:
    """A sum of terms; total energy is evaluated jointly over all of them."""

    terms: tuple[Term, ...]

    @property
    def referenced_ids(self) -> tuple[str, ...]:
        seen = {i for t in self.terms for i in t.entity_ids}
        return tuple(sorted(seen))

    def term_multiset(self) -> Counter:
        return Counter(self.terms)


# ---------------------------------------------------------------------------
# compilation


def _single_id(grounding, role: str) -> str:
    if len(grounding.ids) != 1:
        raise CompileError(
            f"{role} must denote exactly one entity, got {len(grounding.ids)}"
        )
    return grounding.ids[0]


def _lookup(groundings, node, role: str):
    try:
        grounding = groundings[node]
    except KeyError:
        raise CompileError(f"{role} was never grounded: {node}") from None
    if not grounding.ids:
        raise CompileError(f"{role} grounded to zero entities: {node}")
    return grounding


def compile_program(program: Program, groundings) -> EnergyExpression:
    """Map goals to terms: one per relation, one per shape, plus the
    per-member expansion of a shape's containment constraint."""
    if not program.goals:
        raise CompileError("program has no goals")
    terms: list[Term] = []
    for goal in program.goals:
        if isinstance(goal, BinaryEBMNode):
            subject = _single_id(
                _lookup(groundings, goal.subject, "binary subject"), "binary subject"
            )
            referent = _single_id(
                _lookup(groundings, goal.referent, "binary referent"), "binary referent"
            )
            terms.append(Term(goal.relation, (subject, referent)))
        elif isinstance(goal, MultiAryEBMNode):
            members = _lookup(groundings, goal.members, "shape members")
            if len(members.ids) < 3:
                raise CompileError(
                    f"shape over {len(members.ids)} members; need at least 3"
                )
            terms.append(Term(goal.shape, tuple(members.ids)))
            if goal.constraint is not None:
                relation, referent_node = goal.constraint
                referent = _single_id(
                    _lookup(groundings, referent_node, "shape constraint referent"),
                    "shape constraint referent",
                )
                for member in members.ids:
                    terms.append(Term(relation, (member, referent)))
        else:
            raise CompileError(f"cannot compile goal {goal!r}")
    return EnergyExpression(terms=tuple(terms))


def select_anchors(expr: EnergyExpression, program: Program | None = None):
    """Movable mask by entity id.

    Entities appearing only in binary referent slots are fixed anchors;
    anything that is ever a binary subject or a shape member is movable.
    The program argument is accepted for interface symmetry but the
    expression alone determines the mask.
    """
    movers: set[str] = set()
    referents: set[str] = set()
    for term in expr.terms:
        if term.kind.is_binary:
            movers.add(term.entity_ids[0])
            referents.add(term.entity_ids[1])
        else:
            movers.update(term.entity_ids)
    mask = {i: i in movers for i in expr.referenced_ids}
    if not any(mask.values()):
        raise PlanningError("every entity is a fixed anchor; nothing to optimize")
    return mask


# ---------------------------------------------------------------------------
# joint energy over a flat coordinate vector


def _term_features(kind: ConceptKind) -> tuple[str, ...]:
    if kind.is_3d:
        return ("x", "y", "z")
    if kind.is_pose:
        return ("x", "y", "theta")
    return ("x", "y")


class _Slots:
    """Flat coordinate layout: one slot per (entity, feature)."""

    def __init__(self, scene: Scene, expr: EnergyExpression):
        self.ids = expr.referenced_ids
        features: dict[str, list[str]] = {i: ["x", "y"] for i in self.ids}
        for term in expr.terms:
            for feat in _term_features(term.kind)[2:]:
                for eid in term.entity_ids:
                    if feat not in features[eid]:
                        features[eid].append(feat)
        self.index: dict[tuple[str, str], int] = {}
        self.entities: dict[str, Entity] = {}
        for eid in self.ids:
            try:
                self.entities[eid] = scene.entity(eid)
            except Exception:
                raise PlanningError(f"expression references unknown entity '{eid}'")
            for feat in features[eid]:
                self.index[(eid, feat)] = len(self.index)
        self.features = features
        self.size = len(self.index)

    def initial(self) -> np.ndarray:
        x0 = np.empty(self.size, dtype=np.float64)
        for (eid, feat), idx in self.index.items():
            e = self.entities[eid]
            if feat == "x":
                x0[idx] = e.center[0]
            elif feat == "y":
                x0[idx] = e.center[1]
            elif feat == "z":
                if e.z is None:
                    raise PlanningError(
                        f"entity '{eid}' participates in a 3D term but has no z interval"
                    )
                x0[idx] = 0.5 * (e.z[0] + e.z[1])
            else:
                x0[idx] = e.theta if e.theta is not None else 0.0
        return x0

    def bounds(self, scene: Scene):
        lo = np.full(self.size, -np.inf)
        hi = np.full(self.size, np.inf)
        for (eid, feat), idx in self.index.items():
            if feat == "x":
                lo[idx], hi[idx] = scene.workspace.tl[0], scene.workspace.br[0]
            elif feat == "y":
                lo[idx], hi[idx] = scene.workspace.tl[1], scene.workspace.br[1]
        return lo, hi

    def movable_array(self, movable: dict) -> np.ndarray:
        mask = np.zeros(self.size, dtype=bool)
        for (eid, _feat), idx in self.index.items():
            mask[idx] = bool(movable.get(eid, False))
        return mask

    def term_indices(self, term: Term) -> np.ndarray:
        feats = _term_features(term.kind)
        return np.array(
            [self.index[(eid, f)] for eid in term.entity_ids for f in feats],
            dtype=np.intp,
        )


def _term_sizes(term: Term, slots: _Slots) -> np.ndarray | None:
    if not term.kind.is_binary:
        return None
    d = term.kind.coord_dim
    sizes = np.empty((1, 2, d), dtype=np.float64)
    for j, eid in enumerate(term.entity_ids):
        e = slots.entities[eid]
        sizes[0, j, 0] = e.size[0]
        sizes[0, j, 1] = e.size[1]
        if d == 3:
            if e.z is None:
                raise PlanningError(
                    f"entity '{eid}' participates in a 3D term but has no z interval"
                )
            sizes[0, j, 2] = e.z[1] - e.z[0]
    return sizes


class JointEnergy:
    """Summed term energies over the flat coordinate vector.

    The library maps each concept kind either to trained ``EBMParams`` or to
    a callable ``(coords_node, sizes) -> energy_node`` for surrogate energies
    in tests.
    """

    def __init__(self, expr: EnergyExpression, slots: _Slots, library):
        self._parts = []
        for term in expr.terms:
            try:
                impl = library[term.kind]
            except KeyError:
                raise PlanningError(f"no energy available for '{term.kind.value}'")
            indices = slots.term_indices(term)
            shape = (1, len(term.entity_ids), term.kind.coord_dim)
            sizes = _term_sizes(term, slots)
            if isinstance(impl, EBMParams):
                frozen = {k: ad.const(v.value) for k, v in param_leaves(impl).items()}
                kind = term.kind

                def build(coords, sizes=sizes, frozen=frozen, kind=kind):
                    return energy_graph(frozen, kind, coords, sizes)

            else:

                def build(coords, sizes=sizes, impl=impl):
                    return impl(coords, sizes)

            self._parts.append((indices, shape, build))

    def value_and_grad(self, x: np.ndarray):
        xvar = ad.leaf(np.asarray(x, dtype=np.float64), name="coords")
        total = None
        for indices, shape, build in self._parts:
            coords = ad.reshape(ad.take(xvar, indices, axis=0), shape)
            energy = build(coords)
            total = energy if total is None else ad.add(total, energy)
        scalar = ad.sum_axes(total, (0,))
        (grad,) = ad.gradients(scalar, [xvar])
        return float(scalar.value), grad


# ---------------------------------------------------------------------------
# goal layouts


@dataclass(frozen=True)
class GoalLayout:
    """Optimized targets for every referenced entity, plus bookkeeping."""

    targets: dict[str, Entity]
    moved: dict[str, bool]
    energy: float
    trajectory: Trajectory | None = None


def action_count(layout: GoalLayout) -> int:
    return sum(1 for flag in layout.moved.values() if flag)


def layout_to_dict(layout: GoalLayout) -> dict:
    entities = []
    for eid in sorted(layout.targets):
        e = layout.targets[eid]
        ent: dict = {
            "id": e.id,
            "name": e.name,
            "color": e.color,
            "center": [e.center[0], e.center[1]],
            "size": [e.size[0], e.size[1]],
            "moved": layout.moved[eid],
        }
        if e.z is not None:
            ent["z"] = [e.z[0], e.z[1]]
        if e.theta is not None:
            ent["theta"] = e.theta
        entities.append(ent)
    return {"entities": entities, "energy": layout.energy}


def layout_to_json(layout: GoalLayout) -> bytes:
    return json.dumps(layout_to_dict(layout), indent=2).encode("utf-8")


def _wrap_angle(theta: float) -> float:
    wrapped = math.remainder(theta, 2.0 * math.pi)
    return math.pi if wrapped == -math.pi else wrapped


def plan_goal(
    scene: Scene,
    expr: EnergyExpression,
    library,
    mask: dict | None = None,
    cfg: SamplerConfig = INFER_PRESET,
    init: str = "scene",
    rng: np.random.Generator | None = None,
    keep_trajectory: bool = False,
    tau_move: float = TAU_MOVE,
) -> GoalLayout:
    """Jointly optimize every movable entity on the summed term energy."""
    if init not in ("scene", "random"):
        raise PlanningError(f"unknown init mode {init!r}")
    if not expr.terms:
        raise PlanningError("empty energy expression")
    movable = mask if mask is not None else select_anchors(expr)
    if not any(movable.get(i, False) for i in expr.referenced_ids):
        raise PlanningError("every entity is a fixed anchor; nothing to optimize")
    slots = _Slots(scene, expr)
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    x0 = slots.initial()
    if init == "random":
        for (eid, feat), idx in slots.index.items():
            if movable.get(eid, False) and feat in ("x", "y"):
                axis = 0 if feat == "x" else 1
                lo = scene.workspace.tl[axis]
                hi = scene.workspace.br[axis]
                x0[idx] = rng.uniform(lo, hi)
    bounds = slots.bounds(scene) if cfg.clamp is not None else None
    energy = JointEnergy(expr, slots, library)
    trajectory = sample(
        energy,
        x0,
        cfg,
        mask=slots.movable_array(movable),
        bounds=bounds,
        rng=rng,
    )
    final = trajectory.snapshots[-1]
    targets: dict[str, Entity] = {}
    moved: dict[str, bool] = {}
    for eid in slots.ids:
        original = slots.entities[eid]
        if not movable.get(eid, False):
            targets[eid] = original
            moved[eid] = False
            continue
        center = (
            float(final[slots.index[(eid, "x")]]),
            float(final[slots.index[(eid, "y")]]),
        )
        delta = [center[0] - original.center[0], center[1] - original.center[1]]
        z = original.z
        if (eid, "z") in slots.index:
            zc = float(final[slots.index[(eid, "z")]])
            thickness = original.z[1] - original.z[0]
            z = (zc - thickness / 2.0, zc + thickness / 2.0)
            delta.append(zc - 0.5 * (original.z[0] + original.z[1]))
        theta = original.theta
        if (eid, "theta") in slots.index:
            theta = _wrap_angle(float(final[slots.index[(eid, "theta")]]))
        targets[eid] = Entity(
            id=original.id,
            name=original.name,
            color=original.color,
            center=center,
            size=original.size,
            z=z,
            theta=theta,
        )
        moved[eid] = bool(np.linalg.norm(delta) > tau_move)
    return GoalLayout(
        targets=targets,
        moved=moved,
        energy=trajectory.final_energy,
        trajectory=trajectory if keep_trajectory else None,
    )
