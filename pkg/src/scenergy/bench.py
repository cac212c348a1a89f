"""Benchmark episodes: generation, scoring, and the end-to-end harness.

Four task families cover the evaluation surface:

* ``spatial-relations`` — one directional relation, initially unsatisfied;
* ``comp-one-step`` — 2–3 directional constraints on a single subject whose
  valid-region rectangles provably intersect;
* ``comp-group`` — 2–3 clauses with distinct subjects chained in a DAG
  (each referent is the anchor or an earlier subject), built around an
  explicit witness layout so the goal is achievable;
* ``shapes`` — 4–6 same-attribute objects arranged into a circle or line,
  sometimes constrained to sit inside a plate.

Episodes carry their instruction, ground-truth program, compiled goal terms,
and phrase→entity annotations; the harness replays the full pipeline
(parse → ground → compile → plan → execute → score) and emits CSV rows.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field, replace

import numpy as np

from .ebm import ConceptKind
from .errors import GenerationError
from .executor import ExecConfig, closed_loop_run, open_loop_run
from .grounding import ground_program
from .langevin import INFER_PRESET, SamplerConfig
from .metrics import (
    DEFAULT_GEOMETRY,
    Metrics,
    RelationGeometry,
    circle_reward,
    combine_contributions,
    directional_window,
    line_reward,
    relation_satisfied,
    shape_contribution,
)
from .parser import (
    BinaryEBMNode,
    FilterNode,
    MultiAryEBMNode,
    Program,
    parse,
    program_to_sexpr,
    render_filter,
    render_program,
)
from .planner import Term, compile_program, plan_goal
from .scene import Entity, Scene, scene_to_dict

SEEN_COLORS = ("blue", "red", "green", "yellow", "brown", "gray", "cyan")
UNSEEN_COLORS = ("orange", "purple", "pink", "white")
SEEN_OBJECTS = ("ring", "cube", "cylinder", "bowl")
UNSEEN_OBJECTS = (
    "triangle", "square", "plus", "diamond", "pentagon",
    "rectangle", "flower", "star", "circle", "hexagon", "heart",
)

FAMILIES = ("spatial-relations", "comp-one-step", "comp-group", "shapes")
SPLITS = ("seen", "unseen-colors", "unseen-objects")

DIRECTIONAL_KINDS = (
    ConceptKind.LEFT_OF,
    ConceptKind.RIGHT_OF,
    ConceptKind.BEHIND,
    ConceptKind.IN_FRONT_OF,
)

#: object size ranges (per axis), matching the concept-data calibration
OBJECT_SIZE = (0.04, 0.09)
MEMBER_SIZE = (0.04, 0.07)
PLATE_SIZE = (0.34, 0.44)

DISTRACTOR_COUNT = (2, 5)
CLEARANCE = 0.01
PLACEMENT_BUDGET = 2000
#: minimum side length of the comp-one-step valid-region intersection
MIN_WINDOW_SIDE = 0.02
#: fraction of circle-shape episodes that add an "in the plate" constraint
CONSTRAINED_SHAPE_PROB = 0.3


@dataclass(frozen=True)
class SplitConfig:
    seen_colors: tuple[str, ...] = SEEN_COLORS
    unseen_colors: tuple[str, ...] = UNSEEN_COLORS
    seen_objects: tuple[str, ...] = SEEN_OBJECTS
    unseen_objects: tuple[str, ...] = UNSEEN_OBJECTS
    background: str = "lightgray"  # metadata only; nothing renders it

    def __post_init__(self):
        if set(self.seen_colors) & set(self.unseen_colors):
            raise GenerationError("seen and unseen colors overlap")
        if set(self.seen_objects) & set(self.unseen_objects):
            raise GenerationError("seen and unseen objects overlap")

    def palette(self, split: str) -> tuple[tuple[str, ...], tuple[str, ...]]:
        """(colors, object names) available to a split."""
        if split == "seen":
            return self.seen_colors, self.seen_objects
        if split == "unseen-colors":
            return self.unseen_colors, self.seen_objects
        if split == "unseen-objects":
            return self.seen_colors, self.unseen_objects
        raise GenerationError(f"unknown split '{split}'")


DEFAULT_SPLITS = SplitConfig()


@dataclass(frozen=True)
class Episode:
    scene: Scene
    instruction: str
    program: Program
    goal: tuple[Term, ...]
    annotations: dict[str, tuple[str, ...]]
    family: str
    split: str
    seed: int


def episode_to_dict(episode: Episode) -> dict:
    goal_block = []
    for term in episode.goal:
        entry: dict = {"kind": term.kind.value, "ids": list(term.entity_ids)}
        if term.kind in DIRECTIONAL_KINDS:
            referent = episode.scene.entity(term.entity_ids[1])
            lo, hi = directional_window(term.kind, referent.center)
            entry["window"] = {"lo": lo.tolist(), "hi": hi.tolist()}
        elif term.kind is ConceptKind.INSIDE:
            box = episode.scene.entity(term.entity_ids[1]).box
            entry["container"] = {"tl": list(box.tl), "br": list(box.br)}
        goal_block.append(entry)
    doc = scene_to_dict(episode.scene)
    doc.update(
        {
            "instruction": episode.instruction,
            "program": program_to_sexpr(episode.program),
            "goal": goal_block,
            "annotations": {k: list(v) for k, v in episode.annotations.items()},
            "family": episode.family,
            "split": episode.split,
            "seed": episode.seed,
        }
    )
    return doc


def episode_to_json(episode: Episode) -> bytes:
    return json.dumps(episode_to_dict(episode), indent=2).encode("utf-8")


# ---------------------------------------------------------------------------
# placement helpers


def _separated(center_a, size_a, center_b, size_b, clearance: float) -> bool:
    gap_x = abs(center_a[0] - center_b[0]) - (size_a[0] + size_b[0]) / 2.0
    gap_y = abs(center_a[1] - center_b[1]) - (size_a[1] + size_b[1]) / 2.0
    return gap_x >= clearance or gap_y >= clearance


def _interior(size) -> tuple[np.ndarray, np.ndarray]:
    half = np.asarray(size) / 2.0
    return half + 0.002, 1.0 - half - 0.002


def _place(rng, size, occupied, clearance, reject=None, region=None):
    """Uniform center that clears every occupied box; optional veto predicate."""
    lo, hi = _interior(size)
    if region is not None:
        lo, hi = np.maximum(lo, region[0]), np.minimum(hi, region[1])
        if np.any(lo > hi):
            raise GenerationError("placement region is empty")
    for _ in range(PLACEMENT_BUDGET):
        center = rng.uniform(lo, hi)
        if not all(
            _separated(center, size, c, s, clearance) for c, s in occupied
        ):
            continue
        if reject is not None and reject(center):
            continue
        return (float(center[0]), float(center[1]))
    raise GenerationError("placement rejection budget exhausted")


def _draw_size(rng, bounds) -> tuple[float, float]:
    w, h = rng.uniform(bounds[0], bounds[1], 2)
    return (float(w), float(h))


def _draw_attrs(rng, colors, nouns, banned):
    for _ in range(PLACEMENT_BUDGET):
        pair = (str(rng.choice(nouns)), str(rng.choice(colors)))
        if pair not in banned:
            return pair
    raise GenerationError("attribute pool exhausted")


class _SceneBuilder:
    """Accumulates entities with non-overlap checking.

    Geometry (sizes, centers, counts) is drawn from ``rng``; entity
    attributes come from a separate stream so that episodes with the same
    seed share identical geometry across vocabulary splits — split
    comparisons then measure the pipeline, not generator sampling noise.
    """

    def __init__(self, rng, attr_rng, clearance: float):
        self.rng = rng
        self.attr_rng = attr_rng
        self.clearance = clearance
        self.entities: list[Entity] = []

    @property
    def occupied(self):
        return [(e.center, e.size) for e in self.entities]

    def add(self, name, color, size, center=None, reject=None, region=None):
        if center is None:
            center = _place(
                self.rng, size, self.occupied, self.clearance,
                reject=reject, region=region,
            )
        eid = f"obj{len(self.entities)}"
        entity = Entity(id=eid, name=name, color=color, center=center, size=size)
        self.entities.append(entity)
        return entity

    def draw_attrs(self, colors, nouns, banned):
        return _draw_attrs(self.attr_rng, colors, nouns, banned)

    def add_distractors(self, colors, nouns, banned, count_range):
        count = int(self.rng.integers(count_range[0], count_range[1] + 1))
        for _ in range(count):
            noun, color = self.draw_attrs(colors, nouns, banned)
            self.add(noun, color, _draw_size(self.rng, OBJECT_SIZE))
        return count

    def scene(self, seed: int) -> Scene:
        scene = Scene(entities=tuple(self.entities), seed=seed)
        scene.validate()
        return scene


def _finish(builder, program, family, split, seed) -> Episode:
    """Shared closing step: render, ground, compile, annotate, verify."""
    scene = builder.scene(seed)
    instruction = render_program(program)
    groundings = ground_program(program, scene)
    expr = compile_program(program, groundings)
    annotations = {
        render_filter(node): result.ids for node, result in groundings.items()
    }
    return Episode(
        scene=scene,
        instruction=instruction,
        program=program,
        goal=expr.terms,
        annotations=annotations,
        family=family,
        split=split,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# family generators


def _gen_spatial(builder, colors, nouns, geom, distractors, clearance, split, seed):
    rng = builder.rng
    subj_attrs = builder.draw_attrs(colors, nouns, set())
    ref_attrs = builder.draw_attrs(colors, nouns, {subj_attrs})
    kind = DIRECTIONAL_KINDS[int(rng.integers(len(DIRECTIONAL_KINDS)))]

    ref_size = _draw_size(rng, OBJECT_SIZE)
    referent = builder.add(
        ref_attrs[0], ref_attrs[1], ref_size,
        region=(np.array([0.3, 0.3]), np.array([0.7, 0.7])),
    )
    subj_size = _draw_size(rng, OBJECT_SIZE)

    def already_satisfied(center):
        probe = Entity(
            id="_probe", name="probe", color="", center=tuple(center), size=subj_size
        )
        return relation_satisfied(kind, probe, referent, geom)

    builder.add(subj_attrs[0], subj_attrs[1], subj_size, reject=already_satisfied)
    builder.add_distractors(colors, nouns, {subj_attrs, ref_attrs}, distractors)

    program = Program(
        goals=(
            BinaryEBMNode(
                kind,
                FilterNode(subj_attrs[0], subj_attrs[1]),
                FilterNode(ref_attrs[0], ref_attrs[1]),
            ),
        )
    )
    return _finish(builder, program, "spatial-relations", split, seed)


def _window_intersection(kinds, centers, subj_size, geom):
    lo, hi = _interior(subj_size)
    for kind, center in zip(kinds, centers):
        w_lo, w_hi = directional_window(kind, center, geom)
        lo, hi = np.maximum(lo, w_lo), np.minimum(hi, w_hi)
    return lo, hi


def _gen_comp_one(builder, colors, nouns, geom, distractors, clearance, split, seed):
    rng = builder.rng
    k = int(rng.integers(2, 4))
    subj_attrs = builder.draw_attrs(colors, nouns, set())
    banned = {subj_attrs}
    ref_attrs = []
    for _ in range(k):
        pair = builder.draw_attrs(colors, nouns, banned)
        banned.add(pair)
        ref_attrs.append(pair)

    subj_size = _draw_size(rng, OBJECT_SIZE)
    ref_sizes = [_draw_size(rng, OBJECT_SIZE) for _ in range(k)]

    for _ in range(PLACEMENT_BUDGET):
        kinds = [
            DIRECTIONAL_KINDS[int(rng.integers(len(DIRECTIONAL_KINDS)))]
            for _ in range(k)
        ]
        centers = [rng.uniform(0.15, 0.85, 2) for _ in range(k)]
        lo, hi = _window_intersection(kinds, centers, subj_size, geom)
        if np.any(hi - lo < MIN_WINDOW_SIDE):
            continue
        if not all(
            _separated(centers[i], ref_sizes[i], centers[j], ref_sizes[j], clearance)
            for i in range(k)
            for j in range(i + 1, k)
        ):
            continue
        break
    else:
        raise GenerationError("no jointly satisfiable constraint set found")

    referents = [
        builder.add(attrs[0], attrs[1], size, center=(float(c[0]), float(c[1])))
        for attrs, size, c in zip(ref_attrs, ref_sizes, centers)
    ]

    def fully_satisfied(center):
        probe = Entity(
            id="_probe", name="probe", color="", center=tuple(center), size=subj_size
        )
        return all(
            relation_satisfied(kind, probe, ref, geom)
            for kind, ref in zip(kinds, referents)
        )

    builder.add(subj_attrs[0], subj_attrs[1], subj_size, reject=fully_satisfied)
    builder.add_distractors(colors, nouns, banned, distractors)

    subject_filter = FilterNode(subj_attrs[0], subj_attrs[1])
    program = Program(
        goals=tuple(
            BinaryEBMNode(kind, subject_filter, FilterNode(attrs[0], attrs[1]))
            for kind, attrs in zip(kinds, ref_attrs)
        )
    )
    return _finish(builder, program, "comp-one-step", split, seed)


def _gen_comp_group(builder, colors, nouns, geom, distractors, clearance, split, seed):
    rng = builder.rng
    k = int(rng.integers(2, 4))
    attrs = []
    banned = set()
    for _ in range(k + 1):  # anchor + k subjects
        pair = builder.draw_attrs(colors, nouns, banned)
        banned.add(pair)
        attrs.append(pair)
    sizes = [_draw_size(rng, OBJECT_SIZE) for _ in range(k + 1)]

    for _ in range(PLACEMENT_BUDGET):
        referent_of = [0] + [int(rng.integers(0, i)) for i in range(1, k)]
        kinds = [
            DIRECTIONAL_KINDS[int(rng.integers(len(DIRECTIONAL_KINDS)))]
            for _ in range(k)
        ]
        # witness layout: anchor first, every subject inside its window
        witness = [rng.uniform(0.3, 0.7, 2)]
        ok = True
        for i in range(k):
            lo, hi = directional_window(kinds[i], witness[referent_of[i]], geom)
            margin = 0.01
            lo, hi = lo + margin, hi - margin
            w_lo, w_hi = _interior(sizes[i + 1])
            lo, hi = np.maximum(lo, w_lo), np.minimum(hi, w_hi)
            if np.any(lo > hi):
                ok = False
                break
            witness.append(rng.uniform(lo, hi))
        if ok:
            break
    else:
        raise GenerationError("no feasible constraint chain found")

    builder.add(
        attrs[0][0], attrs[0][1], sizes[0],
        center=(float(witness[0][0]), float(witness[0][1])),
    )
    for i in range(k):
        builder.add(attrs[i + 1][0], attrs[i + 1][1], sizes[i + 1])
    builder.add_distractors(colors, nouns, banned, distractors)

    filters = [FilterNode(noun, color) for noun, color in attrs]
    program = Program(
        goals=tuple(
            BinaryEBMNode(kinds[i], filters[i + 1], filters[referent_of[i]])
            for i in range(k)
        )
    )
    return _finish(builder, program, "comp-group", split, seed)


def _gen_shapes(builder, colors, nouns, geom, distractors, clearance, split, seed):
    rng = builder.rng
    n = int(rng.integers(4, 7))
    shape = ConceptKind.CIRCLE if rng.random() < 0.5 else ConceptKind.LINE
    constrained = shape is ConceptKind.CIRCLE and rng.random() < CONSTRAINED_SHAPE_PROB

    member_attrs = builder.draw_attrs(colors, nouns, set())
    banned = {member_attrs}

    plate_filter = None
    if constrained:
        plate_color = str(
            builder.attr_rng.choice(
                [c for c in colors if c != member_attrs[1]] or list(colors)
            )
        )
        plate_size = _draw_size(rng, PLATE_SIZE)
        builder.add(
            "plate", plate_color, plate_size,
            region=(np.array([0.35, 0.35]), np.array([0.65, 0.65])),
        )
        plate_filter = FilterNode("plate")

    for _ in range(n):
        builder.add(member_attrs[0], member_attrs[1], _draw_size(rng, MEMBER_SIZE))
    builder.add_distractors(
        colors, [x for x in nouns if x != "plate"], banned, distractors
    )

    members_filter = FilterNode(member_attrs[0], member_attrs[1], "all")
    constraint = (ConceptKind.INSIDE, plate_filter) if constrained else None
    program = Program(
        goals=(
            MultiAryEBMNode(shape=shape, members=members_filter, constraint=constraint),
        )
    )
    return _finish(builder, program, "shapes", split, seed)


_GENERATORS = {
    "spatial-relations": _gen_spatial,
    "comp-one-step": _gen_comp_one,
    "comp-group": _gen_comp_group,
    "shapes": _gen_shapes,
}


def gen_episode(
    family: str,
    split: str,
    seed: int,
    split_cfg: SplitConfig = DEFAULT_SPLITS,
    geom: RelationGeometry = DEFAULT_GEOMETRY,
    distractors: tuple[int, int] = DISTRACTOR_COUNT,
    clearance: float = CLEARANCE,
) -> Episode:
    """Deterministically generate one episode; same seed, same episode."""
    if family not in _GENERATORS:
        raise GenerationError(f"unknown task family '{family}'")
    colors, nouns = split_cfg.palette(split)
    # geometry is a function of the seed alone; attributes also depend on the
    # split, so the same seed yields the same layout in every vocabulary
    rng = np.random.default_rng([seed, 0])
    attr_rng = np.random.default_rng([seed, 1 + SPLITS.index(split)])
    builder = _SceneBuilder(rng, attr_rng, clearance)
    return _GENERATORS[family](
        builder, colors, nouns, geom, distractors, clearance, split, seed
    )


# ---------------------------------------------------------------------------
# scoring


def term_contribution(
    term: Term, scene: Scene, geom: RelationGeometry = DEFAULT_GEOMETRY
) -> float:
    """Contribution of one goal term in the final scene: binary terms are
    0/1 bits, shape terms earn their (thresholded) reward."""
    if term.kind.is_binary:
        subject = scene.entity(term.entity_ids[0])
        referent = scene.entity(term.entity_ids[1])
        return 1.0 if relation_satisfied(term.kind, subject, referent, geom) else 0.0
    points = np.array([scene.entity(i).center for i in term.entity_ids])
    reward = line_reward(points) if term.kind is ConceptKind.LINE else circle_reward(points)
    return shape_contribution(reward)


def score_episode(
    episode: Episode, final_scene: Scene, geom: RelationGeometry = DEFAULT_GEOMETRY
) -> Metrics:
    return combine_contributions(
        term_contribution(term, final_scene, geom) for term in episode.goal
    )


# ---------------------------------------------------------------------------
# the harness


@dataclass(frozen=True)
class EpisodeResult:
    family: str
    split: str
    seed: int
    tp: float
    tc: int
    actions: int
    predicted_success: bool | None  # None when run open-loop
    oracle_success: bool


@dataclass
class BenchmarkRun:
    results: list[EpisodeResult] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def mean_tp(self) -> float:
        return float(np.mean([r.tp for r in self.results])) if self.results else 0.0

    def mean_tc(self) -> float:
        return float(np.mean([r.tc for r in self.results])) if self.results else 0.0


def run_episode(
    episode: Episode,
    library,
    closed_loop: bool = True,
    exec_cfg: ExecConfig = ExecConfig(),
    plan_cfg: SamplerConfig = INFER_PRESET,
    plan_seed: int = 0,
    geom: RelationGeometry = DEFAULT_GEOMETRY,
) -> EpisodeResult:
    """Replay the full pipeline on one episode, starting from raw text."""
    program = parse(episode.instruction)
    groundings = ground_program(program, episode.scene)
    expr = compile_program(program, groundings)
    lib = library(episode) if callable(library) else library
    layout = plan_goal(
        episode.scene, expr, lib, cfg=plan_cfg,
        rng=np.random.default_rng([plan_seed, episode.seed]),
    )
    if closed_loop:
        final, predicted, log = closed_loop_run(episode.scene, layout, exec_cfg)
    else:
        final, log = open_loop_run(episode.scene, layout, exec_cfg)
        predicted = None
    metrics = score_episode(episode, final, geom)
    return EpisodeResult(
        family=episode.family,
        split=episode.split,
        seed=episode.seed,
        tp=metrics.tp,
        tc=metrics.tc,
        actions=len(log.actions),
        predicted_success=predicted,
        oracle_success=metrics.tc == 1,
    )


def run_benchmark(
    episodes,
    library,
    closed_loop: bool = True,
    exec_cfg: ExecConfig = ExecConfig(),
    plan_cfg: SamplerConfig = INFER_PRESET,
    plan_seed: int = 0,
    geom: RelationGeometry = DEFAULT_GEOMETRY,
    config_echo: dict | None = None,
) -> BenchmarkRun:
    run = BenchmarkRun(config=dict(config_echo or {}))
    for index, episode in enumerate(episodes):
        per_episode = replace(exec_cfg, seed=exec_cfg.seed + index)
        run.results.append(
            run_episode(
                episode, library,
                closed_loop=closed_loop, exec_cfg=per_episode,
                plan_cfg=plan_cfg, plan_seed=plan_seed, geom=geom,
            )
        )
    return run


def results_to_csv(run: BenchmarkRun) -> str:
    out = io.StringIO()
    for key in sorted(run.config):
        out.write(f"# {key} = {run.config[key]}\n")
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(
        ["task", "split", "seed", "tp", "tc", "actions",
         "predicted_success", "oracle_success"]
    )
    for r in run.results:
        predicted = "" if r.predicted_success is None else str(r.predicted_success).lower()
        writer.writerow(
            [r.family, r.split, r.seed, repr(r.tp), r.tc, r.actions,
             predicted, str(r.oracle_success).lower()]
        )
    return out.getvalue()
