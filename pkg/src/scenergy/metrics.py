"""Satisfaction predicates, shape rewards, and episode scores.

Everything here is pure geometry over final scenes — no learned model is ever
consulted, so these functions double as ground truth for both dataset
generation and benchmark scoring.

Conventions: the workspace is seen from above with +y pointing away from the
viewer, so "behind" means larger y and "in front of" smaller y. A directional
relation holds when the center offset along its axis lies in
[offset_min, offset_max] and the perpendicular offset stays within ``band``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ebm import ConceptKind
from .scene import Entity, contains

#: shape rewards: full credit at radial/perpendicular std <= 0.03, zero at >= 0.06
REWARD_STD_FULL = 0.03
REWARD_STD_ZERO = 0.06

#: |subject z_min - referent z_max| tolerance for "on top of"
CONTACT_TOLERANCE = 0.005

#: per-shape reward treated as completion when scoring episodes
SHAPE_COMPLETE_REWARD = 0.99


@dataclass(frozen=True)
class RelationGeometry:
    """Shared geometric calibration for predicates and data generation."""

    offset_min: float = 0.06
    offset_max: float = 0.25
    band: float = 0.08
    inside_margin: float = 0.01
    circle_radius: tuple[float, float] = (0.08, 0.16)
    line_length: tuple[float, float] = (0.2, 0.5)
    shape_jitter: float = 0.004


DEFAULT_GEOMETRY = RelationGeometry()

#: (axis, sign) of the subject-minus-referent center offset per direction
_DIRECTIONAL: dict[ConceptKind, tuple[int, float]] = {
    ConceptKind.LEFT_OF: (0, -1.0),
    ConceptKind.RIGHT_OF: (0, 1.0),
    ConceptKind.BEHIND: (1, 1.0),
    ConceptKind.IN_FRONT_OF: (1, -1.0),
}


def relation_satisfied(
    kind: ConceptKind,
    subject: Entity,
    referent: Entity,
    geom: RelationGeometry = DEFAULT_GEOMETRY,
) -> bool:
    """Does ``subject <kind> referent`` hold in the scene?"""
    if kind in _DIRECTIONAL:
        axis, sign = _DIRECTIONAL[kind]
        along = sign * (subject.center[axis] - referent.center[axis])
        across = abs(subject.center[1 - axis] - referent.center[1 - axis])
        return geom.offset_min <= along <= geom.offset_max and across <= geom.band
    if kind is ConceptKind.INSIDE:
        return contains(subject.box, referent.box)
    if kind is ConceptKind.ON_3D:
        if subject.z is None or referent.z is None:
            return False
        return (
            contains(subject.box, referent.box)
            and abs(subject.z[0] - referent.z[1]) <= CONTACT_TOLERANCE
        )
    raise ValueError(f"{kind.value} is not a binary relation")


def directional_window(
    kind: ConceptKind, referent_center, geom: RelationGeometry = DEFAULT_GEOMETRY
) -> tuple[np.ndarray, np.ndarray]:
    """Axis-aligned rectangle of subject centers satisfying a directional relation.

    Returns (low, high) corners; the rectangle is closed.
    """
    if kind not in _DIRECTIONAL:
        raise ValueError(f"{kind.value} has no rectangular center window")
    axis, sign = _DIRECTIONAL[kind]
    c = np.asarray(referent_center, dtype=np.float64)
    lo, hi = c.copy(), c.copy()
    if sign > 0:
        lo[axis] += geom.offset_min
        hi[axis] += geom.offset_max
    else:
        lo[axis] -= geom.offset_max
        hi[axis] -= geom.offset_min
    lo[1 - axis] -= geom.band
    hi[1 - axis] += geom.band
    return lo, hi


# ---------------------------------------------------------------------------
# shape rewards


def _std_band_reward(s: float) -> float:
    if s <= REWARD_STD_FULL:
        return 1.0
    if s >= REWARD_STD_ZERO:
        return 0.0
    return (REWARD_STD_ZERO - s) / (REWARD_STD_ZERO - REWARD_STD_FULL)


def circle_reward(points) -> float:
    """1 when the points lie on a common circle around their centroid.

    The spread statistic is the population standard deviation of the
    centroid-to-point distances; full credit at <= 0.03, zero at >= 0.06,
    linear in between.
    """
    pts = np.asarray(points, dtype=np.float64)
    radii = np.linalg.norm(pts - pts.mean(axis=0), axis=1)
    return _std_band_reward(float(radii.std()))


def line_reward(points) -> float:
    """1 when the points lie on a common line (total-least-squares fit).

    The fitted line is the principal axis through the centroid; the spread
    statistic is the population standard deviation of the perpendicular
    distances, with the same 0.03/0.06 thresholds as ``circle_reward``.
    All-coincident points score 1 by convention.
    """
    pts = np.asarray(points, dtype=np.float64)
    centered = pts - pts.mean(axis=0)
    second_moment = centered.T @ centered / len(pts)
    smallest = float(np.linalg.eigvalsh(second_moment)[0])
    return _std_band_reward(float(np.sqrt(max(smallest, 0.0))))


# ---------------------------------------------------------------------------
# episode scores


@dataclass(frozen=True)
class Metrics:
    """Task progress (fraction of goal constraints satisfied) and completion."""

    tp: float
    tc: int

    def __post_init__(self):
        if not 0.0 <= self.tp <= 1.0 or self.tc not in (0, 1):
            raise ValueError(f"invalid metrics tp={self.tp} tc={self.tc}")


def combine_contributions(contributions) -> Metrics:
    """TP = mean contribution, TC = 1 iff every contribution is exactly 1."""
    values = [float(c) for c in contributions]
    if not values:
        raise ValueError("no goal constraints to score")
    tp = float(np.mean(values))
    tc = int(all(v == 1.0 for v in values))
    return Metrics(tp=tp, tc=tc)


def shape_contribution(reward: float) -> float:
    """A shape counts as fully satisfied once its reward clears the
    completion threshold; below that its raw reward is the partial credit."""
    return 1.0 if reward >= SHAPE_COMPLETE_REWARD else max(0.0, min(reward, 1.0))


@dataclass(frozen=True)
class FailureScore:
    """Confusion-matrix scores with *failure* as the positive class."""

    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def accuracy(self) -> float:
        total = self.tp + self.fp + self.fn + self.tn
        return (self.tp + self.tn) / total if total else 0.0


def score_failure_detector(predicted_success, oracle_success) -> FailureScore:
    """Score predicted execution success against oracle task completion."""
    pred = [bool(p) for p in predicted_success]
    orac = [bool(o) for o in oracle_success]
    if len(pred) != len(orac):
        raise ValueError("prediction/oracle length mismatch")
    tp = sum(1 for p, o in zip(pred, orac) if not p and not o)
    fp = sum(1 for p, o in zip(pred, orac) if not p and o)
    fn = sum(1 for p, o in zip(pred, orac) if p and not o)
    tn = sum(1 for p, o in zip(pred, orac) if p and o)
    return FailureScore(tp=tp, fp=fp, fn=fn, tn=tn)
