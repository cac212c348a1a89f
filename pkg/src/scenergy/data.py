"""Procedural positive-example generation for every concept.

A *configuration* is the raw geometry a concept energy consumes:

* binary concepts: a (subject, referent) box pair — centers (2, d) plus frozen
  sizes (2, d), where d is 2, or 3 for the stacking concept;
* shape concepts: a point set (n, 2);
* pose concepts: an oriented point set (n, 3) with rows (x, y, theta).

Every generated positive provably satisfies its concept's predicate, and keeps
enough interior margin that augmentation (global translation plus per-entity
jitter of up to 0.004) can never push it out of the satisfaction region.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ebm import ConceptKind
from .errors import GenerationError
from .metrics import DEFAULT_GEOMETRY, RelationGeometry, _DIRECTIONAL

REJECTION_BUDGET = 1000

#: uniform size ranges per role (w, h share a range; entities are square-ish)
SUBJECT_SIZE = (0.04, 0.09)
INSIDE_SUBJECT_SIZE = (0.04, 0.07)
CONTAINER_SIZE = (0.16, 0.24)
ON3D_REFERENT_SIZE = (0.12, 0.20)
THICKNESS = (0.02, 0.05)

#: interior margin reserved so per-entity jitter cannot break a positive
_JITTER = 0.004
_OFFSET_MARGIN = 0.01

#: arity range for shape datasets
SHAPE_ARITIES = (3, 4, 5, 6)


@dataclass(frozen=True)
class BoxConfig:
    """One binary-concept example: row 0 is the subject, row 1 the referent."""

    centers: np.ndarray  # (2, d)
    sizes: np.ndarray  # (2, d)


def _uniform_size(rng, lo_hi, d=2) -> np.ndarray:
    return rng.uniform(lo_hi[0], lo_hi[1], size=d)


def _center_range(half_size, margin=0.0):
    lo = half_size + margin
    hi = 1.0 - half_size - margin
    return lo, hi


def _gen_directional(kind, geom: RelationGeometry, rng) -> BoxConfig:
    axis, sign = _DIRECTIONAL[kind]
    for _ in range(REJECTION_BUDGET):
        sizes = np.stack([_uniform_size(rng, SUBJECT_SIZE), _uniform_size(rng, SUBJECT_SIZE)])
        offset = rng.uniform(geom.offset_min + _OFFSET_MARGIN, geom.offset_max - _OFFSET_MARGIN)
        across = rng.uniform(-(geom.band - _OFFSET_MARGIN), geom.band - _OFFSET_MARGIN)
        delta = np.zeros(2)
        delta[axis] = sign * offset
        delta[1 - axis] = across
        half_r = sizes[1] / 2.0
        lo, hi = _center_range(half_r, margin=_JITTER)
        referent = rng.uniform(lo, hi)
        subject = referent + delta
        half_s = sizes[0] / 2.0
        if np.all(subject - half_s >= _JITTER) and np.all(subject + half_s <= 1.0 - _JITTER):
            return BoxConfig(centers=np.stack([subject, referent]), sizes=sizes)
    raise GenerationError(f"{kind.value}: no in-workspace placement within budget")


def _gen_inside(geom: RelationGeometry, rng) -> BoxConfig:
    sizes = np.stack(
        [_uniform_size(rng, INSIDE_SUBJECT_SIZE), _uniform_size(rng, CONTAINER_SIZE)]
    )
    half_s, half_r = sizes[0] / 2.0, sizes[1] / 2.0
    slack = half_r - half_s - geom.inside_margin
    if np.any(slack < 0):
        raise GenerationError("inside: container cannot hold subject with margin")
    lo, hi = _center_range(half_r, margin=_JITTER)
    referent = rng.uniform(lo, hi)
    subject = referent + rng.uniform(-slack, slack)
    return BoxConfig(centers=np.stack([subject, referent]), sizes=sizes)


def _gen_on3d(geom: RelationGeometry, rng) -> BoxConfig:
    size_s_xy = _uniform_size(rng, INSIDE_SUBJECT_SIZE)
    size_r_xy = _uniform_size(rng, ON3D_REFERENT_SIZE)
    t_s, t_r = rng.uniform(*THICKNESS), rng.uniform(*THICKNESS)
    half_s, half_r = size_s_xy / 2.0, size_r_xy / 2.0
    slack = half_r - half_s - geom.inside_margin
    if np.any(slack < 0):
        raise GenerationError("on3d: support cannot hold subject with margin")
    lo, hi = _center_range(half_r, margin=_JITTER)
    referent_xy = rng.uniform(lo, hi)
    subject_xy = referent_xy + rng.uniform(-slack, slack)
    # referent sits on the floor; the subject rests exactly on its top face
    centers = np.array(
        [[*subject_xy, t_r + t_s / 2.0], [*referent_xy, t_r / 2.0]]
    )
    sizes = np.array([[*size_s_xy, t_s], [*size_r_xy, t_r]])
    return BoxConfig(centers=centers, sizes=sizes)


def _circle_points(n, geom: RelationGeometry, rng) -> tuple[np.ndarray, np.ndarray]:
    """(points (n,2), outward angles (n,)) of a slightly jittered circle."""
    radius = rng.uniform(*geom.circle_radius)
    margin = radius + 0.05
    center = rng.uniform(margin, 1.0 - margin, size=2)
    angles = rng.uniform(0.0, 2 * math.pi) + 2 * math.pi * np.arange(n) / n
    angles = angles + rng.uniform(-0.15, 0.15, size=n)
    radial = np.clip(rng.normal(0.0, geom.shape_jitter, size=n), -0.012, 0.012)
    r = radius + radial
    points = center + np.column_stack([r * np.cos(angles), r * np.sin(angles)])
    return points, angles


def _gen_circle(n, geom: RelationGeometry, rng) -> np.ndarray:
    return _circle_points(n, geom, rng)[0]


def _gen_line(n, geom: RelationGeometry, rng) -> np.ndarray:
    for _ in range(REJECTION_BUDGET):
        length = rng.uniform(*geom.line_length)
        alpha = rng.uniform(0.0, math.pi)
        direction = np.array([math.cos(alpha), math.sin(alpha)])
        normal = np.array([-direction[1], direction[0]])
        center = rng.uniform(0.05, 0.95, size=2)
        along = np.linspace(-length / 2.0, length / 2.0, n)
        along = along + rng.uniform(-length / (4 * n), length / (4 * n), size=n)
        perp = np.clip(rng.normal(0.0, geom.shape_jitter, size=n), -0.012, 0.012)
        points = center + np.outer(along, direction) + np.outer(perp, normal)
        if points.min() >= 0.02 and points.max() <= 0.98:
            return points
    raise GenerationError("line: no in-workspace placement within budget")


def _gen_pose_circle(n, geom: RelationGeometry, rng) -> np.ndarray:
    points, angles = _circle_points(n, geom, rng)
    theta = angles + rng.uniform(-0.1, 0.1, size=n)
    theta = np.mod(theta + math.pi, 2 * math.pi) - math.pi  # wrap to (-pi, pi]
    theta[theta == -math.pi] = math.pi
    return np.column_stack([points, theta])


def gen_positive(
    kind: ConceptKind,
    n: int = 2,
    geom: RelationGeometry = DEFAULT_GEOMETRY,
    rng: np.random.Generator | None = None,
):
    """One configuration that satisfies ``kind``; see the module docstring."""
    rng = rng or np.random.default_rng(0)
    if kind in _DIRECTIONAL:
        return _gen_directional(kind, geom, rng)
    if kind is ConceptKind.INSIDE:
        return _gen_inside(geom, rng)
    if kind is ConceptKind.ON_3D:
        return _gen_on3d(geom, rng)
    if n < 3:
        raise GenerationError(f"{kind.value}: shape concepts need n >= 3, got {n}")
    if kind is ConceptKind.CIRCLE:
        return _gen_circle(n, geom, rng)
    if kind is ConceptKind.LINE:
        return _gen_line(n, geom, rng)
    if kind is ConceptKind.POSE_CIRCLE:
        return _gen_pose_circle(n, geom, rng)
    raise GenerationError(f"no generator for {kind.value}")


# ---------------------------------------------------------------------------
# augmentation


def _augment_batch(kind: ConceptKind, coords: np.ndarray, sizes, rng) -> np.ndarray:
    """Vectorized translate-plus-jitter over a (B, n, d) coordinate batch.

    Only x and y are touched: the translation is drawn uniformly from the set
    that keeps every box inside the workspace, the per-entity jitter is
    uniform in +/- 0.004. z and theta pass through untouched.
    """
    out = coords.copy()
    xy = out[..., :2]
    if sizes is not None:
        half = sizes[..., :2] / 2.0
        low_corner = (xy - half).min(axis=1)
        high_corner = (xy + half).max(axis=1)
    else:
        low_corner = xy.min(axis=1) - 0.02
        high_corner = xy.max(axis=1) + 0.02
    # reserve the jitter amplitude on both walls so the post-jitter
    # configuration is still contained; 0 is always a feasible translation
    t_lo = np.minimum(_JITTER - low_corner, 0.0)
    t_hi = np.maximum((1.0 - _JITTER) - high_corner, 0.0)
    t = t_lo + rng.uniform(0.0, 1.0, size=t_lo.shape) * (t_hi - t_lo)
    xy += t[:, None, :]
    xy += rng.uniform(-_JITTER, _JITTER, size=xy.shape)
    return out


def augment(
    kind: ConceptKind,
    config,
    geom: RelationGeometry = DEFAULT_GEOMETRY,
    rng: np.random.Generator | None = None,
):
    """Translate a configuration inside the workspace and jitter each entity.

    The returned configuration still satisfies the concept's predicate: the
    generator left at least 0.01 of margin everywhere and the jitter moves any
    entity by at most 0.004 per axis.
    """
    rng = rng or np.random.default_rng(0)
    if isinstance(config, BoxConfig):
        coords = _augment_batch(kind, config.centers[None], config.sizes[None], rng)[0]
        return BoxConfig(centers=coords, sizes=config.sizes.copy())
    return _augment_batch(kind, np.asarray(config)[None], None, rng)[0]


# ---------------------------------------------------------------------------
# datasets


@dataclass
class ConceptDataset:
    """Positives for one concept, stored as dense per-arity arrays."""

    kind: ConceptKind
    coords: dict[int, np.ndarray]  # arity -> (N, n, d)
    sizes: dict[int, np.ndarray] | None  # arity -> (N, n, d) for binary kinds
    seed: int

    @property
    def count(self) -> int:
        return sum(a.shape[0] for a in self.coords.values())

    def arities(self) -> list[int]:
        return sorted(self.coords)

    def sample_batch(
        self, batch: int, rng: np.random.Generator, augmented: bool = True
    ) -> tuple[np.ndarray, np.ndarray | None]:
        """(coords (B, n, d), sizes or None); one arity per batch."""
        n = int(rng.choice(self.arities()))
        pool = self.coords[n]
        idx = rng.integers(0, pool.shape[0], size=batch)
        coords = pool[idx]
        sizes = self.sizes[n][idx] if self.sizes is not None else None
        if augmented:
            coords = _augment_batch(self.kind, coords, sizes, rng)
        return coords, sizes

    def mean_pairwise_offset(self) -> float:
        """Mean |center offset| between subject and referent (binary kinds)."""
        if self.sizes is None:
            raise GenerationError("pairwise offset is only defined for binary concepts")
        (n,) = self.arities()
        pool = self.coords[n]
        deltas = pool[:, 0, :2] - pool[:, 1, :2]
        return float(np.linalg.norm(deltas, axis=1).mean())


def build_dataset(
    kind: ConceptKind,
    count: int,
    geom: RelationGeometry = DEFAULT_GEOMETRY,
    seed: int = 0,
) -> ConceptDataset:
    """``count`` positives; deterministic for a given seed."""
    rng = np.random.default_rng(seed)
    if kind.is_binary:
        configs = [gen_positive(kind, 2, geom, rng) for _ in range(count)]
        coords = np.stack([c.centers for c in configs])
        sizes = np.stack([c.sizes for c in configs])
        return ConceptDataset(
            kind=kind, coords={2: coords}, sizes={2: sizes}, seed=seed
        )
    buckets: dict[int, list[np.ndarray]] = {}
    for _ in range(count):
        n = int(rng.choice(SHAPE_ARITIES))
        buckets.setdefault(n, []).append(gen_positive(kind, n, geom, rng))
    return ConceptDataset(
        kind=kind,
        coords={n: np.stack(v) for n, v in sorted(buckets.items())},
        sizes=None,
        seed=seed,
    )
