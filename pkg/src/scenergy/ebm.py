"""Concept energy networks over boxes, point sets, and oriented points.

Each spatial concept is a small scalar-valued network: low energy means "the
configuration satisfies the concept". Three trunk variants share one design:

* binary concepts (LeftOf, ..., Inside, On3D): the two boxes are reduced to the
  differences between all cross-object corner pairs (8 numbers in 2D, 12 in 3D),
  so the energy is translation invariant by construction;
* multi-ary shape concepts (Circle, Line): the member boxes enter as centroid-
  centered center points, run through a per-point MLP and four single-head
  scaled-dot-product attention blocks with residual connections (no layer
  norm), and are mean-pooled, so the energy is permutation invariant;
* pose concepts (PoseCircle): like multi-ary, but each point carries an
  orientation encoded as (sin theta, cos theta) next to its centered position.

All hidden layers are 128 wide with rectifier activations. Weights initialize
uniform in +/- sqrt(6 / (fan_in + fan_out)); biases start at zero.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import EvaluationError
from .scene import Box

HIDDEN = 128
ATTENTION_BLOCKS = 4


class ConceptKind(enum.Enum):
    LEFT_OF = "leftof"
    RIGHT_OF = "rightof"
    IN_FRONT_OF = "infrontof"
    BEHIND = "behind"
    INSIDE = "inside"
    ON_3D = "on3d"
    CIRCLE = "circle"
    LINE = "line"
    POSE_CIRCLE = "posecircle"

    @property
    def is_binary(self) -> bool:
        return self in _BINARY_KINDS

    @property
    def is_3d(self) -> bool:
        return self is ConceptKind.ON_3D

    @property
    def is_multiary(self) -> bool:
        return self in (ConceptKind.CIRCLE, ConceptKind.LINE, ConceptKind.POSE_CIRCLE)

    @property
    def is_pose(self) -> bool:
        return self is ConceptKind.POSE_CIRCLE

    @property
    def input_dim(self) -> int:
        if self is ConceptKind.ON_3D:
            return 12  # 4 cross-corner differences of 3-vectors
        if self.is_pose:
            return 4  # (x - cx, y - cy, sin theta, cos theta)
        if self.is_multiary:
            return 2  # centered center point
        return 8  # 4 cross-corner differences of 2-vectors

    @property
    def coord_dim(self) -> int:
        """Per-entity differentiable coordinates."""
        if self is ConceptKind.ON_3D or self.is_pose:
            return 3
        return 2


_BINARY_KINDS = (
    ConceptKind.LEFT_OF,
    ConceptKind.RIGHT_OF,
    ConceptKind.IN_FRONT_OF,
    ConceptKind.BEHIND,
    ConceptKind.INSIDE,
    ConceptKind.ON_3D,
)

@dataclass(frozen=True)
class EBMParams:
    """Weights of one concept network, keyed by canonical layer names."""

    kind: ConceptKind
    weights: dict[str, np.ndarray]

    def validate(self) -> None:
        expected = dict(param_shapes(self.kind))
        got = {k: v.shape for k, v in self.weights.items()}
        if got != expected:
            missing = sorted(set(expected) ^ set(got))
            raise EvaluationError(
                f"params for {self.kind.value}: layer table mismatch ({missing or 'shapes'})"
            )


def param_shapes(kind: ConceptKind) -> list[tuple[str, tuple[int, ...]]]:
    """Canonical (name, shape) list; the order fixes serialization layout."""
    din = kind.input_dim
    shapes: list[tuple[str, tuple[int, ...]]] = [
        ("feat.0.w", (din, HIDDEN)),
        ("feat.0.b", (HIDDEN,)),
        ("feat.1.w", (HIDDEN, HIDDEN)),
        ("feat.1.b", (HIDDEN,)),
    ]
    if kind.is_multiary:
        for i in range(ATTENTION_BLOCKS):
            for proj in ("q", "k", "v", "o"):
                shapes.append((f"attn.{i}.{proj}", (HIDDEN, HIDDEN)))
    shapes += [
        ("head.0.w", (HIDDEN, HIDDEN)),
        ("head.0.b", (HIDDEN,)),
        ("head.1.w", (HIDDEN, 1)),
        ("head.1.b", (1,)),
    ]
    return shapes


def init_params(kind: ConceptKind, seed: int = 0) -> EBMParams:
    """Deterministic Glorot-uniform weights, zero biases."""
    rng = np.random.default_rng(seed)
    weights: dict[str, np.ndarray] = {}
    for name, shape in param_shapes(kind):
        if name.endswith(".b"):
            weights[name] = np.zeros(shape)
        else:
            fan_in, fan_out = shape[0], shape[1]
            limit = math.sqrt(6.0 / (fan_in + fan_out))
            weights[name] = rng.uniform(-limit, limit, size=shape)
    return EBMParams(kind=kind, weights=weights)


def param_leaves(params: EBMParams) -> dict[str, ad.Node]:
    return {k: ad.leaf(v, name=k) for k, v in params.weights.items()}


# ---------------------------------------------------------------------------
# graph builders (shared by training, sampling, and planning)


def _mlp_head(w: dict[str, ad.Node], h: ad.Node) -> ad.Node:
    h = ad.relu(ad.affine(h, w["head.0.w"], w["head.0.b"]))
    return ad.affine(h, w["head.1.w"], w["head.1.b"])


def _featurizer(w: dict[str, ad.Node], x: ad.Node) -> ad.Node:
    h = ad.relu(ad.affine(x, w["feat.0.w"], w["feat.0.b"]))
    return ad.relu(ad.affine(h, w["feat.1.w"], w["feat.1.b"]))


def _corner_difference_features(centers: ad.Node, sizes: np.ndarray) -> ad.Node:
    """(B, 2, d) centers + frozen sizes -> (B, 4d) cross-corner differences.

    Order: [a_min-b_min, a_min-b_max, a_max-b_min, a_max-b_max].
    """
    b, two, d = centers.value.shape
    if two != 2 or sizes.shape != (b, 2, d):
        raise EvaluationError(
            f"binary features: expected centers (B,2,{d}) with matching sizes, "
            f"got {centers.value.shape} / {sizes.shape}"
        )
    half = sizes / 2.0
    ca = ad.reshape(ad.slice_axis(centers, 0, 1, axis=1), (b, d))
    cb = ad.reshape(ad.slice_axis(centers, 1, 2, axis=1), (b, d))
    a_min = ad.sub(ca, ad.const(half[:, 0, :], name="half-a"))
    a_max = ad.add(ca, ad.const(half[:, 0, :], name="half-a"))
    b_min = ad.sub(cb, ad.const(half[:, 1, :], name="half-b"))
    b_max = ad.add(cb, ad.const(half[:, 1, :], name="half-b"))
    return ad.concat(
        [ad.sub(a_min, b_min), ad.sub(a_min, b_max), ad.sub(a_max, b_min), ad.sub(a_max, b_max)],
        axis=-1,
    )


def binary_energy_graph(
    w: dict[str, ad.Node], centers: ad.Node, sizes: np.ndarray
) -> ad.Node:
    """Energies (B,) of box pairs given centers (B, 2, d) and frozen sizes."""
    feats = _corner_difference_features(centers, sizes)
    out = _mlp_head(w, _featurizer(w, feats))
    return ad.reshape(out, (out.value.shape[0],))


def _attention_trunk(w: dict[str, ad.Node], x: ad.Node) -> ad.Node:
    """(B, n, din) -> (B,) through featurizer, attention blocks, mean pool, head."""
    b, n, _ = x.value.shape
    h = _featurizer(w, x)
    scale = ad.const(1.0 / math.sqrt(HIDDEN), name="1/sqrt(d)")
    for i in range(ATTENTION_BLOCKS):
        q = ad.matmul(h, w[f"attn.{i}.q"])
        k = ad.matmul(h, w[f"attn.{i}.k"])
        v = ad.matmul(h, w[f"attn.{i}.v"])
        att = ad.softmax(ad.mul(ad.matmul(q, ad.transpose_last(k)), scale))
        h = ad.add(h, ad.matmul(ad.matmul(att, v), w[f"attn.{i}.o"]))
    pooled = ad.mean_axes(h, (1,))
    out = _mlp_head(w, pooled)
    return ad.reshape(out, (b,))


def multiary_energy_graph(w: dict[str, ad.Node], points: ad.Node) -> ad.Node:
    """Energies (B,) of point sets (B, n, 2); centroid-centered inside."""
    if points.value.ndim != 3 or points.value.shape[-1] != 2:
        raise EvaluationError(f"multiary energy: expected (B, n, 2), got {points.value.shape}")
    if points.value.shape[1] < 3:
        raise EvaluationError("multiary energy: needs at least 3 points")
    centered = ad.sub(points, ad.mean_axes(points, (1,), keepdims=True))
    return _attention_trunk(w, centered)


def pose_energy_graph(w: dict[str, ad.Node], poses: ad.Node) -> ad.Node:
    """Energies (B,) of oriented point sets (B, n, 3) with rows (x, y, theta)."""
    if poses.value.ndim != 3 or poses.value.shape[-1] != 3:
        raise EvaluationError(f"pose energy: expected (B, n, 3), got {poses.value.shape}")
    if poses.value.shape[1] < 3:
        raise EvaluationError("pose energy: needs at least 3 points")
    xy = ad.slice_axis(poses, 0, 2, axis=-1)
    th = ad.slice_axis(poses, 2, 3, axis=-1)
    centered = ad.sub(xy, ad.mean_axes(xy, (1,), keepdims=True))
    x = ad.concat([centered, ad.sin(th), ad.cos(th)], axis=-1)
    return _attention_trunk(w, x)


def energy_graph(
    w: dict[str, ad.Node],
    kind: ConceptKind,
    coords: ad.Node,
    sizes: np.ndarray | None = None,
) -> ad.Node:
    """Dispatch to the architecture for ``kind``; coords carry the gradient."""
    if kind.is_binary:
        if sizes is None:
            raise EvaluationError(f"{kind.value}: binary energies need frozen sizes")
        return binary_energy_graph(w, coords, sizes)
    if kind.is_pose:
        return pose_energy_graph(w, coords)
    return multiary_energy_graph(w, coords)


# ---------------------------------------------------------------------------
# plain-array conveniences


def energy_batch(
    params: EBMParams, coords: np.ndarray, sizes: np.ndarray | None = None
) -> np.ndarray:
    """Energies (B,) without gradient tracking."""
    w = {k: ad.const(v, name=k) for k, v in params.weights.items()}
    return energy_graph(w, params.kind, ad.const(coords), sizes).value


def coords_grad(
    params: EBMParams, coords: np.ndarray, sizes: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """(energies (B,), d sum(E) / d coords) for frozen parameters."""
    w = {k: ad.const(v, name=k) for k, v in params.weights.items()}
    x = ad.leaf(np.asarray(coords, dtype=np.float64), name="coords")
    e = energy_graph(w, params.kind, x, sizes)
    total = ad.sum_axes(e, (0,))
    grad = ad.backprop(total, [x])[x].value
    return e.value, grad


def binary_features(a: Box, b: Box) -> np.ndarray:
    """Cross-corner difference vector (8,) for two 2D boxes."""
    out = []
    for pa in (a.tl, a.br):
        for pb in (b.tl, b.br):
            out.extend((pa[0] - pb[0], pa[1] - pb[1]))
    return np.array(out)


def binary3d_features(a_min, a_max, b_min, b_max) -> np.ndarray:
    """Cross-corner difference vector (12,) for two 3D boxes."""
    a_min, a_max = np.asarray(a_min, float), np.asarray(a_max, float)
    b_min, b_max = np.asarray(b_min, float), np.asarray(b_max, float)
    return np.concatenate([a_min - b_min, a_min - b_max, a_max - b_min, a_max - b_max])


def binary_energy(params: EBMParams, a: Box, b: Box) -> float:
    """Scalar energy of one 2D box pair."""
    centers = np.array([[a.center, b.center]])
    sizes = np.array([[a.size, b.size]])
    return float(energy_batch(params, centers, sizes)[0])


def binary3d_energy(params: EBMParams, a: tuple, b: tuple) -> float:
    """Scalar energy of one 3D box pair given (min_corner, max_corner) each."""
    a_min, a_max = (np.asarray(v, float) for v in a)
    b_min, b_max = (np.asarray(v, float) for v in b)
    centers = np.array([[(a_min + a_max) / 2.0, (b_min + b_max) / 2.0]])
    sizes = np.array([[a_max - a_min, b_max - b_min]])
    return float(energy_batch(params, centers, sizes)[0])


def multiary_energy(params: EBMParams, points: np.ndarray) -> float:
    """Scalar energy of one point set (n, 2)."""
    return float(energy_batch(params, np.asarray(points, float)[None])[0])


def pose_energy(params: EBMParams, poses: np.ndarray) -> float:
    """Scalar energy of one oriented point set (n, 3)."""
    return float(energy_batch(params, np.asarray(poses, float)[None])[0])


class ConceptEnergy:
    """Sampler-protocol adapter: one trained concept over one configuration.

    ``value_and_grad(x)`` takes a single configuration (n, d) and returns the
    scalar energy and its gradient, which is what the sampler consumes.
    """

    def __init__(self, params: EBMParams, sizes: np.ndarray | None = None):
        if params.kind.is_binary and sizes is None:
            raise EvaluationError(f"{params.kind.value}: binary energies need frozen sizes")
        self.params = params
        self.sizes = None if sizes is None else np.asarray(sizes, dtype=np.float64)

    def value_and_grad(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        sizes = None if self.sizes is None else self.sizes[None]
        energies, grad = coords_grad(self.params, np.asarray(x, float)[None], sizes)
        return float(energies[0]), grad[0]
