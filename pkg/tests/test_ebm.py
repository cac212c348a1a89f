"""Concept-energy architecture tests: exact features, invariances, gradients."""

import math

import numpy as np
import pytest

from scenergy import autodiff as ad
from scenergy import ebm
from scenergy.ebm import ConceptKind
from scenergy.errors import EvaluationError
from scenergy.scene import Box, box_from_center


def test_binary_features_reference_vector():
    a = box_from_center((0.3, 0.3), (0.2, 0.2))
    b = box_from_center((0.6, 0.3), (0.2, 0.2))
    got = ebm.binary_features(a, b)
    want = [-0.3, 0.0, -0.5, -0.2, -0.1, 0.2, -0.3, 0.0]
    assert got == pytest.approx(want, abs=1e-12)


def test_binary3d_features_are_twelve_dimensional():
    f = ebm.binary3d_features([0, 0, 0], [1, 1, 1], [2, 2, 0], [3, 3, 1])
    assert f.shape == (12,)
    assert f[:3] == pytest.approx([-2.0, -2.0, 0.0])


# ---------------------------------------------------------------------------
# initialization


def test_init_is_deterministic_and_seed_sensitive():
    p1 = ebm.init_params(ConceptKind.LEFT_OF, seed=3)
    p2 = ebm.init_params(ConceptKind.LEFT_OF, seed=3)
    p3 = ebm.init_params(ConceptKind.LEFT_OF, seed=4)
    for k in p1.weights:
        assert np.array_equal(p1.weights[k], p2.weights[k])
    assert any(not np.array_equal(p1.weights[k], p3.weights[k]) for k in p1.weights)


def test_init_respects_glorot_bounds_and_zero_biases():
    for kind in (ConceptKind.BEHIND, ConceptKind.CIRCLE, ConceptKind.POSE_CIRCLE):
        params = ebm.init_params(kind, seed=0)
        for name, shape in ebm.param_shapes(kind):
            w = params.weights[name]
            assert w.shape == shape
            if name.endswith(".b"):
                assert np.all(w == 0.0)
            else:
                limit = math.sqrt(6.0 / (shape[0] + shape[1]))
                assert np.all(np.abs(w) < limit)


def test_param_shapes_match_architecture():
    names = [n for n, _ in ebm.param_shapes(ConceptKind.CIRCLE)]
    assert names[0] == "feat.0.w" and names[-1] == "head.1.b"
    assert sum(n.startswith("attn.") for n in names) == 16
    assert all(not n.startswith("attn.") for n, _ in ebm.param_shapes(ConceptKind.INSIDE))
    assert dict(ebm.param_shapes(ConceptKind.ON_3D))["feat.0.w"] == (12, ebm.HIDDEN)
    assert dict(ebm.param_shapes(ConceptKind.POSE_CIRCLE))["feat.0.w"] == (4, ebm.HIDDEN)


def test_validate_rejects_wrong_layer_table():
    params = ebm.init_params(ConceptKind.LEFT_OF, seed=0)
    bad = ebm.EBMParams(ConceptKind.LEFT_OF, {**params.weights, "extra": np.zeros(3)})
    with pytest.raises(EvaluationError, match="layer table"):
        bad.validate()
    params.validate()


# ---------------------------------------------------------------------------
# invariances (random params; trained params are exercised in acceptance)


def test_binary_energy_translation_invariant():
    params = ebm.init_params(ConceptKind.LEFT_OF, seed=1)
    rng = np.random.default_rng(5)
    for _ in range(200):
        a = box_from_center(rng.uniform(0.2, 0.8, 2), rng.uniform(0.03, 0.2, 2))
        b = box_from_center(rng.uniform(0.2, 0.8, 2), rng.uniform(0.03, 0.2, 2))
        t = rng.uniform(-0.15, 0.15, 2)
        at = box_from_center(np.array(a.center) + t, a.size)
        bt = box_from_center(np.array(b.center) + t, b.size)
        assert abs(ebm.binary_energy(params, a, b) - ebm.binary_energy(params, at, bt)) < 1e-9


def test_multiary_energy_permutation_and_translation_invariant():
    params = ebm.init_params(ConceptKind.CIRCLE, seed=2)
    rng = np.random.default_rng(6)
    for _ in range(60):
        n = int(rng.integers(3, 8))
        pts = rng.uniform(0.1, 0.9, (n, 2))
        base = ebm.multiary_energy(params, pts)
        assert abs(ebm.multiary_energy(params, pts[rng.permutation(n)]) - base) < 1e-9
        assert abs(ebm.multiary_energy(params, pts + rng.uniform(-0.2, 0.2, 2)) - base) < 1e-9


def test_pose_energy_invariances():
    params = ebm.init_params(ConceptKind.POSE_CIRCLE, seed=3)
    rng = np.random.default_rng(7)
    for _ in range(60):
        n = int(rng.integers(3, 7))
        poses = np.column_stack(
            [rng.uniform(0.1, 0.9, (n, 2)), rng.uniform(-math.pi, math.pi, n)]
        )
        base = ebm.pose_energy(params, poses)
        shifted = poses.copy()
        shifted[:, 2] += 2.0 * math.pi
        assert abs(ebm.pose_energy(params, shifted) - base) < 1e-9
        translated = poses.copy()
        translated[:, :2] += rng.uniform(-0.2, 0.2, 2)
        assert abs(ebm.pose_energy(params, translated) - base) < 1e-9
        assert abs(ebm.pose_energy(params, poses[rng.permutation(n)]) - base) < 1e-9


def test_energies_are_finite_scalars():
    rng = np.random.default_rng(8)
    for kind in ConceptKind:
        params = ebm.init_params(kind, seed=9)
        if kind.is_binary:
            d = 3 if kind.is_3d else 2
            coords = rng.uniform(0, 1, (4, 2, d))
            sizes = rng.uniform(0.02, 0.2, (4, 2, d))
            e = ebm.energy_batch(params, coords, sizes)
        elif kind.is_pose:
            e = ebm.energy_batch(params, rng.uniform(0, 1, (4, 5, 3)))
        else:
            e = ebm.energy_batch(params, rng.uniform(0, 1, (4, 5, 2)))
        assert e.shape == (4,) and np.all(np.isfinite(e))


def test_batch_energy_matches_scalar_api():
    params = ebm.init_params(ConceptKind.RIGHT_OF, seed=4)
    rng = np.random.default_rng(9)
    centers = rng.uniform(0.2, 0.8, (5, 2, 2))
    sizes = rng.uniform(0.04, 0.15, (5, 2, 2))
    batch = ebm.energy_batch(params, centers, sizes)
    for i in range(5):
        a = box_from_center(centers[i, 0], sizes[i, 0])
        b = box_from_center(centers[i, 1], sizes[i, 1])
        assert batch[i] == pytest.approx(ebm.binary_energy(params, a, b), rel=1e-12)


# ---------------------------------------------------------------------------
# gradients vs central finite differences


def _fd_coord_grad(f, x, h=1e-6):
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    while not it.finished:
        i = it.multi_index
        hi, lo = x.copy(), x.copy()
        hi[i] += h
        lo[i] -= h
        g[i] = (f(hi) - f(lo)) / (2 * h)
        it.iternext()
    return g


@pytest.mark.parametrize("kind", [ConceptKind.LEFT_OF, ConceptKind.ON_3D,
                                  ConceptKind.CIRCLE, ConceptKind.POSE_CIRCLE])
def test_coordinate_gradients_match_finite_differences(kind):
    params = ebm.init_params(kind, seed=10)
    rng = np.random.default_rng(17)
    if kind.is_binary:
        d = 3 if kind.is_3d else 2
        coords = rng.uniform(0.2, 0.8, (2, 2, d))
        sizes = rng.uniform(0.04, 0.2, (2, 2, d))
    else:
        d = 3 if kind.is_pose else 2
        coords = rng.uniform(0.2, 0.8, (2, 4, d))
        sizes = None
    _, got = ebm.coords_grad(params, coords, sizes)
    want = _fd_coord_grad(lambda c: ebm.energy_batch(params, c, sizes).sum(), coords)
    denom = np.maximum(1.0, np.maximum(np.abs(want), np.abs(got)))
    assert np.max(np.abs(got - want) / denom) < 1e-4


@pytest.mark.parametrize("kind", [ConceptKind.LEFT_OF, ConceptKind.CIRCLE])
def test_parameter_gradients_match_finite_differences(kind):
    params = ebm.init_params(kind, seed=11)
    rng = np.random.default_rng(23)
    if kind.is_binary:
        coords = rng.uniform(0.2, 0.8, (3, 2, 2))
        sizes = rng.uniform(0.04, 0.2, (3, 2, 2))
    else:
        coords, sizes = rng.uniform(0.2, 0.8, (3, 4, 2)), None

    leaves = ebm.param_leaves(params)
    total = ad.sum_axes(ebm.energy_graph(leaves, kind, ad.const(coords), sizes), (0,))
    table = ad.backprop(total, list(leaves.values()))
    h = 1e-6
    checked = 0
    for name in ("feat.0.w", "head.1.w", "attn.0.q" if kind.is_multiary else "feat.1.w"):
        got = table[leaves[name]].value
        flat_idx = rng.choice(got.size, size=min(12, got.size), replace=False)
        for fi in flat_idx:
            idx = np.unravel_index(fi, got.shape)
            bump = {k: v.copy() for k, v in params.weights.items()}
            bump[name][idx] += h
            hi = ebm.energy_batch(ebm.EBMParams(kind, bump), coords, sizes).sum()
            bump[name][idx] -= 2 * h
            lo = ebm.energy_batch(ebm.EBMParams(kind, bump), coords, sizes).sum()
            want = (hi - lo) / (2 * h)
            assert abs(got[idx] - want) / max(1.0, abs(want), abs(got[idx])) < 1e-4
            checked += 1
    assert checked >= 24


def test_binary_energy_requires_sizes():
    params = ebm.init_params(ConceptKind.LEFT_OF, seed=0)
    with pytest.raises(EvaluationError, match="sizes"):
        ebm.energy_graph(ebm.param_leaves(params), ConceptKind.LEFT_OF, ad.const(np.zeros((1, 2, 2))))


def test_multiary_rejects_fewer_than_three_points():
    params = ebm.init_params(ConceptKind.CIRCLE, seed=0)
    with pytest.raises(EvaluationError, match="at least 3"):
        ebm.multiary_energy(params, np.zeros((2, 2)))
