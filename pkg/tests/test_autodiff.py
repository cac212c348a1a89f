"""Compute-graph and optimizer tests.

The gradient oracle throughout is central finite differences: for every checked
graph, each partial derivative from ``backprop`` must agree with
(f(x+h) - f(x-h)) / 2h to a relative error of 1e-4.
"""

import numpy as np
import pytest

from scenergy import autodiff as ad
from scenergy.errors import EvaluationError, OptimizerError


def fd_gradient(build, values, index, h=1e-5):
    """Central finite differences of ``build(values).value`` w.r.t. values[index]."""
    base = values[index]
    grad = np.zeros_like(base)
    it = np.nditer(base, flags=["multi_index"])
    while not it.finished:
        i = it.multi_index
        bumped = [v.copy() for v in values]
        bumped[index][i] = base[i] + h
        hi = float(build(bumped).value.sum())
        bumped[index][i] = base[i] - h
        lo = float(build(bumped).value.sum())
        grad[i] = (hi - lo) / (2.0 * h)
        it.iternext()
    return grad


def check_grads(build, values, tol=1e-4):
    """Assert backprop matches the finite-difference oracle for every leaf."""
    leaves = [ad.leaf(v.copy(), name=f"x{i}") for i, v in enumerate(values)]
    root = build(leaves)
    total = root if root.value.size == 1 else ad.sum_axes(root, tuple(range(root.value.ndim)))
    grads = ad.gradients(total, leaves)
    for i in range(len(values)):
        want = fd_gradient(
            lambda vs: (lambda r: r if r.value.size == 1 else ad.sum_axes(r, tuple(range(r.value.ndim))))(
                build([ad.const(v) for v in vs])
            ),
            [v.copy() for v in values],
            i,
        )
        got = grads[i]
        denom = np.maximum(1.0, np.maximum(np.abs(want), np.abs(got)))
        assert np.max(np.abs(got - want) / denom) < tol, f"leaf {i} gradient mismatch"


# ---------------------------------------------------------------------------
# pinned single-op behaviors


def test_affine_identity_weights_is_translation():
    x = ad.leaf(np.array([[1.0, -2.0, 3.0]]))
    w = ad.const(np.eye(3))
    b = ad.const(np.array([10.0, 20.0, 30.0]))
    out = ad.affine(x, w, b)
    assert np.array_equal(out.value, np.array([[11.0, 18.0, 33.0]]))


def test_square_then_sum():
    x = ad.leaf(np.array([3.0]))
    assert ad.sum_axes(ad.square(x), (0,)).item() == 9.0


def test_softmax_of_zeros_is_uniform():
    out = ad.softmax(ad.leaf(np.array([0.0, 0.0])))
    assert np.allclose(out.value, [0.5, 0.5], atol=0, rtol=0)


def test_simple_quadratic_gradient():
    x = ad.leaf(np.array(3.0))
    grad = ad.gradients(ad.square(x), [x])[0]
    assert grad == pytest.approx(6.0)


def test_stop_gradient_blocks_one_path():
    # d/dx [stop(x) * x] = stop(x) = x evaluated at 2
    x = ad.leaf(np.array(2.0))
    root = ad.mul(ad.stop_gradient(x), x)
    assert ad.gradients(root, [x])[0] == pytest.approx(2.0)


def test_stop_gradient_alone_gives_zero():
    x = ad.leaf(np.array([1.0, 2.0]))
    root = ad.sum_axes(ad.square(ad.stop_gradient(x)), (0,))
    assert np.array_equal(ad.gradients(root, [x])[0], np.zeros(2))


def test_shape_mismatch_raises_and_names_node():
    a = ad.leaf(np.zeros((2, 3)), name="lhs")
    b = ad.leaf(np.zeros((4, 5)), name="rhs")
    with pytest.raises(EvaluationError, match="matmul"):
        ad.matmul(a, b)
    with pytest.raises(EvaluationError, match="lhs"):
        ad.matmul(a, b)


def test_backprop_requires_scalar_root():
    x = ad.leaf(np.zeros((2, 2)))
    with pytest.raises(EvaluationError, match="scalar"):
        ad.backprop(ad.square(x), [x])


def test_evaluation_is_deterministic():
    rng = np.random.default_rng(7)
    xv, wv = rng.normal(size=(4, 5)), rng.normal(size=(5, 3))

    def run():
        x, w = ad.leaf(xv.copy()), ad.leaf(wv.copy())
        out = ad.softmax(ad.relu(ad.matmul(x, w)))
        g = ad.gradients(ad.sum_axes(out, (0, 1)), [x, w])
        return out.value, g[0], g[1]

    first, second = run(), run()
    for a, b in zip(first, second):
        assert np.array_equal(a, b)


def test_unreachable_leaf_gets_zero_gradient():
    x = ad.leaf(np.array(1.5))
    y = ad.leaf(np.array(2.5))
    root = ad.square(x)
    assert ad.gradients(root, [y])[0] == pytest.approx(0.0)


# ---------------------------------------------------------------------------
# finite-difference property sweep over every supported op

CASES = {
    "add": (lambda L: ad.add(L[0], L[1]), [(3, 4), (3, 4)]),
    "add-broadcast": (lambda L: ad.add(L[0], L[1]), [(3, 4), (4,)]),
    "sub": (lambda L: ad.sub(L[0], L[1]), [(2, 5), (2, 5)]),
    "mul": (lambda L: ad.mul(L[0], L[1]), [(4, 2), (4, 2)]),
    "mul-broadcast": (lambda L: ad.mul(L[0], L[1]), [(2, 3, 4), (3, 4)]),
    "square": (lambda L: ad.square(L[0]), [(6,)]),
    "relu": (lambda L: ad.relu(L[0]), [(5, 5)]),
    "softplus": (lambda L: ad.softplus(L[0]), [(4, 3)]),
    "exp": (lambda L: ad.exp(L[0]), [(3, 3)]),
    "sin": (lambda L: ad.sin(L[0]), [(4,)]),
    "cos": (lambda L: ad.cos(L[0]), [(4,)]),
    "softmax": (lambda L: ad.mul(ad.softmax(L[0]), L[1]), [(3, 5), (3, 5)]),
    "matmul": (lambda L: ad.matmul(L[0], L[1]), [(3, 4), (4, 2)]),
    "matmul-batched": (lambda L: ad.matmul(L[0], L[1]), [(2, 3, 4), (4, 5)]),
    "matmul-bothbatched": (lambda L: ad.matmul(L[0], L[1]), [(2, 3, 4), (2, 4, 5)]),
    "affine": (lambda L: ad.affine(L[0], L[1], L[2]), [(5, 3), (3, 4), (4,)]),
    "sum": (lambda L: ad.sum_axes(L[0], (1,)), [(3, 4)]),
    "sum-keepdims": (lambda L: ad.sum_axes(L[0], (0,), keepdims=True), [(3, 4)]),
    "mean": (lambda L: ad.mean_axes(L[0], (1,)), [(2, 6)]),
    "concat": (lambda L: ad.concat([L[0], L[1]], axis=-1), [(3, 2), (3, 4)]),
    "slice": (lambda L: ad.slice_axis(L[0], 1, 3, axis=-1), [(2, 5)]),
    "pad": (lambda L: ad.pad_axis(L[0], 2, 7, axis=-1), [(3, 2)]),
    "transpose": (lambda L: ad.matmul(L[0], ad.transpose_last(L[1])), [(2, 3), (4, 3)]),
    "broadcast": (lambda L: ad.square(ad.broadcast_to(L[0], (4, 3))), [(1, 3)]),
    "reshape": (lambda L: ad.square(ad.reshape(L[0], (2, 6))), [(3, 4)]),
    "take": (lambda L: ad.square(ad.take(L[0], [0, 2, 2], axis=0)), [(4, 3)]),
    "take-axis1": (lambda L: ad.square(ad.take(L[0], [1, 1], axis=1)), [(2, 3, 2)]),
    "put": (lambda L: ad.square(ad.put(L[0], [0, 3, 3], (5, 2), axis=0)), [(3, 2)]),
}


@pytest.mark.parametrize("name", sorted(CASES))
def test_op_gradients_match_finite_differences(name):
    build, shapes = CASES[name]
    rng = np.random.default_rng(abs(hash(name)) % (2**32))
    values = [rng.uniform(-1.5, 1.5, size=s) for s in shapes]
    check_grads(build, values)


def test_random_composite_graphs_match_finite_differences():
    """Multi-op graphs mixing the primitives, 30 seeded draws."""

    def build(L):
        h = ad.relu(ad.affine(L[0], L[1], L[2]))
        h = ad.softmax(ad.matmul(h, ad.transpose_last(h)))
        s = ad.concat([ad.sin(L[3]), ad.cos(L[3]), ad.softplus(L[3])], axis=-1)
        mixed = ad.matmul(h, ad.broadcast_to(ad.mean_axes(s, (0,), keepdims=True), (4, 6)))
        return ad.mean_axes(ad.square(mixed), (0, 1))

    shapes = [(4, 3), (3, 4), (4,), (4, 2)]
    for seed in range(30):
        rng = np.random.default_rng(1000 + seed)
        values = [rng.uniform(-1.2, 1.2, size=s) for s in shapes]
        check_grads(build, values)


# ---------------------------------------------------------------------------
# second-order gradients (the KL-style double-backprop path)


def test_second_order_gradient_of_cube():
    x = ad.leaf(np.array(1.7))
    first = ad.backprop(ad.mul(ad.square(x), x), [x])[x]  # 3x^2
    second = ad.gradients(first, [x])[0]  # 6x
    assert first.item() == pytest.approx(3 * 1.7**2, rel=1e-12)
    assert second == pytest.approx(6 * 1.7, rel=1e-12)


def test_mixed_second_order_through_inner_gradient():
    """d/dtheta of E_frozen(x - lam * dE/dx) flows through the inner gradient.

    E(theta, x) = theta * x^2, so dE/dx = 2 theta x, y = x - lam * 2 theta x,
    L = theta_stop * y^2, dL/dtheta = theta_stop * 2 y * (-2 lam x).
    """
    theta_v, x_v, lam = 0.7, 1.3, 0.05
    theta = ad.leaf(np.array(theta_v))
    x = ad.leaf(np.array(x_v))
    inner = ad.mul(theta, ad.square(x))
    gx = ad.backprop(inner, [x])[x]
    y = ad.sub(x, ad.mul(ad.const(lam), gx))
    loss = ad.mul(ad.stop_gradient(theta), ad.square(y))
    got = ad.gradients(loss, [theta])[0]
    y_v = x_v - lam * 2 * theta_v * x_v
    want = theta_v * 2 * y_v * (-2 * lam * x_v)
    assert got == pytest.approx(want, rel=1e-12)


# ---------------------------------------------------------------------------
# Adam


def test_adam_first_step_delta_is_minus_lr():
    params = {"w": np.array([10.0])}
    grads = {"w": np.array([2.0])}
    new, state = ad.adam_step(params, grads, ad.AdamState(), lr=1e-4)
    assert new["w"][0] == pytest.approx(10.0 - 1e-4, abs=1e-9)
    assert state.step == 1


def test_adam_zero_gradient_keeps_params():
    params = {"w": np.array([1.0, -2.0])}
    new, state = ad.adam_step(params, {"w": np.zeros(2)}, ad.AdamState(), lr=0.1)
    assert np.array_equal(new["w"], params["w"])
    assert state.step == 1


def test_adam_converges_on_shifted_quadratic():
    # Oracle: an independent scalar Adam loop gives |x - 5| = 1.0953992536e-4
    # after 200 steps at lr 0.1 from x0 = 0.
    params = {"x": np.array(0.0)}
    state = ad.AdamState()
    for _ in range(200):
        grads = {"x": 2.0 * (params["x"] - 5.0)}
        params, state = ad.adam_step(params, grads, state, lr=0.1)
    assert abs(params["x"] - 5.0) < 0.1
    assert abs(params["x"] - 5.0) == pytest.approx(1.0953992535878143e-4, abs=1e-9)


def test_adam_rejects_non_finite_gradient():
    with pytest.raises(OptimizerError, match="non-finite"):
        ad.adam_step({"w": np.ones(2)}, {"w": np.array([1.0, np.nan])}, ad.AdamState(), lr=0.1)


def test_adam_rejects_key_mismatch():
    with pytest.raises(OptimizerError, match="mismatch"):
        ad.adam_step({"w": np.ones(2)}, {"q": np.ones(2)}, ad.AdamState(), lr=0.1)


def test_adam_is_functional():
    params = {"w": np.array([1.0])}
    state = ad.AdamState()
    ad.adam_step(params, {"w": np.array([3.0])}, state, lr=0.1)
    assert params["w"][0] == 1.0 and state.step == 0
