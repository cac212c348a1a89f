"""
Reverse-mode autodiff on plain numpy arrays
===========================================

The whole library differentiates through one small graph engine: every
operation builds a node that knows its inputs and its local vector-Jacobian
product, and ``backprop`` walks the graph once in reverse topological order.
This script builds a few graphs by hand and checks the gradients against
central finite differences.
"""

import numpy as np

import scenergy.autodiff as ad

# ---------------------------------------------------------------------------
# 1. a scalar graph: f(x) = sum((x - 2)^2) has gradient 2 (x - 2)

x = ad.leaf(np.array([1.0, 3.0, -0.5]), name="x")
f = ad.sum_axes(ad.square(ad.sub(x, ad.const(np.float64(2.0)))), (0,))
grads = ad.backprop(f, [x])

print("f(x)      =", f.value)
print("df/dx     =", grads[x].value)
print("analytic  =", 2.0 * (x.value - 2.0))

# ---------------------------------------------------------------------------
# 2. matrix ops compose the same way: a tiny softplus layer

rng = np.random.default_rng(0)
w = ad.leaf(rng.normal(0.0, 0.3, (4, 3)), name="w")
inp = ad.const(rng.uniform(-1.0, 1.0, (5, 3)))
hidden = ad.softplus(ad.matmul(inp, ad.transpose_last(w)))
loss = ad.sum_axes(ad.square(hidden), (0, 1))
grad_w = ad.backprop(loss, [w])[w].value
print("\nsoftplus-layer loss:", float(loss.value))

# central finite differences as the oracle
h = 1e-6
fd = np.zeros_like(w.value)
for i in range(w.value.shape[0]):
    for j in range(w.value.shape[1]):
        for sign in (+1.0, -1.0):
            bumped = w.value.copy()
            bumped[i, j] += sign * h
            hb = np.logaddexp(0.0, inp.value @ bumped.T)
            fd[i, j] += sign * float((hb**2).sum()) / (2.0 * h)

print("max |autodiff - finite difference| =", np.abs(grad_w - fd).max())

# ---------------------------------------------------------------------------
# 3. softmax attention and pooling, gradients still exact

q = ad.leaf(rng.normal(0.0, 0.5, (6, 8)), name="q")
attn = ad.softmax(ad.matmul(q, ad.transpose_last(q)))
pooled = ad.mean_axes(ad.matmul(attn, q), (0,))
out = ad.sum_axes(ad.square(pooled), (0,))
gq = ad.backprop(out, [q])[q].value


def forward(qv):
    logits = qv @ qv.T
    p = np.exp(logits - logits.max(axis=-1, keepdims=True))
    p /= p.sum(axis=-1, keepdims=True)
    return float((((p @ qv).mean(axis=0)) ** 2).sum())


up, down = q.value.copy(), q.value.copy()
up[2, 3] += h
down[2, 3] -= h
fd_entry = (forward(up) - forward(down)) / (2.0 * h)
print("\nattention graph entry (2,3): autodiff", gq[2, 3], "fd", fd_entry)
