"""Contrastive-divergence training of one concept energy with a replay buffer.

Each step draws a batch of augmented positives, initializes negative chains
from the replay buffer (70%) or from clean dataset positives (30%), runs the
noisy-gradient sampler to produce negatives, and takes one Adam step on

    cd + kl_weight * kl + l2_weight * l2

where ``cd`` is the positive/negative energy gap, ``kl`` differentiates the
sampler itself (gradient flows through the negatives' dependence on the
parameters via the last sampler step, with the energy's own parameter path
gradient-stopped), and ``l2`` keeps energy magnitudes bounded.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .data import ConceptDataset
from .ebm import ConceptKind, EBMParams, energy_graph, init_params
from .errors import TrainingAborted
from .langevin import TRAIN_PRESET, SamplerConfig, noise_at

DIVERGENCE_LIMIT = 1e6


# ---------------------------------------------------------------------------
# replay buffer


class ReplayBuffer:
    """Bounded store of generated negatives, bucketed by configuration arity.

    Once full, each insertion evicts a uniformly random stored item (across
    all buckets), so the overall size stays pinned at the capacity.
    """

    def __init__(self, capacity: int = 100000, seed: int = 0):
        if capacity <= 0:
            raise ValueError("buffer capacity must be positive")
        self.capacity = capacity
        self._buckets: dict[int, list] = {}
        self._rng = np.random.default_rng(seed)

    @property
    def size(self) -> int:
        return sum(len(v) for v in self._buckets.values())

    def size_for(self, arity: int) -> int:
        return len(self._buckets.get(arity, ()))

    def push(self, coords: np.ndarray, sizes: np.ndarray | None = None) -> None:
        entry = (
            np.array(coords, dtype=np.float64),
            None if sizes is None else np.array(sizes, dtype=np.float64),
        )
        arity = entry[0].shape[0]
        if self.size < self.capacity:
            self._buckets.setdefault(arity, []).append(entry)
            return
        slot = int(self._rng.integers(self.size))
        for bucket_arity in sorted(self._buckets):
            bucket = self._buckets[bucket_arity]
            if slot < len(bucket):
                if bucket_arity == arity:
                    bucket[slot] = entry
                else:
                    bucket.pop(slot)
                    self._buckets.setdefault(arity, []).append(entry)
                return
            slot -= len(bucket)

    def push_batch(self, coords: np.ndarray, sizes: np.ndarray | None = None) -> None:
        for i in range(coords.shape[0]):
            self.push(coords[i], None if sizes is None else sizes[i])

    def draw_one(self, arity: int, rng: np.random.Generator):
        bucket = self._buckets[arity]
        return bucket[int(rng.integers(len(bucket)))]


# ---------------------------------------------------------------------------
# configuration and report


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-4
    batch: int = 128
    buffer_init_prob: float = 0.7
    kl_weight: float = 1.0
    l2_weight: float = 1.0
    steps: int = 3000
    buffer_capacity: int = 100000
    seed: int = 0
    sampler: SamplerConfig = TRAIN_PRESET

    def __post_init__(self):
        if not 0.0 <= self.buffer_init_prob <= 1.0:
            raise ValueError("buffer_init_prob must lie in [0, 1]")
        if self.kl_weight < 0 or self.l2_weight < 0:
            raise ValueError("loss weights must be non-negative")
        if self.lr <= 0 or self.batch <= 0 or self.steps <= 0:
            raise ValueError("lr, batch, and steps must be positive")


@dataclass
class TrainReport:
    """Per-step energy and loss statistics plus total wall time."""

    kind: ConceptKind
    rows: list[dict] = field(default_factory=list)
    wall_time: float = 0.0

    def append(self, **stats) -> None:
        if not all(np.isfinite(v) for v in stats.values()):
            raise TrainingAborted(
                f"non-finite statistic at step {len(self.rows)}: {stats}", self.rows
            )
        self.rows.append(stats)

    @property
    def final(self) -> dict:
        return self.rows[-1]

    def to_jsonl(self) -> str:
        head = {"kind": self.kind.value, "wall_time": self.wall_time}
        return "\n".join([json.dumps(head)] + [json.dumps(r) for r in self.rows])


# ---------------------------------------------------------------------------
# negative sampling


def draw_negatives(
    buffer: ReplayBuffer,
    dataset: ConceptDataset,
    batch: int,
    cfg: TrainConfig,
    rng: np.random.Generator,
    arity: int | None = None,
) -> tuple[np.ndarray, np.ndarray | None]:
    """Initial chain states: replay items w.p. ``buffer_init_prob``, falling
    back to clean dataset positives (always, when the bucket is empty)."""
    if arity is None:
        arity = int(rng.choice(dataset.arities()))
    pool = dataset.coords[arity]
    size_pool = dataset.sizes[arity] if dataset.sizes is not None else None
    coords, sizes = [], []
    for _ in range(batch):
        if buffer.size_for(arity) > 0 and rng.uniform() < cfg.buffer_init_prob:
            c, s = buffer.draw_one(arity, rng)
        else:
            i = int(rng.integers(pool.shape[0]))
            c, s = pool[i], None if size_pool is None else size_pool[i]
        coords.append(c)
        sizes.append(s)
    stacked = np.stack(coords)
    return stacked, None if size_pool is None else np.stack(sizes)


def negative_chain(
    w: dict[str, ad.Node],
    kind: ConceptKind,
    x0: np.ndarray,
    sizes: np.ndarray | None,
    sampler: SamplerConfig,
    rng: np.random.Generator,
) -> ad.Node:
    """Run the sampler on a batch of chains; the result is a graph node.

    All but the last step run on plain arrays with the parameters held
    constant. The last step is built symbolically on the live parameters, so
    a loss of the result can differentiate the sampling process itself.
    """
    if sampler.clamp is not None:
        raise TrainingAborted("negative chains do not support clamped samplers")
    x = np.asarray(x0, dtype=np.float64)
    frozen = {k: ad.const(v.value, name=k) for k, v in w.items()}
    for k in range(sampler.steps - 1):
        xn = ad.leaf(x, name="chain")
        e = energy_graph(frozen, kind, xn, sizes)
        g = ad.backprop(ad.sum_axes(e, (0,)), [xn])[xn].value
        x = x - sampler.rate * g + noise_at(sampler, k) * rng.standard_normal(x.shape)
    xvar = ad.leaf(x, name="chain-final")
    e = energy_graph(w, kind, xvar, sizes)
    gx = ad.backprop(ad.sum_axes(e, (0,)), [xvar])[xvar]
    z = rng.standard_normal(x.shape)
    step = ad.mul(ad.const(np.float64(sampler.rate)), gx)
    return ad.add(ad.sub(xvar, step), ad.const(noise_at(sampler, sampler.steps - 1) * z))


# ---------------------------------------------------------------------------
# losses


def _abort_on_nonfinite(energies: np.ndarray, coords: np.ndarray, label: str):
    bad = ~np.isfinite(energies)
    if bad.any():
        i = int(np.argmax(bad))
        raise TrainingAborted(
            f"non-finite {label} energy at sample {i}: "
            f"coords {np.array2string(np.asarray(coords)[i], precision=4)}"
        )


def cd_losses(
    w: dict[str, ad.Node],
    kind: ConceptKind,
    pos: np.ndarray,
    neg,
    pos_sizes: np.ndarray | None = None,
    neg_sizes: np.ndarray | None = None,
    stats_out: dict | None = None,
) -> tuple[ad.Node, ad.Node, ad.Node]:
    """(cd, kl, l2) scalar loss nodes for one batch pair.

    ``neg`` may be a plain array (detached negatives) or a graph node from
    ``negative_chain``; only the kl term uses the latter's history. The kl
    energy's parameter path is gradient-stopped, so its gradient flows solely
    through the negatives' dependence on the parameters. ``stats_out``, when
    given, receives the raw per-sample energies for reporting.
    """
    neg_is_node = isinstance(neg, ad.Node)
    if len(pos) == 0 or len(neg.value if neg_is_node else neg) == 0:
        raise TrainingAborted("empty batch")
    e_pos = energy_graph(w, kind, ad.const(np.asarray(pos, dtype=np.float64)), pos_sizes)
    if neg_is_node:
        neg_live, neg_detached = neg, ad.stop_gradient(neg)
    else:
        neg_live = neg_detached = ad.const(np.asarray(neg, dtype=np.float64))
    e_neg = energy_graph(w, kind, neg_detached, neg_sizes)
    _abort_on_nonfinite(e_pos.value, pos, "positive")
    _abort_on_nonfinite(e_neg.value, neg_detached.value, "negative")
    if stats_out is not None:
        stats_out["e_pos"] = e_pos.value.copy()
        stats_out["e_neg"] = e_neg.value.copy()
    cd = ad.sub(ad.mean_axes(e_pos, (0,)), ad.mean_axes(e_neg, (0,)))
    stopped = {k: ad.stop_gradient(v) for k, v in w.items()}
    kl = ad.mean_axes(energy_graph(stopped, kind, neg_live, neg_sizes), (0,))
    l2 = ad.add(
        ad.mean_axes(ad.square(e_pos), (0,)), ad.mean_axes(ad.square(e_neg), (0,))
    )
    return cd, kl, l2


# ---------------------------------------------------------------------------
# training loop


def train_concept(
    kind: ConceptKind,
    dataset: ConceptDataset,
    cfg: TrainConfig = TrainConfig(),
) -> tuple[EBMParams, TrainReport]:
    """Adam-optimize one concept energy; deterministic for a given config."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(cfg.seed)
    weights = dict(init_params(kind, seed=cfg.seed).weights)
    adam = ad.AdamState()
    buffer = ReplayBuffer(cfg.buffer_capacity, seed=cfg.seed)
    report = TrainReport(kind=kind)
    for step in range(cfg.steps):
        pos, pos_sizes = dataset.sample_batch(cfg.batch, rng, augmented=True)
        x0, neg_sizes = draw_negatives(
            buffer, dataset, cfg.batch, cfg, rng, arity=pos.shape[1]
        )
        w = {k: ad.leaf(v, name=k) for k, v in weights.items()}
        neg = negative_chain(w, kind, x0, neg_sizes, cfg.sampler, rng)
        energies: dict = {}
        cd, kl, l2 = cd_losses(w, kind, pos, neg, pos_sizes, neg_sizes, energies)
        loss = ad.add(
            cd,
            ad.add(
                ad.mul(ad.const(np.float64(cfg.kl_weight)), kl),
                ad.mul(ad.const(np.float64(cfg.l2_weight)), l2),
            ),
        )
        grads = ad.backprop(loss, list(w.values()))
        grad_arrays = {k: grads[node].value for k, node in w.items()}
        weights, adam = ad.adam_step(weights, grad_arrays, adam, cfg.lr)
        buffer.push_batch(neg.value, neg_sizes)
        report.append(
            step=step,
            e_pos=float(energies["e_pos"].mean()),
            e_neg=float(energies["e_neg"].mean()),
            cd=float(cd.value),
            kl=float(kl.value),
            l2=float(l2.value),
        )
        peak = max(np.abs(energies["e_pos"]).max(), np.abs(energies["e_neg"]).max())
        if peak > DIVERGENCE_LIMIT:
            report.wall_time = time.perf_counter() - t0
            raise TrainingAborted(
                f"energy diverged at step {step}: |E| reached {peak:.3g}", report.rows
            )
    report.wall_time = time.perf_counter() - t0
    return EBMParams(kind=kind, weights=weights), report
