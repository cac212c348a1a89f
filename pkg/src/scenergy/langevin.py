"""Noisy gradient-descent sampling over configuration coordinates.

One step moves the movable coordinates along the negative energy gradient and
adds Gaussian exploration noise:

    x' = x - rate * dE/dx + eps_k * z,   z ~ N(0, I)

where ``eps_k`` stays at ``noise`` until ``decay_start`` and then decays
linearly to zero at the final step. Two presets cover the common cases:
``TRAIN_PRESET`` (30 constant-noise steps, used to draw negatives during
training) and ``INFER_PRESET`` (50 steps whose tail anneals the noise away so
the sample settles into a minimum; coordinates are clamped to the workspace).

Energies are anything with ``value_and_grad(x) -> (total, grad)``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import SamplerError
from .scene import Box, UNIT_WORKSPACE


@dataclass(frozen=True)
class SamplerConfig:
    steps: int = 30
    rate: float = 1.0
    noise: float = 5e-3
    decay_start: int = 30
    clamp: Box | None = None
    seed: int = 0


TRAIN_PRESET = SamplerConfig(steps=30, rate=1.0, noise=5e-3, decay_start=30, clamp=None)
INFER_PRESET = SamplerConfig(
    steps=50, rate=1.0, noise=5e-3, decay_start=30, clamp=UNIT_WORKSPACE
)


def noise_at(cfg: SamplerConfig, k: int) -> float:
    """Noise scale for step ``k`` (0-based); linear decay after ``decay_start``."""
    if k < cfg.decay_start or cfg.steps <= cfg.decay_start:
        return cfg.noise
    return cfg.noise * (cfg.steps - k) / (cfg.steps - cfg.decay_start)


@dataclass
class Trajectory:
    """All intermediate states (steps+1 snapshots, snapshot 0 is x0) plus the
    final total energy."""

    snapshots: np.ndarray
    final_energy: float

    @property
    def final(self) -> np.ndarray:
        return self.snapshots[-1]


class QuadraticWell:
    """Reference energy ``sum((x - center)^2)``; handy for tests and demos."""

    def __init__(self, center):
        self.center = np.asarray(center, dtype=np.float64)

    def value_and_grad(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        d = x - self.center
        return float((d * d).sum()), 2.0 * d


class SumEnergy:
    """Pointwise sum of component energies (compositions are just sums)."""

    def __init__(self, parts):
        self.parts = list(parts)

    def value_and_grad(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        total, grad = 0.0, np.zeros_like(x)
        for p in self.parts:
            v, g = p.value_and_grad(x)
            total += v
            grad += g
        return total, grad


def _resolve_bounds(cfg: SamplerConfig, x: np.ndarray, bounds):
    if bounds is not None:
        lo, hi = bounds
        return np.asarray(lo, dtype=np.float64), np.asarray(hi, dtype=np.float64)
    if cfg.clamp is None:
        return None
    if x.shape[-1] != 2:
        raise SamplerError(
            "workspace clamp assumes (x, y) trailing coordinates; "
            f"got trailing dimension {x.shape[-1]} — pass explicit bounds"
        )
    return np.asarray(cfg.clamp.tl), np.asarray(cfg.clamp.br)


def langevin_step(
    energy,
    x: np.ndarray,
    k: int,
    cfg: SamplerConfig,
    rng: np.random.Generator,
    mask: np.ndarray | None = None,
    bounds=None,
) -> np.ndarray:
    """One sampling step; frozen coordinates come back bitwise unchanged."""
    _, grad = energy.value_and_grad(x)
    if not np.all(np.isfinite(grad)):
        raise SamplerError(f"non-finite energy gradient at step {k}")
    z = rng.standard_normal(x.shape)
    new = x - cfg.rate * grad + noise_at(cfg, k) * z
    resolved = _resolve_bounds(cfg, x, bounds)
    if resolved is not None:
        new = np.clip(new, resolved[0], resolved[1])
    if mask is not None:
        new = np.where(mask, new, x)
    return new


def sample(
    energy,
    x0: np.ndarray,
    cfg: SamplerConfig,
    mask: np.ndarray | None = None,
    bounds=None,
    rng: np.random.Generator | None = None,
) -> Trajectory:
    """Run ``cfg.steps`` Langevin steps from ``x0`` and record every state."""
    x = np.asarray(x0, dtype=np.float64).copy()
    if mask is not None:
        mask = np.broadcast_to(np.asarray(mask, bool), x.shape)
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    snapshots = np.empty((cfg.steps + 1, *x.shape))
    snapshots[0] = x
    for k in range(cfg.steps):
        x = langevin_step(energy, x, k, cfg, rng, mask=mask, bounds=bounds)
        snapshots[k + 1] = x
    final_energy, _ = energy.value_and_grad(x)
    if not np.isfinite(final_energy):
        raise SamplerError("non-finite final energy")
    return Trajectory(snapshots=snapshots, final_energy=float(final_energy))


def infer_config(clamp: Box | None = UNIT_WORKSPACE, seed: int = 0, **overrides) -> SamplerConfig:
    """INFER preset with a given clamp region and seed."""
    return replace(INFER_PRESET, clamp=clamp, seed=seed, **overrides)


def train_config(seed: int = 0, **overrides) -> SamplerConfig:
    """TRAIN preset with a given seed."""
    return replace(TRAIN_PRESET, seed=seed, **overrides)
