"""Noisy kinematic pick-and-place execution with a closed-loop retry policy.

The executor is a deliberately simple stochastic model: each pick fails
outright with probability ``p_fail`` (scene unchanged), and each successful
place lands at the target center plus per-axis Gaussian noise. The closed
loop re-reads the scene after every action, accepts a placement when its
box overlaps the target above an IoU threshold, and retries failures up to
a budget; the open loop places each entity once and never looks back.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ExecutionError
from .planner import GoalLayout
from .scene import Box, Entity, Scene, iou


@dataclass(frozen=True)
class ExecConfig:
    sigma: float = 0.0
    p_fail: float = 0.0
    tau_iou: float = 0.5
    retries: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.sigma < 0.0:
            raise ExecutionError(f"sigma must be >= 0, got {self.sigma}")
        if not 0.0 <= self.p_fail <= 1.0:
            raise ExecutionError(f"p_fail must be in [0, 1], got {self.p_fail}")
        if not 0.0 < self.tau_iou <= 1.0:
            raise ExecutionError(f"tau_iou must be in (0, 1], got {self.tau_iou}")
        if self.retries < 0:
            raise ExecutionError(f"retry budget must be >= 0, got {self.retries}")


@dataclass(frozen=True)
class Action:
    """One pick-and-place attempt; ``success`` is None when never re-checked."""

    entity_id: str
    intended: Box
    achieved: Box
    success: bool | None


@dataclass
class ExecutionLog:
    actions: list[Action] = field(default_factory=list)
    retries_used: int = 0
    final_scene: Scene | None = None

    def to_jsonl(self) -> bytes:
        lines = []
        for a in self.actions:
            lines.append(
                json.dumps(
                    {
                        "entity": a.entity_id,
                        "intended": {"tl": list(a.intended.tl), "br": list(a.intended.br)},
                        "achieved": {"tl": list(a.achieved.tl), "br": list(a.achieved.br)},
                        "success": a.success,
                    }
                )
            )
        lines.append(json.dumps({"retries_used": self.retries_used}))
        return ("\n".join(lines) + "\n").encode("utf-8")


def execute_pick_place(
    scene: Scene,
    entity_id: str,
    target: Box,
    cfg: ExecConfig,
    rng: np.random.Generator,
    z: tuple[float, float] | None = None,
    theta: float | None = None,
) -> Scene:
    """One attempt: a failed pick leaves the scene bitwise unchanged, a
    successful one drops the entity at the target center plus noise.

    ``z``/``theta`` are copied verbatim when given — the executor places, it
    does not servo orientation or height.
    """
    if not scene.has(entity_id):
        raise ExecutionError(f"no entity with id '{entity_id}'")
    if cfg.p_fail > 0.0 and rng.random() < cfg.p_fail:
        return scene
    noise = rng.normal(0.0, cfg.sigma, 2) if cfg.sigma > 0.0 else np.zeros(2)
    entity = scene.entity(entity_id)
    cx, cy = target.center
    moved = replace(
        entity,
        center=(cx + float(noise[0]), cy + float(noise[1])),
        z=z if z is not None else entity.z,
        theta=theta if theta is not None else entity.theta,
    )
    return scene.with_entity(moved)


def _moved_ids(layout: GoalLayout) -> list[str]:
    return sorted(eid for eid, flag in layout.moved.items() if flag)


def closed_loop_run(scene: Scene, layout: GoalLayout, cfg: ExecConfig):
    """Execute every moved entity with re-check and retries.

    Returns ``(final scene, predicted_success, log)`` where the prediction
    is True only if every entity passed its IoU check within the budget.
    """
    rng = np.random.default_rng(cfg.seed)
    log = ExecutionLog()
    predicted = True
    for eid in _moved_ids(layout):
        target = layout.targets[eid]
        placed = False
        for attempt in range(cfg.retries + 1):
            scene = execute_pick_place(
                scene, eid, target.box, cfg, rng, z=target.z, theta=target.theta
            )
            achieved = scene.entity(eid).box
            placed = iou(achieved, target.box) >= cfg.tau_iou
            log.actions.append(Action(eid, target.box, achieved, placed))
            log.retries_used += attempt > 0
            if placed:
                break
        if not placed:
            predicted = False
    log.final_scene = scene
    return scene, predicted, log


def open_loop_run(scene: Scene, layout: GoalLayout, cfg: ExecConfig):
    """Execute every moved entity exactly once, without any re-check."""
    rng = np.random.default_rng(cfg.seed)
    log = ExecutionLog()
    for eid in _moved_ids(layout):
        target = layout.targets[eid]
        scene = execute_pick_place(
            scene, eid, target.box, cfg, rng, z=target.z, theta=target.theta
        )
        log.actions.append(Action(eid, target.box, scene.entity(eid).box, None))
    log.final_scene = scene
    return scene, log
