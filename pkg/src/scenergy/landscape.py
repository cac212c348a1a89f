"""Energy-landscape sweeps and trajectory plots as dependency-free images.

``sweep`` slides one movable probe entity across a grid over the workspace
while every other referenced entity stays at its scene position, evaluating
the summed term energies per cell. Grids render to binary PPM heatmaps
(min energy dark, max light); planned trajectories render to SVG with the
scene's boxes as rectangles and per-entity polylines. Both renderers are
pure functions of their inputs, so output bytes are bitwise reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .ebm import EBMParams, energy_batch
from .errors import EvaluationError, PlanningError
from .langevin import Trajectory
from .planner import EnergyExpression, _Slots, _term_sizes, select_anchors
from .scene import Scene

DEFAULT_RESOLUTION = 64


@dataclass(frozen=True)
class LandscapeGrid:
    """Per-cell energies of the probe swept across the workspace.

    ``energies[i, j]`` is the energy with the probe center at
    ``(xs[j], ys[i])``; row 0 is the smallest-y edge of the workspace.
    """

    resolution: int
    energies: np.ndarray
    probe_id: str
    xs: np.ndarray
    ys: np.ndarray

    def __post_init__(self):
        if self.energies.shape != (self.resolution, self.resolution):
            raise EvaluationError(
                f"grid shape {self.energies.shape} does not match resolution "
                f"{self.resolution}"
            )
        if not np.all(np.isfinite(self.energies)):
            raise EvaluationError("landscape grid contains non-finite energies")

    def argmin_cell(self) -> tuple[int, int]:
        """(row, column) of the minimum-energy cell."""
        flat = int(np.argmin(self.energies))
        return flat // self.resolution, flat % self.resolution


def grid_axes(scene: Scene, resolution: int) -> tuple[np.ndarray, np.ndarray]:
    """Cell-center coordinates covering the workspace."""
    tl, br = scene.workspace.tl, scene.workspace.br
    steps = (np.arange(resolution) + 0.5) / resolution
    return tl[0] + steps * (br[0] - tl[0]), tl[1] + steps * (br[1] - tl[1])


def sweep(
    scene: Scene,
    expr: EnergyExpression,
    library,
    probe_id: str,
    resolution: int = DEFAULT_RESOLUTION,
) -> LandscapeGrid:
    """Evaluate the expression with the probe center at each grid cell.

    The probe must be movable under the expression's anchor rule; all other
    entities contribute from their current scene positions.
    """
    if resolution < 1:
        raise EvaluationError("resolution must be at least 1")
    slots = _Slots(scene, expr)
    if probe_id not in slots.entities:
        raise PlanningError(f"probe '{probe_id}' is not referenced by the expression")
    if not select_anchors(expr).get(probe_id, False):
        raise PlanningError(f"probe '{probe_id}' is fixed in this expression")

    xs, ys = grid_axes(scene, resolution)
    cells = resolution * resolution
    grid_x, grid_y = np.meshgrid(xs, ys)
    flat = np.tile(slots.initial(), (cells, 1))
    flat[:, slots.index[(probe_id, "x")]] = grid_x.ravel()
    flat[:, slots.index[(probe_id, "y")]] = grid_y.ravel()

    total = np.zeros(cells, dtype=np.float64)
    for term in expr.terms:
        try:
            impl = library[term.kind]
        except KeyError:
            raise PlanningError(f"no energy available for '{term.kind.value}'")
        coords = flat[:, slots.term_indices(term)].reshape(
            cells, len(term.entity_ids), term.kind.coord_dim
        )
        sizes = _term_sizes(term, slots)
        if sizes is not None:
            sizes = np.repeat(sizes, cells, axis=0)
        if isinstance(impl, EBMParams):
            total += energy_batch(impl, coords, sizes)
        else:
            total += impl(ad.const(coords), sizes).value
    return LandscapeGrid(
        resolution=resolution,
        energies=total.reshape(resolution, resolution),
        probe_id=probe_id,
        xs=xs,
        ys=ys,
    )


# ---------------------------------------------------------------------------
# PPM heatmaps


def render_ppm(grid: LandscapeGrid) -> bytes:
    """Binary PPM (P6, maxval 255) grayscale heatmap.

    Luminance rises monotonically with energy: the minimum-energy cell is
    black, the maximum white; a constant grid renders mid-gray. Image row 0
    is grid row 0 (the smallest-y edge).
    """
    e = grid.energies
    lo, hi = float(e.min()), float(e.max())
    if hi > lo:
        levels = np.rint((e - lo) / (hi - lo) * 255.0).astype(np.uint8)
    else:
        levels = np.full(e.shape, 128, dtype=np.uint8)
    header = f"P6\n{grid.resolution} {grid.resolution}\n255\n".encode("ascii")
    return header + np.repeat(levels[..., None], 3, axis=-1).tobytes()


# ---------------------------------------------------------------------------
# SVG trajectory plots


#: colors that double as valid SVG fills
_SVG_COLORS = frozenset(
    "blue red green yellow brown gray cyan orange purple pink white".split()
)


def extract_paths(
    scene: Scene,
    expr: EnergyExpression,
    trajectory: Trajectory,
    mask: dict[str, bool] | None = None,
) -> dict[str, np.ndarray]:
    """Per-entity (steps+1, 2) center polylines for every movable entity."""
    slots = _Slots(scene, expr)
    movable = mask if mask is not None else select_anchors(expr)
    snaps = trajectory.snapshots
    if snaps.ndim != 2 or snaps.shape[1] != slots.size:
        raise PlanningError(
            f"trajectory width {snaps.shape[-1]} does not match the "
            f"expression's {slots.size} coordinate slots"
        )
    paths = {}
    for eid in slots.ids:
        if not movable.get(eid, False):
            continue
        ix, iy = slots.index[(eid, "x")], slots.index[(eid, "y")]
        paths[eid] = np.stack([snaps[:, ix], snaps[:, iy]], axis=1)
    return paths


def _fmt(v: float) -> str:
    return f"{v:.4f}"


def render_svg(
    scene: Scene,
    paths: dict[str, np.ndarray] | None = None,
    pixels: int = 512,
) -> bytes:
    """SVG 1.1 plot: entity boxes as rectangles, optional center polylines.

    The y axis points down, matching the grid/PPM row order.
    """
    tl, br = scene.workspace.tl, scene.workspace.br
    width, height = br[0] - tl[0], br[1] - tl[1]
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{pixels}" height="{round(pixels * height / width)}" '
        f'viewBox="{_fmt(tl[0])} {_fmt(tl[1])} {_fmt(width)} {_fmt(height)}">'
    ]
    out.append(
        f'<rect x="{_fmt(tl[0])}" y="{_fmt(tl[1])}" width="{_fmt(width)}" '
        f'height="{_fmt(height)}" fill="#f8f8f8" stroke="#333" stroke-width="0.004"/>'
    )
    for e in scene.entities:
        fill = e.color if e.color in _SVG_COLORS else "#999999"
        out.append(
            f'<rect x="{_fmt(e.box.tl[0])}" y="{_fmt(e.box.tl[1])}" '
            f'width="{_fmt(e.size[0])}" height="{_fmt(e.size[1])}" '
            f'fill="{fill}" fill-opacity="0.55" stroke="#222" '
            f'stroke-width="0.003"><title>{e.id}: {e.color} {e.name}</title></rect>'
        )
    for eid in sorted(paths or {}):
        pts = np.asarray(paths[eid], dtype=np.float64)
        coords = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in pts)
        out.append(
            f'<polyline points="{coords}" fill="none" stroke="#d22" '
            f'stroke-width="0.004"/>'
        )
        out.append(
            f'<circle cx="{_fmt(pts[-1, 0])}" cy="{_fmt(pts[-1, 1])}" r="0.008" '
            f'fill="#d22"/>'
        )
    out.append("</svg>\n")
    return "\n".join(out).encode("utf-8")
