"""
From instruction text to a goal layout
======================================

The planning pipeline has four stages:

1. parse   - instruction text -> program tree (filters and goals)
2. ground  - program filters -> concrete entity ids in the scene
3. compile - grounded goals -> a sum-of-concept-energies expression
4. plan    - joint Langevin descent over every movable entity

This demo uses analytic surrogate energies (quadratic pulls toward the
satisfied region) so it runs instantly; swap in trained checkpoints via
``scenergy.checkpoint.load_checkpoint`` for learned behavior. The same
pipeline backs the ``scenergy plan`` command.
"""

import json

import numpy as np

import scenergy.autodiff as ad
from scenergy.ebm import ConceptKind
from scenergy.grounding import ground_program
from scenergy.landscape import extract_paths, render_svg
from scenergy.metrics import directional_window, relation_satisfied
from scenergy.parser import parse, program_to_sexpr
from scenergy.planner import compile_program, layout_to_dict, plan_goal
from scenergy.scene import Entity, Scene

# ---------------------------------------------------------------------------
# 1. a scene and an instruction

scene = Scene(
    entities=(
        Entity(id="mug", name="cube", color="red", center=(0.7, 0.3), size=(0.07, 0.07)),
        Entity(id="dish", name="bowl", color="blue", center=(0.4, 0.55), size=(0.18, 0.18)),
        Entity(id="deco", name="star", color="green", center=(0.8, 0.8), size=(0.06, 0.06)),
    )
)
instruction = "put the red cube to the left of the blue bowl"

program = parse(instruction)
print("program:", program_to_sexpr(program))

groundings = ground_program(program, scene)
print("groundings:", {str(k): v for k, v in list(groundings.items())[:2]})

expr = compile_program(program, groundings)
print("energy terms:", [(t.kind.value, t.entity_ids) for t in expr.terms])


# ---------------------------------------------------------------------------
# 2. a surrogate energy per concept: quadratic pull into the valid window


def directional_pull(kind):
    def build(coords, sizes=None):
        lo, hi = directional_window(kind, (0.0, 0.0))
        target = np.array((np.add(lo, hi) / 2.0))
        subject = ad.slice_axis(coords, 0, 1, axis=1)
        referent = ad.slice_axis(coords, 1, 2, axis=1)
        offset = ad.sub(subject, referent)
        gap = ad.sub(offset, ad.const(target.reshape(1, 1, 2)))
        # coefficient 0.25 keeps the unit-rate Langevin update contractive
        return ad.mul(ad.const(np.float64(0.25)), ad.sum_axes(ad.square(gap), (1, 2)))

    return build


library = {kind: directional_pull(kind) for kind in
           (ConceptKind.LEFT_OF, ConceptKind.RIGHT_OF,
            ConceptKind.BEHIND, ConceptKind.IN_FRONT_OF)}

# ---------------------------------------------------------------------------
# 3. plan: the subject moves, the referent is an anchor and stays put

layout = plan_goal(scene, expr, library, rng=np.random.default_rng(0),
                   keep_trajectory=True)
doc = layout_to_dict(layout)
print("\nlayout:", json.dumps(doc, indent=2)[:400], "...")

moved = scene.entity("mug").center, layout.targets["mug"].center
print("mug moved from", np.round(moved[0], 3), "to", np.round(moved[1], 3))
print("bowl stayed at", layout.targets["dish"].center)

satisfied = relation_satisfied(
    ConceptKind.LEFT_OF, layout.targets["mug"], layout.targets["dish"]
)
print("left-of satisfied in the layout:", satisfied)

# ---------------------------------------------------------------------------
# 4. render the trajectory to an SVG you can open in a browser

paths = extract_paths(scene, expr, layout.trajectory)
svg = render_svg(scene, paths)
with open("/tmp/plan_demo.svg", "wb") as f:
    f.write(svg)
print("\nwrote /tmp/plan_demo.svg", f"({len(svg)} bytes)")
