"""Symbolic grounding: matching, quantifiers, errors, determinism."""

import pytest

from scenergy.errors import AmbiguityError, GroundingError
from scenergy.grounding import (
    GroundingResult,
    SymbolicGrounder,
    ground,
    ground_program,
)
from scenergy.parser import FilterNode, parse
from scenergy.scene import Entity, Scene


def entity(eid, name, color, center=(0.5, 0.5), size=(0.08, 0.08)):
    return Entity(id=eid, name=name, color=color, center=center, size=size)


@pytest.fixture
def scene():
    return Scene(
        entities=(
            entity("e0", "cube", "red", center=(0.2, 0.2)),
            entity("e1", "cube", "red", center=(0.4, 0.2)),
            entity("e2", "cube", "red", center=(0.6, 0.2)),
            entity("e3", "cube", "blue", center=(0.2, 0.6)),
            entity("e4", "cube", "blue", center=(0.4, 0.6)),
            entity("e5", "plate", "gray", center=(0.7, 0.7), size=(0.3, 0.3)),
            entity("e6", "plus", "green", center=(0.8, 0.2)),
        )
    )


class TestMatching:
    def test_all_filters_by_color(self, scene):
        result = ground(FilterNode("cube", "red", "all"), scene)
        assert result.ids == ("e0", "e1", "e2")

    def test_one_with_unique_match(self, scene):
        result = ground(FilterNode("plate", quantifier="one"), scene)
        assert result.ids == ("e5",)
        assert result.boxes[0] == scene.entity("e5").box

    def test_no_color_matches_any_color(self, scene):
        result = ground(FilterNode("cube", quantifier="all"), scene)
        assert result.ids == ("e0", "e1", "e2", "e3", "e4")

    def test_plural_scene_name_matches_singular_noun(self):
        scn = Scene(entities=(entity("a", "cubes", "red"),))
        assert ground(FilterNode("cube", quantifier="one"), scn).ids == ("a",)

    def test_irregular_plural_name(self, scene):
        assert ground(FilterNode("plus", quantifier="one"), scene).ids == ("e6",)

    def test_case_insensitive_names(self):
        scn = Scene(entities=(entity("a", "Cube", "Red"),))
        assert ground(FilterNode("cube", "red", "one"), scn).ids == ("a",)

    def test_boxes_reflect_current_scene(self, scene):
        result = ground(FilterNode("cube", "red", "all"), scene)
        assert [b.center for b in result.boxes] == [
            (0.2, 0.2),
            (0.4, 0.2),
            (0.6, 0.2),
        ]


class TestQuantifiers:
    def test_one_with_multiple_matches_is_ambiguous(self, scene):
        with pytest.raises(AmbiguityError) as err:
            ground(FilterNode("cube", "blue", "one"), scene)
        assert "e3" in str(err.value) and "e4" in str(err.value)

    def test_all_with_single_match_is_fine(self, scene):
        assert ground(FilterNode("plate", quantifier="all"), scene).ids == ("e5",)

    def test_zero_matches_names_the_phrase(self, scene):
        with pytest.raises(GroundingError, match="the banana"):
            ground(FilterNode("banana", quantifier="one"), scene)

    def test_zero_matches_for_all_quantifier(self, scene):
        with pytest.raises(GroundingError, match="all green cubes"):
            ground(FilterNode("cube", "green", "all"), scene)

    def test_ambiguity_is_a_grounding_error(self, scene):
        with pytest.raises(GroundingError):
            ground(FilterNode("cube", "red", "one"), scene)


class TestDeterminism:
    def test_ids_exist_in_scene(self, scene):
        result = ground(FilterNode("cube", quantifier="all"), scene)
        assert all(scene.has(i) for i in result.ids)

    def test_order_independent_of_entity_order(self, scene):
        shuffled = Scene(entities=tuple(reversed(scene.entities)))
        a = ground(FilterNode("cube", "red", "all"), scene)
        b = ground(FilterNode("cube", "red", "all"), shuffled)
        assert a.ids == b.ids

    def test_idempotent(self, scene):
        node = FilterNode("cube", "red", "all")
        assert ground(node, scene) == ground(node, scene)

    def test_result_alignment_validated(self, scene):
        with pytest.raises(GroundingError):
            GroundingResult(node=FilterNode("cube"), ids=("a",), boxes=())


class TestProgramGrounding:
    def test_grounds_every_phrase(self, scene):
        program = parse("put the plus behind the plate")
        results = ground_program(program, scene)
        nodes = {n.noun for n in results}
        assert nodes == {"plus", "plate"}
        assert results[FilterNode("plus")].ids == ("e6",)

    def test_shape_goal_with_constraint(self, scene):
        program = parse("put all red cubes in a circle in the plate")
        results = ground_program(program, scene)
        assert results[FilterNode("cube", "red", "all")].ids == ("e0", "e1", "e2")
        assert results[FilterNode("plate")].ids == ("e5",)

    def test_shared_phrase_resolved_once(self, scene):
        program = parse(
            "put the plus behind the plate, and put the plus in the plate"
        )
        results = ground_program(program, scene)
        assert len(results) == 2

    def test_pluggable_interface(self, scene):
        class Recorder:
            def __init__(self):
                self.calls = []

            def ground(self, node, scn):
                self.calls.append(node)
                return SymbolicGrounder().ground(node, scn)

        recorder = Recorder()
        program = parse("put the plus behind the plate")
        ground_program(program, scene, grounder=recorder)
        assert len(recorder.calls) == 2
