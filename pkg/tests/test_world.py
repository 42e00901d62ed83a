import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from pydantic import ValidationError

from tests.conftest import make_object
from xnm.errors import DataError
from xnm.models import CATEGORIES, CorruptionSpec, Scene, WorldConfig
from xnm.world import MIRROR, check_scene, corrupt, palette_violations, sample_scene, sample_scenes, spatial_relations

seeds = st.integers(min_value=0, max_value=2**32 - 1)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_sampled_scenes_are_valid(seed):
    world = WorldConfig()
    scene = sample_scene(world, np.random.default_rng(seed))
    assert world.min_objects <= len(scene.objects) <= world.max_objects
    assert [o.id for o in scene.objects] == list(range(len(scene.objects)))
    for obj in scene.objects:
        for category in CATEGORIES:
            assert obj.attribute(category) in world.vocab(category)
        assert -3.0 <= obj.x <= 3.0 and -3.0 <= obj.y <= 3.0
    for a in scene.objects:
        for b in scene.objects:
            if a.id != b.id:
                assert abs(a.x - b.x) >= 1e-3 and abs(a.y - b.y) >= 1e-3


def test_fixed_seed_gives_identical_scenes():
    world = WorldConfig()
    assert sample_scenes(world, 3, seed=5) == sample_scenes(world, 3, seed=5)


def test_palette_conditions():
    cube_palette = {"gray", "blue", "brown", "yellow"}
    world = WorldConfig()
    for scene in sample_scenes(world.with_condition("A"), 50, seed=1):
        for obj in scene.objects:
            if obj.shape == "cube":
                assert obj.color in cube_palette
            if obj.shape == "cylinder":
                assert obj.color not in cube_palette
    for scene in sample_scenes(world.with_condition("B"), 50, seed=2):
        assert not palette_violations(scene, world.with_condition("B"))
        for obj in scene.objects:
            if obj.shape == "cylinder":
                assert obj.color in cube_palette
            if obj.shape == "cube":
                assert obj.color not in cube_palette


def test_empty_vocabulary_is_rejected():
    with pytest.raises(DataError):
        sample_scene(WorldConfig(materials=[]), np.random.default_rng(0))


def test_world_config_validation():
    with pytest.raises(ValidationError):
        WorldConfig(relations=["left", "right"])
    with pytest.raises(ValidationError):
        WorldConfig(min_objects=5, max_objects=4)
    with pytest.raises(ValidationError):
        WorldConfig(palette_a={"cube": ["red"], "cylinder": ["red"]})


def test_scene_invariants():
    with pytest.raises(ValidationError):
        Scene(objects=[make_object(1, "red", "cube")])
    with pytest.raises(ValidationError):
        Scene(objects=[make_object(0, "red", "cube"), make_object(1, "blue", "cube")])


def test_corruption_spec_ranges():
    with pytest.raises(ValidationError):
        CorruptionSpec(occlusion_probability=1.5)
    with pytest.raises(ValidationError):
        CorruptionSpec(coordinate_jitter_sigma=-0.1)


def test_left_relation_example():
    scene = Scene(objects=[make_object(0, "red", "cube", x=0.0, y=0.0), make_object(1, "red", "cube", x=5.0, y=1.0)])
    relations = spatial_relations(scene)
    assert "left" in relations[1][0]
    assert relations[0][1] == frozenset({"right", "behind"})
    assert relations[0][0] == frozenset()


def test_x_tie_has_no_horizontal_relation():
    scene = Scene(objects=[make_object(0, "red", "cube", x=1.0, y=0.0), make_object(1, "red", "cube", x=1.0, y=2.0)])
    assert spatial_relations(scene)[0][1] == frozenset({"behind"})


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_relations_mirror_and_are_total(seed):
    scene = sample_scene(WorldConfig(), np.random.default_rng(seed))
    relations = spatial_relations(scene)
    for i in range(len(scene.objects)):
        for j in range(len(scene.objects)):
            if i == j:
                continue
            assert relations[j][i] == frozenset(MIRROR[r] for r in relations[i][j])
            assert len(relations[i][j] & {"left", "right"}) == 1
            assert len(relations[i][j] & {"front", "behind"}) == 1


def test_clean_corruption_is_identity(three_objects, rng):
    assert corrupt(three_objects, CorruptionSpec(), rng) == three_objects


def test_full_occlusion_keeps_one_object(three_objects, rng):
    corrupted = corrupt(three_objects, CorruptionSpec(occlusion_probability=1.0), rng)
    assert len(corrupted.objects) == 1
    assert corrupted.objects[0].id == 0


def test_merge_collapses_adjacent_look_alikes(rng):
    scene = Scene(objects=[
        make_object(0, "red", "cube", x=0.0, y=0.0),
        make_object(1, "red", "cube", x=0.5, y=0.2),
        make_object(2, "blue", "sphere", x=-2.5, y=2.5),
    ])
    merged = corrupt(scene, CorruptionSpec(merge_probability=1.0), rng)
    assert len(merged.objects) == 2
    survivor = merged.objects[0]
    assert (survivor.x, survivor.y) == pytest.approx((0.25, 0.1))


def test_merge_needs_identical_attributes(rng):
    scene = Scene(objects=[
        make_object(0, "red", "cube", x=0.0, y=0.0),
        make_object(1, "red", "sphere", x=0.5, y=0.2),
    ])
    assert len(corrupt(scene, CorruptionSpec(merge_probability=1.0), rng).objects) == 2


def test_check_scene_against_world_vocabularies(three_objects):
    check_scene(three_objects, WorldConfig())
    with pytest.raises(DataError):
        check_scene(three_objects, WorldConfig(materials=["rubber", "glass"]))
