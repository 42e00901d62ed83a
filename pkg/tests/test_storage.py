import json

import pytest

from tests.conftest import make_object
from xnm.errors import DataError
from xnm.models import CheckpointDocument, DatasetRecord, EngineConfig, SceneRecord, WorldConfig
from xnm.storage import checkpoint_store, dataset_store


def scene_record(scene_id):
    return SceneRecord(scene_id=scene_id, objects=[make_object(0, "red", "cube"), make_object(1, "blue", "sphere", x=1.0)])


def test_scenes_and_splits_round_trip(tmp_path):
    scenes = [scene_record(0), scene_record(4)]
    records = [
        DatasetRecord(scene_id=0, program="count(scene())", family="count", answer="2"),
        DatasetRecord(scene_id=4, program="exist(filter[red](scene()))", family="exist", answer="yes"),
    ]
    dataset_store.save_scenes(tmp_path, scenes)
    dataset_store.save_split(tmp_path, "train", records)
    assert dataset_store.load_scenes(tmp_path) == {0: scenes[0], 4: scenes[1]}
    assert dataset_store.load_split(tmp_path, "train") == records


def test_duplicate_scene_ids(tmp_path):
    dataset_store.save_scenes(tmp_path, [scene_record(1), scene_record(1)])
    with pytest.raises(DataError):
        dataset_store.load_scenes(tmp_path)


def test_invalid_lines_and_missing_files(tmp_path):
    (tmp_path / "val.jsonl").write_text('{"scene_id": 0, "program": "count(scene())"}\n', encoding="utf-8")
    with pytest.raises(DataError):
        dataset_store.load_split(tmp_path, "val")
    with pytest.raises(DataError):
        dataset_store.load_split(tmp_path, "test")
    (tmp_path / "scene.json").write_text("{not json", encoding="utf-8")
    with pytest.raises(DataError):
        dataset_store.load_scene(tmp_path / "scene.json")
    with pytest.raises(DataError):
        dataset_store.load_scene(tmp_path / "missing.json")


def test_world_config_from_file_or_directory(tmp_path):
    world = WorldConfig(palette="A", max_objects=6, seed=12)
    dataset_store.save_world(tmp_path / "data", world)
    assert dataset_store.load_world(tmp_path / "data") == world
    assert dataset_store.load_world(tmp_path / "data" / "world.json") == world
    (tmp_path / "empty").mkdir()
    assert dataset_store.load_world(tmp_path / "empty") == WorldConfig()


def test_world_config_is_validated(tmp_path):
    path = tmp_path / "world.json"
    path.write_text(json.dumps({"min_objects": 8, "max_objects": 4}), encoding="utf-8")
    with pytest.raises(DataError):
        dataset_store.load_world(path)


def test_checkpoint_version_is_checked(tmp_path):
    document = CheckpointDocument(version=99, config=EngineConfig(dim=2), params={})
    path = tmp_path / "old.json"
    path.write_text(document.model_dump_json(), encoding="utf-8")
    with pytest.raises(DataError):
        checkpoint_store.load(path)


def test_corruption_spec_ranges(tmp_path):
    path = tmp_path / "corruption.json"
    path.write_text(json.dumps({"occlusion_probability": 0.2, "coordinate_jitter_sigma": 0.1}), encoding="utf-8")
    assert dataset_store.load_corruption(path).occlusion_probability == 0.2
    path.write_text(json.dumps({"occlusion_probability": 2.0}), encoding="utf-8")
    with pytest.raises(DataError):
        dataset_store.load_corruption(path)
