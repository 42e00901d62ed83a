import pytest

from xnm.experiments import ROBUSTNESS_SPECS, engine_config, experiment_runner
from xnm.models import WorldConfig
from xnm.storage import dataset_store
from xnm.world import palette_violations


@pytest.fixture(scope="module")
def small_world():
    return WorldConfig(min_objects=3, max_objects=5)


def test_engine_config_defaults(small_world):
    gt = engine_config(small_world.with_condition("A"), "gt", 16)
    assert gt.describe_mode == "fixed" and gt.dim == 16
    assert gt.world.palette is None
    det = engine_config(small_world, "det", corruption=ROBUSTNESS_SPECS["jitter"])
    assert det.describe_mode == "learned"
    assert det.corruption.coordinate_jitter_sigma == 0.1


def test_dataset_splits_by_scene(small_world):
    dataset = experiment_runner.build_dataset(small_world, num_scenes=10, questions_per_scene=2, seed=3)
    train_ids = {r.scene_id for r in dataset.splits["train"]}
    val_ids = {r.scene_id for r in dataset.splits["val"]}
    assert train_ids.isdisjoint(val_ids)
    assert train_ids | val_ids <= set(dataset.scenes)
    assert "valB" not in dataset.splits


def test_cogent_dataset_swaps_palettes(small_world):
    world = small_world.model_copy(update={"cogent": True})
    dataset = experiment_runner.build_dataset(world, num_scenes=10, questions_per_scene=2, seed=3)
    assert dataset.splits["valA"] == dataset.splits["val"]
    a_world, b_world = world.with_condition("A"), world.with_condition("B")
    train_ids = {r.scene_id for r in dataset.splits["train"]}
    b_ids = {r.scene_id for r in dataset.splits["valB"]}
    for scene_id in train_ids:
        assert not palette_violations(dataset.scenes[scene_id], a_world)
    for scene_id in b_ids:
        assert not palette_violations(dataset.scenes[scene_id], b_world)
    assert b_ids.isdisjoint(train_ids)


def test_generate_dataset_writes_every_split(small_world, tmp_path):
    world = small_world.model_copy(update={"cogent": True})
    experiment_runner.generate_dataset(world, tmp_path, num_scenes=6, questions_per_scene=1, seed=0)
    assert dataset_store.load_world(tmp_path) == world
    for split in ("train", "val", "valA", "valB"):
        assert dataset_store.load_split(tmp_path, split)
    scenes = dataset_store.load_scenes(tmp_path)
    assert all(r.scene_id in scenes for r in dataset_store.load_split(tmp_path, "valB"))


def test_small_runs_report_metrics(small_world):
    dataset = experiment_runner.build_dataset(small_world, num_scenes=8, questions_per_scene=2, seed=1)
    results = experiment_runner.run_data_efficiency(dataset, fractions=(0.5, 1.0), epochs=1, seed=0, dim=4)
    assert sorted(results) == [0.5, 1.0]
    assert all(0.0 <= m.overall <= 1.0 for m in results.values())

    robustness = experiment_runner.run_det_robustness(
        dataset, specs={"clean": ROBUSTNESS_SPECS["clean"]}, epochs=1, seed=0, dim=4
    )
    assert list(robustness) == ["clean"]

    metrics_a, metrics_b = experiment_runner.run_cogent(small_world, "gt", num_scenes=8, questions_per_scene=1, epochs=1, seed=0, dim=4)
    assert metrics_a.total > 0 and metrics_b.total > 0
